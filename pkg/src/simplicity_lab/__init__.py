"""Minimum-description-length tools for probabilistic grammars."""

__version__ = "0.1.0"
