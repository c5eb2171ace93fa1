"""Word, sentence and pattern counts over plain-text corpora.

The corpus format is the one used everywhere else: UTF-8, one sentence
per line, whitespace-separated tokens, blank and ``#`` lines skipped.
A pattern is a token sequence where ``*`` matches any single token;
matches are counted at every start position inside a sentence, so they
may overlap.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import CorpusError, ParameterError

WILDCARD = "*"


def parse_pattern(text) -> tuple[str, ...]:
    pat = tuple(text.split()) if isinstance(text, str) else tuple(text)
    if not pat:
        raise ParameterError("pattern must contain at least one token")
    return pat


def pattern_text(pat: Sequence[str]) -> str:
    return " ".join(pat)


def count_in_sentence(words: Sequence[str], pat: Sequence[str]) -> int:
    m = len(pat)
    n = 0
    for i in range(len(words) - m + 1):
        for j in range(m):
            if pat[j] != WILDCARD and pat[j] != words[i + j]:
                break
        else:
            n += 1
    return n


@dataclass(frozen=True)
class CorpusStats:
    word_count: int
    sentence_count: int
    pattern_counts: dict = field(default_factory=dict)
    sha256: str = hashlib.sha256(b"").hexdigest()
    parts: tuple[str, ...] = ()

    def count(self, pattern) -> int:
        key = pattern_text(parse_pattern(pattern))
        if key not in self.pattern_counts:
            raise ParameterError(f"pattern {key!r} was not counted during ingestion")
        return self.pattern_counts[key]

    def per_million(self, pattern) -> float:
        c = self.count(pattern)
        if self.word_count == 0:
            raise CorpusError("rate undefined: the corpus has no words")
        return c * 1e6 / self.word_count

    def as_dict(self) -> dict:
        pats = []
        for p, c in self.pattern_counts.items():
            rate = c * 1e6 / self.word_count if self.word_count else None
            pats.append({"pattern": p, "count": c, "per_million": rate})
        out = {"word_count": self.word_count, "sentence_count": self.sentence_count,
               "patterns": pats, "sha256": self.sha256}
        if self.parts:
            out["parts"] = list(self.parts)
        return out


def _lines(source):
    """Yield raw byte lines from a path, bytes, text or binary stream."""
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            yield from fh
        return
    if isinstance(source, bytes):
        yield from io.BytesIO(source)
        return
    for line in source:
        yield line.encode("utf-8") if isinstance(line, str) else line


def ingest(source, patterns: Iterable = ()) -> CorpusStats:
    """Single streaming pass: counts, pattern matches and the sha256 of the bytes.

    ``source`` is a path, a bytes object or an iterable of byte (or str)
    lines.  Undecodable input raises :class:`CorpusError` naming the
    absolute byte offset of the first bad byte.
    """
    pats = [parse_pattern(p) for p in patterns]
    counts = {pattern_text(p): 0 for p in pats}
    h = hashlib.sha256()
    words = sents = 0
    offset = 0
    for raw in _lines(source):
        h.update(raw)
        try:
            line = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorpusError(f"invalid UTF-8 at byte offset {offset + exc.start}") from None
        offset += len(raw)
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        toks = line.split()
        words += len(toks)
        sents += 1
        for p in pats:
            counts[pattern_text(p)] += count_in_sentence(toks, p)
    return CorpusStats(words, sents, counts, h.hexdigest())


def merge(a: CorpusStats, b: CorpusStats) -> CorpusStats:
    """Stats of the two corpora taken together; associative.

    The combined digest hashes the ordered list of part digests, which
    are kept in ``parts``.
    """
    if list(a.pattern_counts) != list(b.pattern_counts):
        raise ParameterError("cannot merge stats counted with different patterns")
    parts = (a.parts or (a.sha256,)) + (b.parts or (b.sha256,))
    digest = hashlib.sha256("\n".join(parts).encode("ascii")).hexdigest()
    counts = {k: a.pattern_counts[k] + b.pattern_counts[k] for k in a.pattern_counts}
    return CorpusStats(a.word_count + b.word_count, a.sentence_count + b.sentence_count,
                       counts, digest, parts)


def count_matches(source, pattern) -> tuple[int, float]:
    """``(count, per-million rate)`` of ``pattern`` in stats or a corpus."""
    if isinstance(source, CorpusStats):
        stats = source
    elif hasattr(source, "sentences") and callable(source.sentences):
        stats = ingest([" ".join(s) + "\n" for s in source.sentences()], [pattern])
    else:
        stats = ingest(source, [pattern])
    return stats.count(pattern), stats.per_million(pattern)


def occurrence_rate_per_year(count: float, word_count: int, words_per_year: float) -> float:
    if word_count <= 0:
        raise CorpusError("rate undefined: the corpus has no words")
    if words_per_year <= 0:
        raise ParameterError("words_per_year must be positive")
    return count * words_per_year / word_count
