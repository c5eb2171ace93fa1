"""Learning a joint distribution over (sentence, interpretation) pairs.

Pairs are drawn independently, so a joint hypothesis is a single-state
source whose symbols are table cells.  The mixture machinery of
:mod:`simplicity_lab.learner` then applies unchanged, and both
conditionals can be read off the predictive joint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .coding import DEFAULT_PARAM_BITS
from .errors import ClassExhaustedError, ConditioningError, CorpusError, ManifestError, ParameterError
from .learner import ConvergenceProfile, FiniteSource, convergence_profile, mixture_from_sources

SUM_TOL = 1e-9


@dataclass(frozen=True)
class FormMeaningPair:
    sentence: tuple[str, ...]
    interpretation: str


def _sentence(text: str) -> tuple[str, ...]:
    return tuple(text.split())


def parse_inventory(text: str) -> tuple[str, ...]:
    """One interpretation label per line; blank and ``#`` lines skipped."""
    labels = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line in labels:
            raise CorpusError(f"inventory line {lineno}: duplicate label {line!r}")
        labels.append(line)
    return tuple(labels)


def parse_pairs(text: str, inventory: Sequence[str] | None = None) -> list[FormMeaningPair]:
    """Lines ``sentence<TAB>interpretation``; repeats are kept."""
    known = set(inventory) if inventory is not None else None
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        parts = raw.split("\t")
        if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
            raise CorpusError(f"pairs line {lineno}: expected 'sentence<TAB>interpretation'")
        label = parts[1].strip()
        if known is not None and label not in known:
            raise CorpusError(f"pairs line {lineno}: undeclared interpretation {label!r}")
        out.append(FormMeaningPair(_sentence(parts[0]), label))
    return out


class JointTable:
    """A finite joint distribution over sentences x interpretations.

    ``probs[i, j]`` is the probability of ``(sentences[i], labels[j])``.
    Ambiguity (one sentence, several labels) and paraphrase (one label,
    several sentences) are both just nonzero cells.
    """

    def __init__(self, sentences, labels, probs, name: str = ""):
        self.sentences = tuple(tuple(s) for s in sentences)
        self.labels = tuple(labels)
        self.probs = np.asarray(probs, dtype=float)
        self.name = name
        if self.probs.shape != (len(self.sentences), len(self.labels)):
            raise ParameterError("table shape does not match its sentences and labels")
        if len(set(self.sentences)) != len(self.sentences):
            raise ParameterError("table lists a sentence twice")
        if (self.probs < 0).any():
            raise ParameterError("table has a negative cell")
        if abs(self.probs.sum() - 1.0) > SUM_TOL:
            raise ParameterError(f"table cells sum to {self.probs.sum():.12g}, not 1")

    @property
    def shape(self):
        return self.probs.shape

    def description_bits(self, param_bits: float = DEFAULT_PARAM_BITS) -> float:
        """Header with the table size, then each nonzero cell's position and
        ``param_bits`` per free probability (the last one is implied)."""
        R, C = self.shape
        nz = int((self.probs > 0).sum())
        header = math.ceil(math.log2(R + 1)) + math.ceil(math.log2(C + 1))
        cell = math.ceil(math.log2(R * C)) if R * C > 1 else 0
        return float(header + nz * cell + param_bits * (nz - 1))

    def aligned(self, sentences, labels) -> np.ndarray:
        """This table's cells on another sentence/label grid (missing = 0)."""
        ri = {s: i for i, s in enumerate(self.sentences)}
        ci = {c: j for j, c in enumerate(self.labels)}
        for s in self.sentences:
            if s not in set(sentences):
                raise ParameterError(f"sentence {' '.join(s)!r} missing from the grid")
        out = np.zeros((len(sentences), len(labels)))
        for a, s in enumerate(sentences):
            if s not in ri:
                continue
            for b, c in enumerate(labels):
                if c in ci:
                    out[a, b] = self.probs[ri[s], ci[c]]
        return out

    def sample(self, n: int, seed: int) -> list[FormMeaningPair]:
        rng = np.random.default_rng(seed)
        flat = self.probs.ravel()
        idx = rng.choice(flat.size, size=n, p=flat / flat.sum())
        C = len(self.labels)
        return [FormMeaningPair(self.sentences[i // C], self.labels[i % C]) for i in idx.tolist()]

    def to_text(self) -> str:
        lines = []
        for i, s in enumerate(self.sentences):
            for j, c in enumerate(self.labels):
                if self.probs[i, j] > 0:
                    lines.append(f"{' '.join(s)}\t{c}\t{self.probs[i, j]!r}")
        return "\n".join(lines) + "\n"


def parse_table(text: str, inventory: Sequence[str] | None = None, name: str = "") -> JointTable:
    """Lines ``sentence<TAB>interpretation<TAB>probability``; absent cells are 0."""
    cells = {}
    sentences, labels = [], list(inventory) if inventory is not None else []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        parts = raw.split("\t")
        if len(parts) != 3:
            raise CorpusError(f"table line {lineno}: expected 'sentence<TAB>interpretation<TAB>prob'")
        s, c = _sentence(parts[0]), parts[1].strip()
        try:
            p = float(parts[2])
        except ValueError:
            raise CorpusError(f"table line {lineno}: bad probability {parts[2]!r}") from None
        if inventory is not None and c not in inventory:
            raise CorpusError(f"table line {lineno}: undeclared interpretation {c!r}")
        if (s, c) in cells:
            raise CorpusError(f"table line {lineno}: cell listed twice")
        if s not in sentences:
            sentences.append(s)
        if c not in labels:
            labels.append(c)
        cells[s, c] = p
    probs = np.zeros((len(sentences), len(labels)))
    for (s, c), p in cells.items():
        probs[sentences.index(s), labels.index(c)] = p
    try:
        return JointTable(sentences, labels, probs, name=name)
    except ParameterError as exc:
        raise CorpusError(f"table {name or '?'}: {exc}") from None


def load_table(path, inventory=None) -> JointTable:
    path = Path(path)
    return parse_table(path.read_text(encoding="utf-8"), inventory, name=path.stem)


class JointClass:
    """Hypothesis tables laid out on one shared sentence x label grid."""

    def __init__(self, tables: Sequence[JointTable], priors=None,
                 param_bits: float = DEFAULT_PARAM_BITS):
        if not tables:
            raise ManifestError("hypothesis class is empty")
        sentences, labels = [], []
        for t in tables:
            sentences += [s for s in t.sentences if s not in sentences]
            labels += [c for c in t.labels if c not in labels]
        self.sentences, self.labels = tuple(sentences), tuple(labels)
        self.tables = tuple(tables)
        self.grids = np.stack([t.aligned(self.sentences, self.labels) for t in tables])
        flat = self.grids.reshape(len(tables), -1)
        for i in range(len(tables)):
            for j in range(i):
                if np.array_equal(flat[i], flat[j]):
                    raise ManifestError(f"duplicate table: {tables[i].name or i}")
        self.bits = np.array([t.description_bits(param_bits) for t in tables])
        names = [t.name or f"t{i}" for i, t in enumerate(tables)]
        self.mixture = mixture_from_sources(names, [FiniteSource.iid(f, self.cells) for f in flat],
                                            self.bits, priors)
        self.priors = self.mixture.priors

    @property
    def cells(self) -> tuple[str, ...]:
        return tuple(f"{' '.join(s)}\t{c}" for s in self.sentences for c in self.labels)

    def cell_index(self, pair: FormMeaningPair) -> int:
        try:
            i = self.sentences.index(pair.sentence)
            j = self.labels.index(pair.interpretation)
        except ValueError:
            raise ClassExhaustedError(
                f"pair ({' '.join(pair.sentence)!r}, {pair.interpretation!r}) is outside every table") from None
        return i * len(self.labels) + j


@dataclass
class JointPosterior:
    """Posterior over tables plus the posterior-predictive joint."""

    cls: JointClass
    log_evidence: np.ndarray
    n_pairs: int

    @property
    def posterior(self) -> np.ndarray:
        j = np.log2(self.cls.priors) + self.log_evidence
        top = j.max()
        if top == -math.inf:
            raise ClassExhaustedError("no table supports every observed pair")
        w = np.exp2(j - top)
        return w / w.sum()

    def predictive(self) -> np.ndarray:
        joint = np.tensordot(self.posterior, self.cls.grids, axes=1)
        return joint / joint.sum()

    def marginal_sentences(self) -> dict:
        return dict(zip(self.cls.sentences, self.predictive().sum(axis=1).tolist()))

    def marginal_labels(self) -> dict:
        return dict(zip(self.cls.labels, self.predictive().sum(axis=0).tolist()))


def learn_joint(cls: JointClass, pairs: Sequence[FormMeaningPair]) -> JointPosterior:
    """Bayesian posterior after ``pairs``; depends only on their counts."""
    counts = np.zeros(len(cls.cells))
    for p in pairs:
        counts[cls.cell_index(p)] += 1
    flat = cls.grids.reshape(len(cls.tables), -1)
    ev = np.zeros(len(cls.tables))
    seen = counts > 0
    for h in range(len(cls.tables)):
        f = flat[h, seen]
        ev[h] = -math.inf if (f <= 0).any() else float(counts[seen] @ np.log2(f))
    post = JointPosterior(cls, ev, len(pairs))
    post.posterior  # raises when exhausted
    return post


def conditional(post: JointPosterior, sentence=None, interpretation=None) -> dict:
    """``P(label | sentence)`` or ``P(sentence | label)`` from the predictive joint."""
    if (sentence is None) == (interpretation is None):
        raise ParameterError("condition on exactly one of sentence or interpretation")
    joint = post.predictive()
    cls = post.cls
    if sentence is not None:
        s = _sentence(sentence) if isinstance(sentence, str) else tuple(sentence)
        if s not in cls.sentences:
            raise ConditioningError(f"sentence {' '.join(s)!r} has probability zero")
        row = joint[cls.sentences.index(s)]
        if row.sum() <= 0:
            raise ConditioningError(f"sentence {' '.join(s)!r} has probability zero")
        return dict(zip(cls.labels, (row / row.sum()).tolist()))
    if interpretation not in cls.labels:
        raise ConditioningError(f"interpretation {interpretation!r} has probability zero")
    col = joint[:, cls.labels.index(interpretation)]
    if col.sum() <= 0:
        raise ConditioningError(f"interpretation {interpretation!r} has probability zero")
    return {" ".join(s): v for s, v in zip(cls.sentences, (col / col.sum()).tolist())}


def joint_error_profile(cls: JointClass, truth: JointTable, horizon: int, mode: str = "exact",
                        param_bits: float = DEFAULT_PARAM_BITS, **kw) -> ConvergenceProfile:
    """Convergence profile with pair outcomes as the symbols."""
    grid = truth.aligned(cls.sentences, cls.labels).ravel()
    src = FiniteSource.iid(grid, cls.cells)
    kw.setdefault("fs", (8.0,))
    return convergence_profile(cls.mixture, src, horizon, mode,
                               truth_bits=truth.description_bits(param_bits), **kw)


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)
