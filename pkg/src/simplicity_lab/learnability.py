"""How much input before a restriction pays for itself.

Three numbers drive the estimate: the extra grammar bits the restriction
costs, the probability ``q`` that the overgeneral grammar puts on the
forbidden forms in the relevant context, and how often that context
occurs in the input.  When the restricted grammar is the overgeneral
one renormalized over the allowed forms, every occurrence of the
context saves exactly ``log2(1 / (1 - q))`` bits, so the restriction
wins after ``ceil(delta / savings)`` occurrences.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .coding import DEFAULT_PARAM_BITS, grammar_code_length
from .corpus import WILDCARD, CorpusStats
from .errors import ConditioningError, ParameterError, StructuralError
from .grammar import END, PCFG, PFSG, Grammar, TokenSequence, next_symbol_dist, \
    prefix_probability, sentence_log_loss

DEFAULT_WORDS_PER_YEAR = 10_000_000
CLOSED_FORM = "closed_form"
EMPIRICAL = "empirical"
_MATCH_TOL = 1e-9
_MAX_EXPANSIONS = 100_000


class LearnabilityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Context:
    kind: str  # "prefix" or "state"
    value: tuple

    def __str__(self):
        return f"{self.kind}:{' '.join(self.value)}"


def parse_context(spec) -> Context:
    """``prefix:<tokens>`` (``*`` = any token) or ``state:<name>``.

    A bare token sequence is taken as a prefix.
    """
    if isinstance(spec, Context):
        return spec
    if not isinstance(spec, str):
        return Context("prefix", tuple(spec))
    kind, colon, rest = spec.partition(":")
    if not colon or kind not in ("prefix", "state"):
        raise ParameterError(f"context {spec!r}: expected 'prefix:<tokens>' or 'state:<name>'")
    toks = tuple(rest.split())
    if kind == "state" and len(toks) != 1:
        raise ParameterError(f"context {spec!r}: a state context names one state")
    if END in toks:
        raise ParameterError("prefix contexts are sentence-internal and cannot contain $end")
    return Context(kind, toks)


@dataclass(frozen=True)
class LearnabilityEstimate:
    delta_bits: float
    q: float
    savings_bits: float
    occurrences_needed: float
    rate_per_million: float
    words_per_year: float
    years_needed: float
    method: str

    def as_dict(self) -> dict:
        return {
            "delta_bits": self.delta_bits,
            "q": self.q,
            "savings_bits": self.savings_bits,
            "occurrences_needed": self.occurrences_needed,
            "rate_per_million": self.rate_per_million,
            "words_per_year": self.words_per_year,
            "years_needed": self.years_needed,
            "method": self.method,
        }


# -- the four factors ---------------------------------------------------------


def rule_complexity_delta(g0: Grammar, g1: Grammar, param_bits: float = DEFAULT_PARAM_BITS) -> float:
    """Extra bits the restricted grammar ``g1`` costs over ``g0``."""
    delta = grammar_code_length(g1, param_bits) - grammar_code_length(g0, param_bits)
    if delta <= 0:
        warnings.warn(f"restricted grammar is not more complex (delta = {delta:g} bits)",
                      LearnabilityWarning, stacklevel=2)
    return delta


def _state_dist(g: Grammar, name: str) -> np.ndarray:
    if g.formalism != PFSG:
        raise ParameterError("state contexts need PFSGs")
    if name not in g.nonterminals:
        raise ParameterError(f"state {name!r} is not defined in grammar {g.name or '?'}")
    s = g.nonterminals.index(name)
    return g.transitions[:, s, :].sum(axis=1)


def _expected_visits(g: Grammar) -> np.ndarray:
    """Expected visits to each state during one sentence started at the start state."""
    T = g.transitions
    inner = T[:len(g.alphabet)].sum(axis=0)
    N = np.linalg.inv(np.eye(inner.shape[0]) - inner)
    return g.start_vector() @ N


def _expand(g: Grammar, pattern):
    slots = [g.alphabet if t == WILDCARD else (t,) for t in pattern]
    n = 1
    for s in slots:
        n *= len(s)
    if n > _MAX_EXPANSIONS:
        raise ParameterError("context pattern has too many wildcard expansions")
    return itertools.product(*slots)


def _aligned(dist: dict, symbols) -> np.ndarray:
    return np.array([dist.get(s, 0.0) for s in symbols])


def context_parts(g0: Grammar, g1: Grammar, context) -> list[tuple[float, float]]:
    """``(weight, q)`` for each concrete realization of a context.

    Weights are expected occurrences per sentence under ``g0``.
    """
    ctx = parse_context(context)
    if set(g0.alphabet) != set(g1.alphabet):
        raise StructuralError("grammars are defined over different alphabets")
    symbols = g0.symbols
    if ctx.kind == "state":
        d0, d1 = _state_dist(g0, ctx.value[0]), _state_dist(g1, ctx.value[0])
        idx = [g1.symbols.index(s) for s in symbols]
        realizations = [(float(_expected_visits(g0)[g0.nonterminals.index(ctx.value[0])]),
                         d0, d1[idx], str(ctx))]
    else:
        realizations = []
        for x in _expand(g0, ctx.value):
            w = prefix_probability(g0, x)
            if w <= 0.0:
                continue
            d0 = _aligned(next_symbol_dist(g0, x), symbols)
            try:
                d1 = _aligned(next_symbol_dist(g1, x), symbols)
            except ConditioningError:
                raise StructuralError(
                    f"restricted grammar forbids the context {' '.join(x)!r} itself") from None
            realizations.append((w, d0, d1, " ".join(x)))
    out = []
    for w, d0, d1, label in realizations:
        extra = (d1 > 0) & (d0 <= 0)
        if extra.any():
            bad = [symbols[i] for i in np.nonzero(extra)[0]]
            raise StructuralError(
                f"in context {label!r} the restricted grammar allows {bad} which the "
                "overgeneral grammar forbids; not an overgeneral/restricted pair")
        out.append((w, float(d0[d1 <= 0].sum())))
    return out


def as_contexts(context) -> list[Context]:
    """Normalize one context, a bare token sequence, or a list of contexts."""
    if isinstance(context, (str, Context)):
        return [parse_context(context)]
    items = list(context)
    if all(isinstance(c, str) and not c.startswith(("prefix:", "state:")) for c in items):
        return [Context("prefix", tuple(items))]
    return [parse_context(c) for c in items]


def disallowed_mass(g0: Grammar, g1: Grammar, context) -> float:
    """Probability ``g0`` gives to continuations ``g1`` forbids in ``context``.

    Wildcard prefixes and lists of contexts average over their concrete
    realizations, weighted by how often ``g0`` produces each one.
    """
    contexts = as_contexts(context)
    parts = [p for c in contexts for p in context_parts(g0, g1, c)]
    total = sum(w for w, _ in parts)
    if total <= 0.0:
        raise ConditioningError("context has probability zero under the overgeneral grammar")
    return sum(w * q for w, q in parts) / total


def savings_per_occurrence(q: float) -> float:
    if not 0.0 <= q < 1.0:
        raise ParameterError(f"q must lie in [0, 1), got {q!r}")
    return -math.log2(1.0 - q)


def occurrences_from_savings(delta_bits: float, savings: float) -> float:
    if delta_bits <= 0:
        return 0
    if savings <= 0:
        return math.inf
    x = delta_bits / savings
    n = math.ceil(x)
    if n - x > 1.0 - _MATCH_TOL:  # x sits on an integer up to rounding
        n -= 1
    return n


def occurrences_needed(delta_bits: float, q: float) -> float:
    """``ceil(delta / log2(1/(1-q)))``; ``inf`` when ``q`` is 0, 0 when ``delta`` is 0."""
    return occurrences_from_savings(delta_bits, savings_per_occurrence(q))


def years_needed(n_star: float, rate_per_million_words: float,
                 words_per_year: float = DEFAULT_WORDS_PER_YEAR) -> float:
    if words_per_year <= 0:
        raise ParameterError("words_per_year must be positive")
    if rate_per_million_words < 0:
        raise ParameterError("rate must be nonnegative")
    if n_star == 0:
        return 0.0
    per_year = rate_per_million_words * words_per_year / 1e6
    if per_year == 0 or math.isinf(n_star):
        return math.inf
    return n_star / per_year


# -- empirical savings ------------------------------------------------------------


def _prefix_hits(words, pattern) -> int:
    if len(words) < len(pattern):
        return 0
    return int(all(p == WILDCARD or p == w for p, w in zip(pattern, words)))


def _state_visits(g: Grammar, words, name) -> float:
    """Posterior expected visits to ``name`` while ``g`` produces ``words``."""
    T = g.transitions
    ids = g.encode_tokens(list(words) + [END])
    alphas = [g.start_vector()]
    for k in ids:
        alphas.append(alphas[-1] @ T[k])
    z = alphas[-1].sum()
    if z <= 0:
        return 0.0
    beta = np.ones(T.shape[1])
    s = g.nonterminals.index(name)
    visits = 0.0
    for i in range(len(ids) - 1, -1, -1):
        beta = T[ids[i]] @ beta
        visits += alphas[i][s] * beta[s]
    return visits / z


def occurrences_in(g0: Grammar, words, contexts) -> float:
    n = 0.0
    for c in contexts:
        ctx = parse_context(c)
        if ctx.kind == "prefix":
            n += _prefix_hits(words, ctx.value)
        else:
            n += _state_visits(g0, words, ctx.value[0])
    return n


def sentence_savings(g0: Grammar, g1: Grammar, corpus, contexts):
    """Per-sentence ``(bits under g0 - bits under g1, context occurrences)``."""
    sents = corpus.sentences() if isinstance(corpus, TokenSequence) else [tuple(s) for s in corpus]
    out = []
    for s in sents:
        b0 = sentence_log_loss(g0, s)
        if math.isinf(b0):
            raise StructuralError(f"corpus sentence {' '.join(s)!r} is impossible under g0")
        out.append((b0 - sentence_log_loss(g1, s), occurrences_in(g0, s, contexts)))
    return out


def learnability_report(g0: Grammar, g1: Grammar, contexts, corpus_stats: CorpusStats | None = None,
                        pattern=None, rate_per_million: float | None = None, corpus=None,
                        words_per_year: float = DEFAULT_WORDS_PER_YEAR,
                        param_bits: float = DEFAULT_PARAM_BITS, method: str = "auto") -> LearnabilityEstimate:
    """Compose the factors into an estimate.

    The context rate comes from ``rate_per_million`` or from
    ``corpus_stats`` counted with ``pattern``.  ``corpus`` (sentences in
    the grammars' vocabulary) lets ``auto`` check whether every sentence
    saves exactly ``occurrences * log2(1/(1-q))`` bits; if so the closed
    form is used, otherwise the mean measured saving per occurrence.
    """
    contexts = as_contexts(contexts)
    delta = rule_complexity_delta(g0, g1, param_bits)
    if rate_per_million is None:
        if corpus_stats is None or pattern is None:
            raise ParameterError("give either rate_per_million or corpus stats with a pattern")
        rate_per_million = corpus_stats.per_million(pattern)
    q = disallowed_mass(g0, g1, contexts)
    closed = savings_per_occurrence(q)
    if method not in ("auto", CLOSED_FORM, EMPIRICAL):
        raise ParameterError(f"unknown method {method!r}")
    rows = sentence_savings(g0, g1, corpus, contexts) if corpus is not None else None
    if method == "auto":
        if rows is None:
            if PCFG in (g0.formalism, g1.formalism):
                raise ParameterError("PCFG pairs need a corpus for empirical savings")
            method = CLOSED_FORM
        elif all(abs(d - n * closed) <= _MATCH_TOL for d, n in rows) and g0.formalism == PFSG:
            method = CLOSED_FORM
        else:
            method = EMPIRICAL
    if method == CLOSED_FORM:
        savings = closed
    else:
        if rows is None:
            raise ParameterError("empirical savings need a corpus")
        occ = sum(n for _, n in rows)
        if occ <= 0:
            raise StructuralError("the corpus contains no occurrence of the context")
        savings = sum(d for d, _ in rows) / occ
    n_star = occurrences_from_savings(delta, savings)
    return LearnabilityEstimate(
        delta_bits=float(delta), q=float(q), savings_bits=float(savings),
        occurrences_needed=n_star, rate_per_million=float(rate_per_million),
        words_per_year=float(words_per_year),
        years_needed=years_needed(n_star, rate_per_million, words_per_year), method=method)
