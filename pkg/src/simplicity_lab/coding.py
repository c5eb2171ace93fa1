"""Two-part code lengths: bits for the grammar plus bits for the data.

Grammar cost uses one fixed scheme so that results are comparable across
runs.  A rule with ``k`` emitted symbols costs ``(k + 2) * b`` bits, where
``b = ceil(log2(N + T + 2))`` addresses any of the ``N`` sources, ``T``
terminals, ``$end`` and a rule separator; on top of that every source
pays ``param_bits`` for each of its rule probabilities except the last,
which is implied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import GrammarValidationError, OutOfVocabularyError
from .grammar import Grammar, TokenSequence, stream_log_loss

DEFAULT_PARAM_BITS = 8


def symbol_bits(n_sources: int, n_terminals: int) -> int:
    return math.ceil(math.log2(n_sources + n_terminals + 2))


def free_parameters(g: Grammar) -> int:
    counts = {}
    for r in g.rules:
        counts[r.source] = counts.get(r.source, 0) + 1
    return sum(c - 1 for c in counts.values())


def grammar_code_length(g: Grammar, param_bits: float = DEFAULT_PARAM_BITS) -> float:
    """Description length of ``g`` in bits under the fixed scheme."""
    b = symbol_bits(len(g.nonterminals), len(g.alphabet))
    structure = sum((r.arity + 2) * b for r in g.rules)
    return float(structure + param_bits * free_parameters(g))


@dataclass(frozen=True)
class CodeLengthReport:
    grammar_bits: float
    data_bits: float
    total_bits: float
    per_sentence_bits: tuple[float, ...] = field(default=())

    def as_dict(self):
        return {
            "grammar_bits": self.grammar_bits,
            "data_bits": self.data_bits,
            "total_bits": self.total_bits,
            "per_sentence_bits": list(self.per_sentence_bits),
        }


def _sentences(corpus):
    if isinstance(corpus, TokenSequence):
        return corpus.sentences(), corpus
    sents = [tuple(s) for s in corpus]
    return sents, TokenSequence.from_sentences(sents)


def per_sentence_code_lengths(g: Grammar, corpus) -> list[float]:
    sents, seq = _sentences(corpus)
    vocab = set(g.alphabet)
    for i, s in enumerate(sents):
        for tok in s:
            if tok not in vocab:
                raise OutOfVocabularyError(tok, line=seq.line_of(i))
    return [float(x) for x in stream_log_loss(g, sents)]


def _sum(values) -> float:
    # fixed left-to-right order keeps totals bit-stable
    total = 0.0
    for v in values:
        total += v
    return total


def data_code_length(g: Grammar, corpus) -> float:
    """Bits to encode ``corpus`` given ``g``; ``inf`` if any sentence is impossible."""
    return _sum(per_sentence_code_lengths(g, corpus))


def two_part_length(g: Grammar, corpus, param_bits: float = DEFAULT_PARAM_BITS) -> CodeLengthReport:
    per = per_sentence_code_lengths(g, corpus)
    gbits = grammar_code_length(g, param_bits)
    dbits = _sum(per)
    return CodeLengthReport(gbits, dbits, gbits + dbits, tuple(per))


def cumulative_totals(g: Grammar, corpus, param_bits: float = DEFAULT_PARAM_BITS) -> list[float]:
    """Two-part total after each prefix of 0, 1, 2, ... sentences."""
    rep = two_part_length(g, corpus, param_bits)
    out = [rep.grammar_bits]
    acc = rep.grammar_bits
    for b in rep.per_sentence_bits:
        acc += b
        out.append(acc)
    return out


def crossover_point(g0: Grammar, g1: Grammar, stream, param_bits: float = DEFAULT_PARAM_BITS):
    """Index of the sentence whose inclusion first makes ``g1`` strictly cheaper.

    Scans cumulative two-part totals.  Returns the 0-based index ``i``
    such that the prefix of sentences ``0..i`` is the shortest one where
    ``total(g1) < total(g0)``, or ``None`` when that never happens within
    the stream.  (Equivalently, ``i`` is the number of sentences seen
    before the flip.)
    """
    if set(g0.alphabet) != set(g1.alphabet):
        raise GrammarValidationError("grammars are defined over different alphabets")
    t0 = cumulative_totals(g0, stream, param_bits)
    t1 = cumulative_totals(g1, stream, param_bits)
    for n in range(1, len(t0)):
        if t1[n] < t0[n]:
            return n - 1
    return None
