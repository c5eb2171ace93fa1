"""Probabilistic grammars: parsing, validation, sampling and scoring.

Two formalisms are supported.  A PFSG is a probabilistic finite-state
generator whose states emit one terminal and move on, or emit the
sentence terminator ``$end``; it gives exact prefix and next-symbol
probabilities.  A PCFG is scored sentence by sentence with the inside
algorithm.

Token streams are sequences of sentences, each closed by ``$end``.  After
``$end`` a PFSG restarts in its start state unless the rule names a
successor (``q : $end -> r : p``), which lets a grammar carry state from
one sentence to the next.
"""

from __future__ import annotations

import logging
import math
import re
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import (
    ConditioningError,
    GrammarSyntaxError,
    GrammarValidationError,
    OutOfVocabularyError,
)

log = logging.getLogger(__name__)

END = "$end"
PFSG = "pfsg"
PCFG = "pcfg"
PROB_TOL = 1e-6
SPECTRAL_TOL = 1e-9

_NUMBER = re.compile(r"^[+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?$")


@dataclass(frozen=True)
class Rule:
    source: str
    emission: tuple[str, ...]
    prob: float
    line: int = 0

    @property
    def arity(self) -> int:
        return len(self.emission)

    @property
    def successor(self) -> str | None:
        """PFSG only: the state entered after this emission, if any."""
        return self.emission[1] if len(self.emission) == 2 else None

    def __str__(self):
        return f"{self.source} -> {' '.join(self.emission)} : {self.prob:g}"


@dataclass(frozen=True)
class TokenSequence:
    """Sentence-segmented tokens; ``$end`` closes every complete sentence.

    ``truncated`` marks a stream cut by a token budget in mid-sentence;
    the trailing fragment is kept in ``tokens`` but is not a sentence.
    ``lines`` optionally records the source line of each sentence.
    """

    tokens: tuple[str, ...] = ()
    truncated: bool = False
    lines: tuple[int, ...] | None = None

    @classmethod
    def from_sentences(cls, sentences: Iterable[Sequence[str]], lines=None) -> "TokenSequence":
        toks = []
        for s in sentences:
            s = tuple(s)
            if s and s[-1] == END:
                s = s[:-1]
            if END in s:
                raise ValueError("sentence contains an interior $end")
            toks.extend(s)
            toks.append(END)
        return cls(tuple(toks), lines=tuple(lines) if lines is not None else None)

    def sentences(self) -> list[tuple[str, ...]]:
        out, cur = [], []
        for t in self.tokens:
            if t == END:
                out.append(tuple(cur))
                cur = []
            else:
                cur.append(t)
        return out

    def words(self) -> list[str]:
        return [t for t in self.tokens if t != END]

    def __len__(self):
        return len(self.tokens)

    def line_of(self, sentence_index: int) -> int:
        if self.lines is None:
            return sentence_index + 1
        return self.lines[sentence_index]


def parse_corpus(text: str) -> TokenSequence:
    """Corpus format: one sentence per line, single-space separated tokens.

    Blank lines and lines starting with ``#`` are skipped.
    """
    sentences, lines = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        sentences.append(line.split())
        lines.append(lineno)
    return TokenSequence.from_sentences(sentences, lines=lines)


def load_corpus(path) -> TokenSequence:
    return parse_corpus(Path(path).read_text(encoding="utf-8"))


class Grammar:
    """An immutable, validated probabilistic grammar.

    Construct through :func:`parse_grammar` or directly from rules; the
    constructor runs every structural check.
    """

    def __init__(self, formalism: str, start: str, rules: Sequence[Rule],
                 alphabet: Sequence[str] | None = None, name: str = ""):
        if formalism not in (PFSG, PCFG):
            raise GrammarValidationError(f"unknown formalism {formalism!r}")
        self.formalism = formalism
        self.start = start
        self.rules = tuple(rules)
        self.name = name
        sources = []
        for r in self.rules:
            if r.source not in sources:
                sources.append(r.source)
        self.nonterminals = tuple(sources)
        self._declared_alphabet = alphabet is not None
        self.alphabet = self._collect_alphabet(alphabet)
        self._validate()

    # -- construction helpers -------------------------------------------------

    def _collect_alphabet(self, declared):
        nts = set(self.nonterminals)
        used = []
        for r in self.rules:
            syms = r.emission[:1] if self.formalism == PFSG else r.emission
            for sym in syms:
                if sym == END:
                    continue
                if self.formalism == PCFG and sym in nts:
                    continue
                if sym not in used:
                    used.append(sym)
        if declared is None:
            return tuple(used)
        declared = tuple(declared)
        if len(set(declared)) != len(declared):
            raise GrammarValidationError("alphabet declares a symbol twice")
        if END in declared:
            raise GrammarValidationError("$end is reserved and cannot be declared")
        missing = [s for s in used if s not in declared]
        if missing:
            raise GrammarValidationError(f"undeclared symbol {missing[0]!r}")
        clash = nts.intersection(declared) if self.formalism == PCFG else ()
        if clash:
            raise GrammarValidationError(f"symbol {sorted(clash)[0]!r} is both a terminal and a source")
        return declared

    def _validate(self):
        if not self.rules:
            raise GrammarValidationError("grammar has no rules")
        if self.start not in self.nonterminals:
            raise GrammarValidationError(f"start symbol {self.start!r} has no rules")
        seen = set()
        totals = defaultdict(float)
        for r in self.rules:
            if not (0.0 < r.prob <= 1.0):
                raise GrammarValidationError(
                    f"line {r.line}: probability {r.prob!r} outside (0, 1]")
            key = (r.source, r.emission)
            if key in seen:
                raise GrammarValidationError(f"line {r.line}: duplicate rule for {r.source!r}")
            seen.add(key)
            totals[r.source] += r.prob
            self._check_rule_shape(r)
        for src, tot in totals.items():
            if abs(tot - 1.0) > PROB_TOL:
                raise GrammarValidationError(
                    f"probabilities for {src!r} sum to {tot:.9g}, not 1")
        if self.formalism == PFSG:
            self._check_pfsg_termination()
        else:
            self._check_pcfg_termination()

    def _check_rule_shape(self, r):
        if self.formalism == PFSG:
            if len(r.emission) not in (1, 2):
                raise GrammarValidationError(f"line {r.line}: PFSG rule needs one emission")
            if len(r.emission) == 1 and r.emission[0] != END:
                raise GrammarValidationError(f"line {r.line}: terminal emission needs a successor state")
            nxt = r.successor
            if nxt is not None and nxt not in self.nonterminals:
                raise GrammarValidationError(f"line {r.line}: undeclared symbol {nxt!r}")
        else:
            if not r.emission:
                raise GrammarValidationError(f"line {r.line}: empty right-hand side")
            if END in r.emission:
                raise GrammarValidationError(f"line {r.line}: $end cannot appear in a PCFG rule")

    def _check_pfsg_termination(self):
        reach = self._reachable_states()
        # END must be reachable from every reachable state
        can_end = {r.source for r in self.rules if r.emission[0] == END}
        preds = defaultdict(set)
        for r in self.rules:
            if r.emission[0] != END and r.successor is not None:
                preds[r.successor].add(r.source)
        stack = list(can_end)
        while stack:
            s = stack.pop()
            for p in preds[s]:
                if p not in can_end:
                    can_end.add(p)
                    stack.append(p)
        stuck = [s for s in self.nonterminals if s in reach and s not in can_end]
        if stuck:
            raise GrammarValidationError(f"non-terminating grammar: state {stuck[0]!r} never reaches $end")
        # absorption analysis: P(sentence ends | state) must be 1
        idx = {s: i for i, s in enumerate(self.nonterminals)}
        n = len(idx)
        A = np.zeros((n, n))
        e = np.zeros(n)
        for r in self.rules:
            if r.emission[0] == END:
                e[idx[r.source]] += r.prob
            else:
                A[idx[r.source], idx[r.successor]] += r.prob
        z = np.linalg.solve(np.eye(n) - A, e)
        for s in reach:
            if abs(z[idx[s]] - 1.0) > PROB_TOL:
                raise GrammarValidationError(
                    f"non-terminating grammar: sentences from {s!r} end with probability {z[idx[s]]:.9g}")

    def _reachable_states(self):
        succ = defaultdict(set)
        for r in self.rules:
            if r.successor is not None:
                succ[r.source].add(r.successor)
        seen = {self.start}
        stack = [self.start]
        while stack:
            s = stack.pop()
            for t in succ[s]:
                if t not in seen:
                    seen.add(t)
                    stack.append(t)
        return seen

    def _check_pcfg_termination(self):
        rho = self.spectral_radius
        if not rho < 1.0 - SPECTRAL_TOL:
            raise GrammarValidationError(
                f"non-terminating grammar: mean-matrix spectral radius {rho:.9g} >= 1")

    # -- derived structure ----------------------------------------------------

    @cached_property
    def spectral_radius(self) -> float:
        """Largest |eigenvalue| of the expected-offspring matrix (PCFG)."""
        idx = {s: i for i, s in enumerate(self.nonterminals)}
        M = np.zeros((len(idx), len(idx)))
        for r in self.rules:
            for sym in r.emission:
                if sym in idx:
                    M[idx[r.source], idx[sym]] += r.prob
        return float(max(abs(np.linalg.eigvals(M)))) if len(idx) else 0.0

    @cached_property
    def symbols(self) -> tuple[str, ...]:
        """Alphabet followed by ``$end``: the index space for distributions."""
        return self.alphabet + (END,)

    @cached_property
    def _sym_index(self):
        return {s: i for i, s in enumerate(self.symbols)}

    @cached_property
    def _state_index(self):
        return {s: i for i, s in enumerate(self.nonterminals)}

    @cached_property
    def transitions(self) -> np.ndarray:
        """PFSG transition tensor ``T[k, s, s']`` over :attr:`symbols`."""
        self._require(PFSG)
        S = len(self.nonterminals)
        T = np.zeros((len(self.symbols), S, S))
        si, ki = self._state_index, self._sym_index
        for r in self.rules:
            dst = r.successor if r.successor is not None else self.start
            T[ki[r.emission[0]], si[r.source], si[dst]] += r.prob
        T.setflags(write=False)
        return T

    @cached_property
    def _csr(self):
        self._require(PFSG)
        si, ki = self._state_index, self._sym_index
        by_src = defaultdict(list)
        for r in self.rules:
            dst = r.successor if r.successor is not None else self.start
            by_src[si[r.source]].append((ki[r.emission[0]], si[dst], r.prob))
        row_ptr, t_sym, t_dst, t_prob, t_cum = [0], [], [], [], []
        for s in range(len(self.nonterminals)):
            acc = 0.0
            for k, d, p in by_src[s]:
                t_sym.append(k)
                t_dst.append(d)
                t_prob.append(p)
                acc += p
                t_cum.append(acc)
            row_ptr.append(len(t_sym))
        arr = lambda a, dt: np.asarray(a, dtype=dt)
        return (arr(row_ptr, np.int32), arr(t_sym, np.int32), arr(t_dst, np.int32),
                arr(t_prob, np.float64), arr(t_cum, np.float64))

    @cached_property
    def is_deterministic(self) -> bool:
        """PFSG: each (state, symbol) has at most one successor."""
        self._require(PFSG)
        return bool(((self.transitions > 0).sum(axis=2) <= 1).all())

    def _require(self, formalism):
        if self.formalism != formalism:
            raise GrammarValidationError(f"operation needs a {formalism.upper()} grammar")

    def encode_tokens(self, tokens: Sequence[str]) -> np.ndarray:
        ki = self._sym_index
        out = np.empty(len(tokens), dtype=np.int32)
        for i, t in enumerate(tokens):
            try:
                out[i] = ki[t]
            except KeyError:
                raise OutOfVocabularyError(t) from None
        return out

    def start_vector(self) -> np.ndarray:
        v = np.zeros(len(self.nonterminals))
        v[self._state_index[self.start]] = 1.0
        return v

    def to_text(self) -> str:
        lines = [f"format: {self.formalism}", f"start: {self.start}"]
        if self._declared_alphabet:
            lines.append("alphabet: " + " ".join(self.alphabet))
        for r in self.rules:
            if self.formalism == PCFG:
                lines.append(f"{r.source} -> {' '.join(r.emission)} : {r.prob!r}")
            elif r.emission[0] == END and r.successor is None:
                lines.append(f"{r.source} : {END} : {r.prob!r}")
            else:
                lines.append(f"{r.source} : {r.emission[0]} -> {r.emission[1]} : {r.prob!r}")
        return "\n".join(lines) + "\n"

    def signature(self):
        """Canonical content used to detect duplicate hypotheses."""
        return (self.formalism, self.start, tuple(sorted(self.alphabet)),
                tuple(sorted((r.source, r.emission, r.prob) for r in self.rules)))

    def __repr__(self):
        label = f" {self.name}" if self.name else ""
        return f"<Grammar{label} {self.formalism} start={self.start} rules={len(self.rules)}>"

    # -- PCFG compilation -----------------------------------------------------

    @cached_property
    def _inside_tables(self):
        self._require(PCFG)
        nts = list(self.nonterminals)
        index = {s: i for i, s in enumerate(nts)}
        term_index = self._sym_index
        binary, unary, lexical = [], [], []
        pre = {}

        def sym_id(sym):
            if sym in index:
                return index[sym]
            if sym not in pre:
                name = f"<{sym}>"
                index[name] = len(nts)
                nts.append(name)
                pre[sym] = index[name]
                lexical.append((pre[sym], term_index[sym], 1.0))
            return pre[sym]

        n_aux = 0
        for r in self.rules:
            a = index[r.source]
            rhs = r.emission
            if len(rhs) == 1:
                if rhs[0] in self._state_index:
                    unary.append((a, index[rhs[0]], r.prob))
                else:
                    lexical.append((a, term_index[rhs[0]], r.prob))
                continue
            ids = [sym_id(s) for s in rhs]
            lhs, p = a, r.prob
            while len(ids) > 2:
                n_aux += 1
                aux = f"<aux{n_aux}>"
                index[aux] = len(nts)
                nts.append(aux)
                binary.append((lhs, ids[0], index[aux], p))
                lhs, p, ids = index[aux], 1.0, ids[1:]
            binary.append((lhs, ids[0], ids[1], p))
        S = len(nts)
        lex = np.zeros((len(self.symbols), S))
        for a, t, p in lexical:
            lex[t, a] += p
        U = np.zeros((S, S))
        for a, b, p in unary:
            U[a, b] += p
        has_unary = bool(unary)
        closure = np.linalg.inv(np.eye(S) - U) if has_unary else np.eye(S)
        cols = list(zip(*binary)) if binary else [(), (), (), ()]
        bin_arrays = (np.asarray(cols[0], dtype=np.int32), np.asarray(cols[1], dtype=np.int32),
                      np.asarray(cols[2], dtype=np.int32), np.asarray(cols[3], dtype=np.float64))
        return lex, bin_arrays, closure, has_unary, index[self.start]

    def inside_chart(self, words: Sequence[str], backend=None) -> np.ndarray:
        lex, binary, closure, has_unary, _ = self._inside_tables
        return kernels.inside_chart(self.encode_tokens(words), lex, binary, closure,
                                    has_unary, backend=backend)


# -- parsing ------------------------------------------------------------------

def parse_grammar(text: str, name: str = "") -> Grammar:
    """Parse and validate the line-oriented grammar file format."""
    formalism = start = None
    alphabet = None
    rules = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        col0 = len(line) - len(line.lstrip()) + 1
        head, _, rest = stripped.partition(":")
        key = head.strip()
        if formalism is None:
            if key != "format":
                raise GrammarSyntaxError("expected 'format: pfsg' or 'format: pcfg'", lineno, col0)
            formalism = rest.strip().lower()
            if formalism not in (PFSG, PCFG):
                raise GrammarSyntaxError(f"unknown format {rest.strip()!r}", lineno,
                                         line.index(":") + 2)
            continue
        if start is None:
            if key != "start":
                raise GrammarSyntaxError("expected 'start: <name>'", lineno, col0)
            parts = rest.split()
            if len(parts) != 1:
                raise GrammarSyntaxError("start needs exactly one name", lineno, line.index(":") + 2)
            start = parts[0]
            continue
        if key == "alphabet" and "->" not in rest and alphabet is None and not rules:
            alphabet = rest.split()
            continue
        if formalism == PCFG:
            rules.extend(_parse_pcfg_line(line, lineno))
        else:
            rules.append(_parse_pfsg_line(line, lineno))
    if formalism is None:
        raise GrammarSyntaxError("empty grammar file", 1, 1)
    if start is None:
        raise GrammarSyntaxError("missing 'start:' line", 2, 1)
    return Grammar(formalism, start, rules, alphabet=alphabet, name=name)


def load_grammar(path) -> Grammar:
    path = Path(path)
    return parse_grammar(path.read_text(encoding="utf-8"), name=path.stem)


def _prob(text, line, lineno):
    tok = text.strip()
    col = line.rfind(tok) + 1 if tok else len(line) + 1
    if not _NUMBER.match(tok):
        raise GrammarSyntaxError(f"bad probability {tok!r}", lineno, col)
    return float(tok)


def _names(text, line, lineno, start_at):
    parts = text.split()
    for p in parts:
        if p in (":", "->", "|"):
            raise GrammarSyntaxError(f"unexpected {p!r}", lineno, line.find(p, start_at) + 1)
    return parts


def _parse_pcfg_line(line, lineno):
    lhs, arrow, rhs = line.partition("->")
    if not arrow:
        raise GrammarSyntaxError("expected '->'", lineno, len(line.rstrip()) + 1)
    src = _names(lhs, line, lineno, 0)
    if len(src) != 1:
        raise GrammarSyntaxError("rule needs exactly one left-hand symbol", lineno,
                                 len(line) - len(line.lstrip()) + 1)
    out = []
    offset = len(lhs) + 2
    for alt in rhs.split("|"):
        body, colon, p = alt.rpartition(":")
        if not colon:
            raise GrammarSyntaxError("expected ': <prob>'", lineno, offset + len(alt.rstrip()) + 1)
        syms = _names(body, line, lineno, offset)
        if not syms:
            raise GrammarSyntaxError("empty right-hand side", lineno, offset + 1)
        out.append(Rule(src[0], tuple(syms), _prob(p, line, lineno), lineno))
        offset += len(alt) + 1
    return out


def _parse_pfsg_line(line, lineno):
    body, colon, p = line.rpartition(":")
    if not colon:
        raise GrammarSyntaxError("expected ': <prob>'", lineno, len(line.rstrip()) + 1)
    prob = _prob(p, line, lineno)
    state, colon, emit = body.partition(":")
    if not colon:
        raise GrammarSyntaxError("expected '<state> : <terminal> -> <state>'", lineno,
                                 len(body.rstrip()) + 1)
    src = _names(state, line, lineno, 0)
    if len(src) != 1:
        raise GrammarSyntaxError("rule needs exactly one source state", lineno,
                                 len(line) - len(line.lstrip()) + 1)
    sym, arrow, nxt = emit.partition("->")
    sym_names = _names(sym, line, lineno, len(state) + 1)
    if len(sym_names) != 1:
        raise GrammarSyntaxError("expected exactly one emitted symbol", lineno, len(state) + 2)
    if arrow:
        nxt_names = _names(nxt, line, lineno, len(state) + len(sym) + 3)
        if len(nxt_names) != 1:
            raise GrammarSyntaxError("expected exactly one successor state", lineno,
                                     len(state) + len(sym) + 4)
        return Rule(src[0], (sym_names[0], nxt_names[0]), prob, lineno)
    if sym_names[0] != END:
        raise GrammarSyntaxError("terminal emission needs '-> <state>'", lineno,
                                 len(state) + len(sym) + 2)
    return Rule(src[0], (END,), prob, lineno)


# -- sampling -----------------------------------------------------------------

def _rng(seed):
    return np.random.default_rng(seed)


_SAMPLE_BLOCK = 1 << 16


def sample_rules(g: Grammar, seed: int, max_tokens: int, n_sentences: int | None = None,
                 backend=None):
    """Sample a stream, returning ``(tokens, rule indices used, truncated)``.

    For a PFSG every emitted symbol consumes one uniform draw; for a PCFG
    every expansion does.
    """
    if max_tokens < 0:
        raise ValueError("max_tokens must be >= 0")
    rng = _rng(seed)
    if g.formalism == PFSG:
        row_ptr, t_sym, t_dst, _, t_cum = g._csr
        state = g._state_index[g.start]
        pieces, n_sent, left = [], 0, max_tokens
        while left > 0 and (n_sentences is None or n_sent < n_sentences):
            # uniforms are drawn in blocks; the stream is the same as one big draw
            uniforms = rng.random(min(left, _SAMPLE_BLOCK))
            limit = -1 if n_sentences is None else n_sentences - n_sent
            trans, got = kernels.pfsg_sample((row_ptr, t_sym, t_dst, t_cum), state, uniforms,
                                             limit, len(g.alphabet), backend=backend)
            pieces.append(trans)
            n_sent += got
            left -= len(trans)
            if len(trans) < len(uniforms):
                break
            state = int(t_dst[trans[-1]])
        trans = np.concatenate(pieces) if pieces else np.zeros(0, dtype=np.int32)
        order = _pfsg_rule_order(g)
        tokens = tuple(g.symbols[int(t_sym[t])] for t in trans)
        used = [order[int(t)] for t in trans]
        return tokens, used, _truncated(tokens, n_sent, n_sentences)
    return _sample_pcfg(g, rng, max_tokens, n_sentences)


def _pfsg_rule_order(g):
    # CSR transition index -> rule index (CSR groups rules by source, stable)
    si = g._state_index
    order = sorted(range(len(g.rules)), key=lambda i: si[g.rules[i].source])
    return order


def _sample_pcfg(g, rng, max_tokens, n_sentences):
    by_src = defaultdict(list)
    for i, r in enumerate(g.rules):
        by_src[r.source].append(i)
    cum = {s: np.cumsum([g.rules[i].prob for i in idx]) for s, idx in by_src.items()}
    tokens, used = [], []
    buf = rng.random(4096)
    pos = 0
    done = 0
    target = math.inf if n_sentences is None else n_sentences
    while done < target and len(tokens) < max_tokens:
        stack = [g.start]
        while stack and len(tokens) < max_tokens:
            sym = stack.pop()
            if sym not in by_src:
                tokens.append(sym)
                continue
            if pos == len(buf):
                buf, pos = rng.random(4096), 0
            u = buf[pos]
            pos += 1
            c = cum[sym]
            j = min(int(np.searchsorted(c, u, side="right")), len(c) - 1)
            ri = by_src[sym][j]
            used.append(ri)
            stack.extend(reversed(g.rules[ri].emission))
        if stack:
            break
        if len(tokens) >= max_tokens:
            break
        tokens.append(END)
        done += 1
    return tuple(tokens), used, _truncated(tokens, done, n_sentences)


def _truncated(tokens, done, n_sentences):
    if n_sentences is not None:
        return done < n_sentences
    return not tokens or tokens[-1] != END


def generate(g: Grammar, seed: int, max_tokens: int, n_sentences: int | None = None,
             backend=None) -> TokenSequence:
    """Sample a sentence stream; deterministic given ``seed``.

    Stops after ``n_sentences`` complete sentences or ``max_tokens``
    tokens (``$end`` included), whichever comes first.
    """
    tokens, _, truncated = sample_rules(g, seed, max_tokens, n_sentences, backend=backend)
    return TokenSequence(tokens, truncated=truncated)


# -- scoring ------------------------------------------------------------------

def _sentence_words(s) -> tuple[str, ...]:
    if isinstance(s, TokenSequence):
        s = s.tokens
    s = tuple(s)
    if s and s[-1] == END:
        s = s[:-1]
    if END in s:
        raise ValueError("expected a single sentence")
    return s


def sentence_probability(g: Grammar, sentence) -> float:
    words = _sentence_words(sentence)
    if g.formalism == PFSG:
        bits = stream_log_loss(g, [words])[0]
        return 0.0 if math.isinf(bits) else 2.0 ** -bits
    chart = g.inside_chart(words)
    if not words:
        return 0.0
    return float(chart[0, len(words), g._inside_tables[4]])


def sentence_log_loss(g: Grammar, sentence) -> float:
    """``-log2 P(sentence)`` in bits; ``inf`` when the sentence is impossible."""
    words = _sentence_words(sentence)
    if g.formalism == PFSG:
        return float(stream_log_loss(g, [words])[0])
    p = sentence_probability(g, words)
    return math.inf if p <= 0.0 else -math.log2(p)


def stream_log_loss(g: Grammar, sentences, backend=None) -> np.ndarray:
    """Per-sentence code lengths for a sequence of sentences.

    PFSG sentences are scored conditionally on the preceding ones (state
    carried through ``$end``); PCFG sentences independently.
    """
    if isinstance(sentences, TokenSequence):
        sentences = sentences.sentences()
    if g.formalism == PFSG:
        toks = []
        for s in sentences:
            toks.extend(_sentence_words(s))
            toks.append(END)
        ids = g.encode_tokens(toks)
        return kernels.pfsg_stream_logloss(ids, g._csr[:4], g._state_index[g.start],
                                           len(g.nonterminals), len(g.alphabet),
                                           backend=backend)
    out = np.empty(len(sentences))
    for i, s in enumerate(sentences):
        out[i] = sentence_log_loss(g, s)
    return out


def forward(g: Grammar, prefix: Sequence[str]) -> tuple[np.ndarray, float]:
    """Normalized PFSG state distribution after ``prefix`` and ``log2 P(prefix)``."""
    g._require(PFSG)
    T = g.transitions
    alpha = g.start_vector()
    logp = 0.0
    for k in g.encode_tokens(list(prefix)):
        alpha = alpha @ T[k]
        c = alpha.sum()
        if c <= 0.0:
            return alpha, -math.inf
        logp += math.log2(c)
        alpha = alpha / c
    return alpha, logp


def _pcfg_left_corner(g: Grammar):
    lex, (lhs, left, right, prob), closure, has_unary, start = g._inside_tables
    S = closure.shape[0]
    PL = np.zeros((S, S))
    np.add.at(PL, (lhs, left), prob)
    if has_unary:
        PL += np.eye(S) - np.linalg.inv(closure)
    return np.linalg.inv(np.eye(S) - PL)


def prefix_probability(g: Grammar, prefix: Sequence[str]) -> float:
    """Probability that a sentence starts with ``prefix`` (words only)."""
    words = list(prefix)
    if g.formalism == PFSG:
        _, lp = forward(g, words)
        return 0.0 if lp == -math.inf else 2.0 ** lp
    n = len(words)
    if n == 0:
        return 1.0
    lex, (lhs, left, right, prob), _, _, start = g._inside_tables
    R = _pcfg_left_corner(g)
    chart = g.inside_chart(words)
    tok = g.encode_tokens(words)
    # pp[i][A]: A derives a string that begins with words[i:n]
    pp = [None] * n
    for i in range(n - 1, -1, -1):
        acc = lex[tok[i]].copy() if i == n - 1 else np.zeros(R.shape[0])
        for k in range(i + 1, n):
            np.add.at(acc, lhs, prob * chart[i, k, left] * pp[k][right])
        pp[i] = R @ acc
    return float(pp[0][start])


def next_symbol_dist(g: Grammar, prefix: Sequence[str] = ()) -> dict[str, float]:
    """Exact conditional distribution of the next symbol (``$end`` included).

    For a PCFG the prefix is sentence-internal (no ``$end``) and the
    conditional comes from prefix probabilities via the left-corner
    closure of the binarized grammar.
    """
    if isinstance(prefix, TokenSequence):
        prefix = prefix.tokens
    if g.formalism == PCFG:
        words = list(prefix)
        if END in words:
            raise ConditioningError("PCFG contexts are sentence prefixes without $end")
        base = prefix_probability(g, words)
        if base <= 0.0:
            raise ConditioningError("prefix has probability zero under the grammar")
        probs = [prefix_probability(g, words + [a]) for a in g.alphabet]
        probs.append(sentence_probability(g, words) if words else 0.0)
        probs = np.asarray(probs) / base
        return dict(zip(g.symbols, (probs / probs.sum()).tolist()))
    alpha, logp = forward(g, prefix)
    if logp == -math.inf:
        raise ConditioningError("prefix has probability zero under the grammar")
    probs = np.einsum("s,kst->k", alpha, g.transitions)
    probs = probs / probs.sum()
    return dict(zip(g.symbols, probs.tolist()))


def is_grammatical(g: Grammar, sentence) -> bool:
    words = _sentence_words(sentence)
    try:
        return sentence_log_loss(g, words) < math.inf
    except OutOfVocabularyError as exc:
        log.info("out-of-vocabulary token %r; treating sentence as ungrammatical", exc.token)
        return False
