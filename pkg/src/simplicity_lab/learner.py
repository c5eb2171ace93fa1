"""Finite Bayesian mixtures as stand-ins for the universal predictor.

A hypothesis class is a finite set of sources, each weighted by
``2 ** -L(h)`` (normalized), where ``L`` is the grammar code length.
Because every weight is at least ``2 ** -L(h)`` after normalization, the
classical loss bounds stated in terms of program length keep holding
with ``L`` in place of program length.

Every source here is a finite-state machine over a shared symbol list:
an initial state vector plus one transition matrix per symbol.  A
mixture of such sources is again one (block diagonal), which is what the
convergence profiles exploit.
"""

from __future__ import annotations

import math
import shlex
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .coding import DEFAULT_PARAM_BITS, grammar_code_length
from .errors import (
    BudgetExceededError,
    ClassExhaustedError,
    ConditioningError,
    ManifestError,
    ParameterError,
)
from .grammar import END, PFSG, Grammar, TokenSequence, load_grammar

LN2 = math.log(2.0)
DEFAULT_BUDGET = 2 ** 22
_KEY_DECIMALS = 12
_CHUNK_FLOATS = 4_000_000


class FiniteSource:
    """A stochastic finite-state source over ``symbols``.

    ``trans[k, s, t]`` is the probability of emitting symbol ``k`` and
    moving from state ``s`` to ``t``; rows of ``sum_k trans[k]`` sum to 1.
    """

    def __init__(self, initial, trans, symbols: Sequence[str]):
        self.initial = np.asarray(initial, dtype=float)
        self.trans = np.asarray(trans, dtype=float)
        self.symbols = tuple(symbols)
        self.index = {s: i for i, s in enumerate(self.symbols)}

    @classmethod
    def from_grammar(cls, g: Grammar, symbols: Sequence[str] | None = None) -> "FiniteSource":
        if g.formalism != PFSG:
            raise ParameterError("mixture hypotheses must be PFSGs")
        symbols = tuple(symbols) if symbols is not None else g.symbols
        T = np.zeros((len(symbols),) + g.transitions.shape[1:])
        pos = {s: i for i, s in enumerate(symbols)}
        for k, sym in enumerate(g.symbols):
            if sym not in pos:
                raise ParameterError(f"symbol {sym!r} missing from the shared alphabet")
            T[pos[sym]] = g.transitions[k]
        return cls(g.start_vector(), T, symbols)

    @classmethod
    def iid(cls, probs, symbols) -> "FiniteSource":
        p = np.asarray(probs, dtype=float)
        return cls(np.ones(1), p.reshape(-1, 1, 1), symbols)

    @property
    def n_states(self) -> int:
        return len(self.initial)

    def encode(self, tokens) -> list[int]:
        try:
            return [self.index[t] for t in tokens]
        except KeyError as exc:
            raise ParameterError(f"symbol {exc.args[0]!r} is not in the alphabet") from None

    def log2_prob(self, tokens, state=None):
        """``(log2 P(tokens | state), normalized state after)``."""
        alpha = self.initial if state is None else state
        lp = 0.0
        for k in self.encode(tokens):
            alpha = alpha @ self.trans[k]
            c = alpha.sum()
            if c <= 0.0:
                return -math.inf, alpha
            lp += math.log2(c)
            alpha = alpha / c
        return lp, alpha

    def next_probs(self, state) -> np.ndarray:
        p = np.einsum("s,kst->k", state, self.trans)
        return p / p.sum()


@dataclass(frozen=True)
class Hypothesis:
    name: str
    source: FiniteSource
    description_bits: float
    prior_weight: float
    grammar: Grammar | None = None


# -- the mixture ----------------------------------------------------------------


class MixturePredictor:
    """Posterior-weighted mixture over a finite hypothesis class.

    Instances are immutable: :meth:`update` returns a new predictor.
    Hypotheses whose evidence drops to zero keep a ``-inf`` log evidence
    and are never removed.
    """

    def __init__(self, hypotheses: Sequence[Hypothesis], states=None, log_evidence=None,
                 observed: tuple = ()):
        self.hypotheses = tuple(hypotheses)
        self.symbols = self.hypotheses[0].source.symbols
        self.states = tuple(states) if states is not None else tuple(
            h.source.initial for h in self.hypotheses)
        self.log_evidence = (np.zeros(len(self.hypotheses)) if log_evidence is None
                             else np.asarray(log_evidence, dtype=float))
        self.observed = tuple(observed)
        self._log_prior = np.log2([h.prior_weight for h in self.hypotheses])

    @property
    def priors(self) -> np.ndarray:
        return np.array([h.prior_weight for h in self.hypotheses])

    def _joint_log(self):
        return self._log_prior + self.log_evidence

    def log2_marginal(self) -> float:
        """``log2`` of the mixture probability of everything observed."""
        j = self._joint_log()
        top = j.max()
        if top == -math.inf:
            return -math.inf
        return float(top + np.log2(np.exp2(j - top).sum()))

    def posterior(self) -> np.ndarray:
        j = self._joint_log()
        top = j.max()
        if top == -math.inf:
            raise ClassExhaustedError("no hypothesis accounts for the observed sequence")
        w = np.exp2(j - top)
        return w / w.sum()

    def predict_array(self) -> np.ndarray:
        post = self.posterior()
        out = np.zeros(len(self.symbols))
        for w, h, st in zip(post, self.hypotheses, self.states):
            if w > 0.0:
                out += w * h.source.next_probs(st)
        return out / out.sum()

    def predict(self) -> dict[str, float]:
        return dict(zip(self.symbols, self.predict_array().tolist()))

    def update(self, tok: str) -> "MixturePredictor":
        if tok not in self.hypotheses[0].source.index:
            raise ParameterError(f"symbol {tok!r} is not in the alphabet")
        k = self.hypotheses[0].source.index[tok]
        states, ev = [], self.log_evidence.copy()
        for i, (h, st) in enumerate(zip(self.hypotheses, self.states)):
            if ev[i] == -math.inf:
                states.append(st)
                continue
            nxt = st @ h.source.trans[k]
            c = nxt.sum()
            if c <= 0.0:
                ev[i] = -math.inf
                states.append(st)
            else:
                ev[i] += math.log2(c)
                states.append(nxt / c)
        return MixturePredictor(self.hypotheses, states, ev, self.observed + (tok,))

    def update_many(self, tokens) -> "MixturePredictor":
        m = self
        for t in tokens:
            m = m.update(t)
        return m

    def hypothesis_index(self, name_or_grammar) -> int | None:
        for i, h in enumerate(self.hypotheses):
            if isinstance(name_or_grammar, str):
                if h.name == name_or_grammar:
                    return i
            elif h.grammar is not None and isinstance(name_or_grammar, Grammar):
                if h.grammar.signature() == name_or_grammar.signature():
                    return i
        return None

    def __repr__(self):
        names = ", ".join(h.name for h in self.hypotheses)
        return f"<MixturePredictor [{names}] observed={len(self.observed)}>"


def update(m: MixturePredictor, tok: str) -> MixturePredictor:
    return m.update(tok)


def predict(m: MixturePredictor) -> dict[str, float]:
    return m.predict()


def mixture_from_sources(names, sources, bits, priors=None) -> MixturePredictor:
    """Weights are ``2 ** -bits`` normalized, unless ``priors`` are given."""
    if not sources:
        raise ManifestError("hypothesis class is empty")
    if priors is None:
        bits = np.asarray(bits, dtype=float)
        kraft = float(np.exp2(-bits).sum())
        if kraft > 1.0 + 1e-12:
            raise ManifestError(
                f"code lengths violate the Kraft inequality (sum 2^-L = {kraft:.9g}); give explicit priors")
        raw = np.exp2(-(bits - bits.min()))
        priors = raw / raw.sum()
    else:
        priors = np.asarray(priors, dtype=float)
        if (priors <= 0).any() or abs(priors.sum() - 1.0) > 1e-9:
            raise ManifestError("explicit priors must be positive and sum to 1")
    hyps = [Hypothesis(n, s, float(b), float(w)) for n, s, b, w in zip(names, sources, bits, priors)]
    return MixturePredictor(hyps)


def build_class(grammars: Sequence[Grammar], priors=None,
                param_bits: float = DEFAULT_PARAM_BITS) -> MixturePredictor:
    """Mixture over PFSG hypotheses sharing one alphabet."""
    if not grammars:
        raise ManifestError("hypothesis class is empty")
    alpha = set(grammars[0].alphabet)
    seen = {}
    for g in grammars:
        if g.formalism != PFSG:
            raise ManifestError(f"hypothesis {g.name or '?'} is not a PFSG")
        if set(g.alphabet) != alpha:
            raise ManifestError(f"alphabet mismatch in hypothesis {g.name or '?'}")
        sig = g.signature()
        if sig in seen:
            raise ManifestError(f"duplicate grammar: {g.name or '?'} repeats {seen[sig] or '?'}")
        seen[sig] = g.name
    symbols = grammars[0].symbols
    sources = [FiniteSource.from_grammar(g, symbols) for g in grammars]
    bits = [grammar_code_length(g, param_bits) for g in grammars]
    names = [g.name or f"h{i}" for i, g in enumerate(grammars)]
    m = mixture_from_sources(names, sources, bits, priors)
    hyps = [Hypothesis(h.name, h.source, h.description_bits, h.prior_weight, g)
            for h, g in zip(m.hypotheses, grammars)]
    return MixturePredictor(hyps)


def parse_manifest(text: str, base_dir=".") -> list[tuple[Path, float | None]]:
    """Lines ``hypothesis: <path> [prior=<decimal>]``; all or no priors."""
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, colon, rest = line.partition(":")
        if key.strip() != "hypothesis" or not colon:
            raise ManifestError(f"manifest line {lineno}: expected 'hypothesis: <path>'")
        parts = shlex.split(rest)
        if not parts or len(parts) > 2:
            raise ManifestError(f"manifest line {lineno}: expected a path and optional prior")
        prior = None
        if len(parts) == 2:
            if not parts[1].startswith("prior="):
                raise ManifestError(f"manifest line {lineno}: unknown field {parts[1]!r}")
            try:
                prior = float(parts[1][len("prior="):])
            except ValueError:
                raise ManifestError(f"manifest line {lineno}: bad prior") from None
        entries.append((Path(base_dir) / parts[0], prior))
    if not entries:
        raise ManifestError("hypothesis class is empty")
    given = [p is not None for _, p in entries]
    if any(given) and not all(given):
        raise ManifestError("either every hypothesis has a prior or none does")
    if all(given) and abs(sum(p for _, p in entries) - 1.0) > 1e-9:
        raise ManifestError("manifest priors must sum to 1")
    return entries


def load_class(manifest_path, param_bits: float = DEFAULT_PARAM_BITS) -> MixturePredictor:
    path = Path(manifest_path)
    entries = parse_manifest(path.read_text(encoding="utf-8"), path.parent)
    grammars = [load_grammar(p) for p, _ in entries]
    priors = [p for _, p in entries] if entries[0][1] is not None else None
    return build_class(grammars, priors, param_bits)


# -- pointwise quantities ----------------------------------------------------------


def _truth_source(truth, symbols) -> FiniteSource:
    if isinstance(truth, FiniteSource):
        if truth.symbols != tuple(symbols):
            raise ParameterError("truth source uses a different symbol list")
        return truth
    if set(truth.symbols) != set(symbols):
        raise ParameterError("truth grammar and hypothesis class use different alphabets")
    return FiniteSource.from_grammar(truth, symbols)


def _ref_index(symbols, ref):
    if ref is None:
        return 0
    if ref not in symbols:
        raise ParameterError(f"reference symbol {ref!r} is not in the alphabet")
    return symbols.index(ref)


def instantaneous_error(m: MixturePredictor, truth, prefix=(), ref: str | None = None,
                        variant: str = "symbol") -> float:
    """Squared gap between mixture and truth next-symbol predictions.

    ``variant="symbol"`` compares one reference symbol (the first
    alphabet symbol by default); ``"total"`` uses the squared total
    variation distance; ``"sumsq"`` sums squared gaps over the alphabet.
    """
    src = _truth_source(truth, m.symbols)
    lp, state = src.log2_prob(m.observed + tuple(prefix))
    if lp == -math.inf:
        raise ConditioningError("prefix has probability zero under the truth")
    mu = src.next_probs(state)
    lam = m.update_many(prefix).predict_array()
    if variant == "symbol":
        i = _ref_index(m.symbols, ref)
        return float((lam[i] - mu[i]) ** 2)
    if variant == "total":
        return float((0.5 * np.abs(lam - mu).sum()) ** 2)
    if variant == "sumsq":
        return float(((lam - mu) ** 2).sum())
    raise ParameterError(f"unknown error variant {variant!r}")


def production_ratio(m: MixturePredictor, truth, x=(), y=()) -> float:
    """``lambda(y | x) / mu(y | x)`` with both sides multiplied along ``y``."""
    src = _truth_source(truth, m.symbols)
    hist = m.observed + tuple(x)
    lmu_x, st = src.log2_prob(hist)
    if lmu_x == -math.inf:
        raise ConditioningError("context x has probability zero under the truth")
    lmu_y, _ = src.log2_prob(tuple(y), st)
    if lmu_y == -math.inf:
        raise ConditioningError("ratio undefined: mu(y | x) = 0")
    mx = m.update_many(x)
    lx = mx.log2_marginal()
    if lx == -math.inf:
        raise ClassExhaustedError("no hypothesis accounts for x")
    llam_y = mx.update_many(y).log2_marginal() - lx
    return float(2.0 ** (llam_y - lmu_y))


def sample_continuation(m: MixturePredictor, budget: int, seed: int) -> TokenSequence:
    """Autoregressive sampling from the mixture's predictions."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(budget):
        p = m.predict_array()
        cum = np.cumsum(p)
        k = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        k = min(k, len(p) - 1)
        while p[k] == 0.0:
            k -= 1
        tok = m.symbols[k]
        out.append(tok)
        m = m.update(tok)
    truncated = not out or out[-1] != END
    return TokenSequence(tuple(out), truncated=truncated)


# -- convergence profiles ----------------------------------------------------------


@dataclass
class ConvergenceProfile:
    """Per-position expected losses with their cumulative sums and bounds.

    Index ``i`` of each series is position ``n = i + 1`` (prefixes of
    length ``i``).  ``lam`` maps each underestimation factor to its
    series; ``ci`` holds 95% half-widths in Monte-Carlo mode.
    """

    mode: str
    horizon: int
    truth_bits: float
    ref_symbol: str
    s: np.ndarray
    delta: np.ndarray
    lam: dict
    tv2: np.ndarray
    bound_pred: float
    bound_over: float
    bound_under: dict
    truth_posterior: np.ndarray | None = None
    trials: int | None = None
    seed: int | None = None
    ci: dict = field(default_factory=dict)
    nodes: list = field(default_factory=list)

    @property
    def n(self):
        return np.arange(1, self.horizon + 1)

    @property
    def cum_s(self):
        return np.cumsum(self.s)

    @property
    def cum_delta(self):
        return np.cumsum(self.delta)

    def cum_lam(self, f):
        return np.cumsum(self.lam[f])

    @property
    def primary_f(self):
        return next(iter(self.lam)) if self.lam else None

    def rows(self):
        """Rows for the CSV export schema."""
        f = self.primary_f
        cs, cd = self.cum_s, self.cum_delta
        lam = self.lam[f] if f is not None else np.full(self.horizon, np.nan)
        cl = np.cumsum(lam)
        bu = self.bound_under.get(f, math.nan)
        for i in range(self.horizon):
            yield {
                "n": i + 1, "s_n": self.s[i], "cum_s": cs[i],
                "delta_n": self.delta[i], "cum_delta": cd[i],
                "lambda_n": lam[i], "cum_lambda": cl[i],
                "bound_pred": self.bound_pred, "bound_over": self.bound_over,
                "bound_under": bu,
            }


def _check_f(fs):
    fs = tuple(float(f) for f in fs)
    for f in fs:
        if not f > math.e:
            raise ParameterError(
                f"f = {f:g} rejected: the undergeneralization bound requires f > e")
    return fs


class _Block:
    """Mixture flattened into one block-diagonal source with prior weights."""

    def __init__(self, m: MixturePredictor):
        sizes = [h.source.n_states for h in m.hypotheses]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)])
        S = int(self.offsets[-1])
        K = len(m.symbols)
        self.trans = np.zeros((K, S, S))
        init = np.zeros(S)
        post = m.posterior()
        for i, (h, st) in enumerate(zip(m.hypotheses, m.states)):
            a, b = self.offsets[i], self.offsets[i + 1]
            self.trans[:, a:b, a:b] = h.source.trans
            init[a:b] = post[i] * st
        self.initial = init / init.sum()

    def block_sum(self, V, i):
        return V[:, self.offsets[i]:self.offsets[i + 1]].sum(axis=1)


def convergence_profile(m: MixturePredictor, truth, horizon: int, mode: str = "exact",
                        fs=(8.0,), ref: str | None = None, trials: int = 10_000,
                        seed: int = 0, budget: int = DEFAULT_BUDGET,
                        truth_bits: float | None = None,
                        param_bits: float = DEFAULT_PARAM_BITS) -> ConvergenceProfile:
    """Expected prediction, overgeneralization and undergeneralization losses.

    Exact mode enumerates every positive-probability prefix under the
    truth, merging prefixes that leave both the truth and the mixture in
    the same normalized state (they have identical futures).  The budget
    caps the number of distinct prefix states kept at any length.
    Monte-Carlo mode samples prefixes from the truth, one seeded
    substream per trial, and reports normal-approximation 95% intervals.
    """
    if horizon < 1:
        raise ParameterError("horizon must be >= 1")
    fs = _check_f(fs)
    src = _truth_source(truth, m.symbols)
    if truth_bits is None:
        if isinstance(truth, Grammar):
            truth_bits = grammar_code_length(truth, param_bits)
        else:
            raise ParameterError("truth_bits is required when the truth is not a grammar")
    ref_i = _ref_index(m.symbols, ref)
    tidx = m.hypothesis_index(truth) if isinstance(truth, Grammar) else None
    block = _Block(m)
    if src.initial.sum() <= 0:
        raise ConditioningError("truth has no start state")
    u0 = src.initial
    if m.observed:
        lp, u0 = src.log2_prob(m.observed)
        if lp == -math.inf:
            raise ConditioningError("observed prefix has probability zero under the truth")
    if mode == "exact":
        res = _exact(block, src, u0, horizon, ref_i, fs, budget, tidx)
    elif mode in ("monte-carlo", "mc"):
        mode = "monte-carlo"
        res = _monte_carlo(block, src, u0, horizon, ref_i, fs, trials, seed, tidx)
    else:
        raise ParameterError(f"unknown mode {mode!r}")
    prof = ConvergenceProfile(
        mode=mode, horizon=horizon, truth_bits=float(truth_bits), ref_symbol=m.symbols[ref_i],
        s=res["s"], delta=res["delta"], lam={f: res["lam"][j] for j, f in enumerate(fs)},
        tv2=res["tv2"], bound_pred=LN2 / 2 * truth_bits, bound_over=truth_bits / LN2,
        bound_under={f: truth_bits / math.log2(f / math.e) for f in fs},
        truth_posterior=res.get("post"), nodes=res.get("nodes", []),
    )
    if mode == "monte-carlo":
        prof.trials, prof.seed, prof.ci = trials, seed, res["ci"]
    return prof


def expected_error_profile(m, truth, horizon, mode="exact", **kw) -> ConvergenceProfile:
    return convergence_profile(m, truth, horizon, mode, **kw)


def overgen_profile(m, truth, horizon, mode="exact", **kw) -> ConvergenceProfile:
    return convergence_profile(m, truth, horizon, mode, **kw)


def undergen_profile(m, truth, f, horizon, mode="exact", **kw) -> ConvergenceProfile:
    return convergence_profile(m, truth, horizon, mode, fs=(f,), **kw)


def _step_metrics(pmu, plam, ref_i, fs):
    """Per-prefix losses from next-symbol distributions (rows = prefixes)."""
    err = (plam[:, ref_i] - pmu[:, ref_i]) ** 2
    tv2 = (0.5 * np.abs(plam - pmu).sum(axis=1)) ** 2
    forbidden = pmu <= 0.0
    delta = np.where(forbidden, plam, 0.0).sum(axis=1)
    lam = [np.where(~forbidden & (f * plam <= pmu), pmu, 0.0).sum(axis=1) for f in fs]
    return err, tv2, delta, lam


def _expand(U, V, src, block):
    """Next-symbol products for a batch; returns raw (unnormalized) tensors."""
    Uk = np.einsum("bs,kst->kbt", U, src.trans)
    Vk = np.einsum("bs,kst->kbt", V, block.trans)
    return Uk, Vk


def _chunks(B, width, K):
    step = max(1, _CHUNK_FLOATS // max(1, width * K))
    for a in range(0, B, step):
        yield a, min(B, a + step)


def _exact(block, src, u0, horizon, ref_i, fs, budget, tidx):
    K = src.trans.shape[0]
    U = u0[None, :] / u0.sum()
    V = block.initial[None, :]
    mass = np.ones(1)
    out = {k: np.zeros(horizon) for k in ("s", "tv2", "delta")}
    out["lam"] = [np.zeros(horizon) for _ in fs]
    out["post"] = np.zeros(horizon) if tidx is not None else None
    out["nodes"] = []
    width = U.shape[1] + V.shape[1]
    for n in range(horizon):
        out["nodes"].append(len(mass))
        if tidx is not None:
            out["post"][n] = float(mass @ block.block_sum(V, tidx))
        kids_U, kids_V, kids_m = [], [], []
        for a, b in _chunks(len(mass), width, K):
            Uk, Vk = _expand(U[a:b], V[a:b], src, block)
            rmu = Uk.sum(axis=2).T
            rlam = Vk.sum(axis=2).T
            pmu = rmu / rmu.sum(axis=1, keepdims=True)
            plam = rlam / rlam.sum(axis=1, keepdims=True)
            err, tv2, delta, lam = _step_metrics(pmu, plam, ref_i, fs)
            w = mass[a:b]
            out["s"][n] += w @ err
            out["tv2"][n] += w @ tv2
            out["delta"][n] += w @ delta
            for j, l in enumerate(lam):
                out["lam"][j][n] += w @ l
            if n == horizon - 1:
                continue
            bi, ki = np.nonzero(pmu > 0.0)
            if (rlam[bi, ki] <= 0.0).any():
                raise ClassExhaustedError(
                    "the truth emits a symbol that every hypothesis forbids; the class is exhausted")
            kids_U.append(Uk[ki, bi] / rmu[bi, ki][:, None])
            kids_V.append(Vk[ki, bi] / rlam[bi, ki][:, None])
            kids_m.append(w[bi] * pmu[bi, ki])
        if n == horizon - 1:
            break
        nU = np.concatenate(kids_U)
        nV = np.concatenate(kids_V)
        nm = np.concatenate(kids_m)
        keys = np.round(np.hstack([nU, nV]), _KEY_DECIMALS) + 0.0
        _, first, inv = np.unique(keys, axis=0, return_index=True, return_inverse=True)
        inv = inv.reshape(-1)
        if len(first) > budget:
            raise BudgetExceededError(
                f"exact mode needs {len(first)} prefix states at length {n + 1}, over the budget "
                f"of {budget}; use monte-carlo mode")
        U, V = nU[first], nV[first]
        mass = np.bincount(inv, weights=nm, minlength=len(first))
    return out


def trial_uniforms(seed: int, trials: int, length: int) -> np.ndarray:
    """One independent substream per trial, derived from the master seed."""
    children = np.random.SeedSequence(seed).spawn(trials)
    return np.stack([np.random.default_rng(c).random(length) for c in children]) if trials else \
        np.zeros((0, length))


def _monte_carlo(block, src, u0, horizon, ref_i, fs, trials, seed, tidx):
    if trials < 2:
        raise ParameterError("monte-carlo mode needs at least 2 trials")
    K = src.trans.shape[0]
    unif = trial_uniforms(seed, trials, horizon)
    per = {k: np.zeros((trials, horizon)) for k in ("s", "tv2", "delta", "post")}
    per_lam = [np.zeros((trials, horizon)) for _ in fs]
    width = src.n_states + block.initial.size
    for a, b in _chunks(trials, width, K):
        U = np.tile(u0 / u0.sum(), (b - a, 1))
        V = np.tile(block.initial, (b - a, 1))
        rows = np.arange(b - a)
        for n in range(horizon):
            if tidx is not None:
                per["post"][a:b, n] = block.block_sum(V, tidx)
            Uk, Vk = _expand(U, V, src, block)
            rmu = Uk.sum(axis=2).T
            rlam = Vk.sum(axis=2).T
            pmu = rmu / rmu.sum(axis=1, keepdims=True)
            plam = rlam / rlam.sum(axis=1, keepdims=True)
            err, tv2, delta, lam = _step_metrics(pmu, plam, ref_i, fs)
            per["s"][a:b, n] = err
            per["tv2"][a:b, n] = tv2
            per["delta"][a:b, n] = delta
            for j, l in enumerate(lam):
                per_lam[j][a:b, n] = l
            cum = np.cumsum(pmu, axis=1)
            k = (unif[a:b, n][:, None] >= cum).sum(axis=1)
            k = np.minimum(k, K - 1)
            # guard against landing on a zero-probability symbol through rounding
            bad = pmu[rows, k] <= 0.0
            if bad.any():
                k[bad] = K - 1 - np.argmax((pmu[bad] > 0)[:, ::-1], axis=1)
            if (rlam[rows, k] <= 0.0).any():
                raise ClassExhaustedError(
                    "the truth emitted a symbol that every hypothesis forbids; the class is exhausted")
            U = Uk[k, rows] / rmu[rows, k][:, None]
            V = Vk[k, rows] / rlam[rows, k][:, None]
    z = 1.96 / math.sqrt(trials)
    res = {key: per[key].mean(axis=0) for key in ("s", "tv2", "delta")}
    res["lam"] = [x.mean(axis=0) for x in per_lam]
    res["post"] = per["post"].mean(axis=0) if tidx is not None else None
    res["ci"] = {key: z * per[key].std(axis=0, ddof=1) for key in ("s", "tv2", "delta")}
    for f, x in zip(fs, per_lam):
        res["ci"][f"lambda_{f:g}"] = z * x.std(axis=0, ddof=1)
    return res


# -- production experiment ------------------------------------------------------------


def production_convergence(m: MixturePredictor, truth: Grammar, y: Sequence[str],
                           lengths: Sequence[int], runs: int, seed: int):
    """Median production ratio over seeded runs, at sentence-aligned contexts.

    For each run a stream of whole sentences is drawn from the truth; the
    context for length ``n`` is the shortest whole-sentence prefix with at
    least ``n`` tokens, so that the one-sentence continuation ``y`` is
    well defined.  Returns ``(medians, ratios)`` with ``ratios`` of shape
    ``(runs, len(lengths))``.
    """
    from .grammar import generate

    src = _truth_source(truth, m.symbols)
    y = tuple(y)
    if y and y[-1] != END:
        y = y + (END,)
    lengths = sorted(lengths)
    seeds = np.random.SeedSequence(seed).generate_state(runs)
    ratios = np.empty((runs, len(lengths)))
    for r in range(runs):
        stream = generate(truth, int(seeds[r]), max_tokens=10 * lengths[-1] + 100,
                          n_sentences=None)
        toks = stream.tokens
        mm, st = m, src.initial
        lmu_hist = 0.0
        pos = 0
        li = 0
        while li < len(lengths):
            # advance to the next sentence boundary at or beyond lengths[li]
            while pos < lengths[li] or (pos > 0 and toks[pos - 1] != END):
                mm = mm.update(toks[pos])
                pos += 1
            lx = mm.log2_marginal()
            _, st = src.log2_prob(toks[:pos])
            lmu_y, _ = src.log2_prob(y, st)
            if lmu_y == -math.inf:
                raise ConditioningError("ratio undefined: mu(y | x) = 0")
            llam_y = mm.update_many(y).log2_marginal() - lx
            ratio = 2.0 ** (llam_y - lmu_y)
            while li < len(lengths) and lengths[li] <= pos:
                ratios[r, li] = ratio
                li += 1
    return np.median(ratios, axis=0), ratios
