import math
import random
import warnings

import pytest
from hypothesis import assume, given, settings, strategies as st

from simplicity_lab.coding import crossover_point, grammar_code_length
from simplicity_lab.corpus import count_in_sentence, ingest
from simplicity_lab.errors import ParameterError, StructuralError
from simplicity_lab.grammar import TokenSequence, generate, load_corpus, load_grammar, parse_grammar
from simplicity_lab.learnability import (
    CLOSED_FORM,
    EMPIRICAL,
    LearnabilityWarning,
    disallowed_mass,
    learnability_report,
    occurrences_needed,
    parse_context,
    rule_complexity_delta,
    savings_per_occurrence,
    years_needed,
)

from fixtures import DATA, copula
from oracles import pcfg_sentence_oracle, pfsg_next_oracle, pfsg_path_prob

KEYS = ["delta_bits", "q", "savings_bits", "occurrences_needed", "rate_per_million",
        "words_per_year", "years_needed", "method"]


def contraction(fmt="pfsg"):
    return (load_grammar(DATA / f"contraction_over.{fmt}"),
            load_grammar(DATA / f"contraction_restricted.{fmt}"))


def mini():
    return load_corpus(DATA / "contraction_mini.txt")


STATE_OVER = """\
format: pfsg
start: q0
alphabet: a b
q0 : a -> q0 : 0.3
q0 : b -> q0 : 0.3
q0 : $end : 0.4
"""

STATE_RESTRICTED = """\
format: pfsg
start: q0
alphabet: a b
q0 : a -> q0 : 0.4285714285714286
q0 : $end : 0.5714285714285714
"""


# -- arithmetic ----------------------------------------------------------------


def test_occurrences_examples():
    assert occurrences_needed(16, 0.5) == 16
    assert occurrences_needed(10, 0.9) == 4  # 10 / log2(10) = 3.01
    assert occurrences_needed(1, 0.75) == 1
    assert occurrences_needed(3, 0.75) == 2


def test_occurrences_edge_cases():
    assert occurrences_needed(5, 0.0) == math.inf
    assert occurrences_needed(0, 0.5) == 0
    with pytest.raises(ParameterError):
        occurrences_needed(5, 1.0)
    with pytest.raises(ParameterError):
        savings_per_occurrence(-0.1)


def test_integer_ratio_not_rounded_up():
    # 3 * log2(1/(1-q)) with q = 0.875 is exactly 9 bits; float noise must not push to 4
    assert occurrences_needed(9, 0.875) == 3
    assert occurrences_needed(9 * (1 + 1e-13), 0.875) == 3


def test_years_examples():
    assert years_needed(16, 1.0, 10_000_000) == pytest.approx(1.6)
    assert years_needed(16, 100.0) == pytest.approx(0.016)
    assert years_needed(math.inf, 5.0) == math.inf
    assert years_needed(16, 0.0) == math.inf
    assert years_needed(0, 0.0) == 0.0
    with pytest.raises(ParameterError):
        years_needed(16, 1.0, 0)


def test_plausible_rates_span_months_to_lifetime():
    n = occurrences_needed(16, 0.5)
    fast = years_needed(n, 500.0)
    slow = years_needed(n, 0.02)
    assert fast < 1 / 12 * 12 and fast * 12 < 1  # under a month
    assert slow > 70


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 1e4), st.floats(0.01, 1e4), st.floats(1e-6, 0.999))
def test_occurrences_monotone_in_delta(d1, d2, q):
    lo, hi = sorted((d1, d2))
    assert occurrences_needed(lo, q) <= occurrences_needed(hi, q)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 1e4), st.floats(1e-6, 0.999), st.floats(1e-6, 0.999))
def test_occurrences_antitone_in_q(d, q1, q2):
    lo, hi = sorted((q1, q2))
    assert occurrences_needed(d, hi) <= occurrences_needed(d, lo)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 10**6), st.floats(1e-3, 1e4), st.floats(1.01, 1e3))
def test_years_inverse_in_rate(n, rate, k):
    assert years_needed(n, rate * k) == pytest.approx(years_needed(n, rate) / k, rel=1e-9)
    assert years_needed(n, rate, 1e7 * k) == pytest.approx(years_needed(n, rate, 1e7) / k, rel=1e-9)


# -- complexity difference ---------------------------------------------------------


def test_delta_contraction():
    g0, g1 = contraction()
    assert rule_complexity_delta(g0, g1) == 16


def test_delta_antisymmetric_and_warns():
    g0, g1 = contraction()
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        d = rule_complexity_delta(g0, g1)
    with pytest.warns(LearnabilityWarning):
        assert rule_complexity_delta(g1, g0) == -d


def test_nonpositive_delta_needs_no_occurrences():
    g0, g1 = contraction()
    # unreachable padding makes the overgeneral grammar the costlier one
    padded = parse_grammar(g0.to_text() + "".join(f"zz{i} : $end : 1.0\n" for i in range(6)))
    with pytest.warns(LearnabilityWarning):
        est = learnability_report(padded, g1, "prefix:* 's", rate_per_million=10.0)
    assert est.delta_bits <= 0
    assert est.occurrences_needed == 0 and est.years_needed == 0


# -- disallowed mass -----------------------------------------------------------------


def _oracle_q(g0, g1, prefixes):
    num = den = 0.0
    for x in prefixes:
        w = pfsg_path_prob(g0, x)
        if w <= 0:
            continue
        d0, d1 = pfsg_next_oracle(g0, x), pfsg_next_oracle(g1, x)
        num += w * sum(p for k, p in d0.items() if d1[k] == 0)
        den += w
    return num / den


def test_q_contraction_matches_enumeration():
    g0, g1 = contraction()
    q = disallowed_mass(g0, g1, "prefix:* 's")
    want = _oracle_q(g0, g1, [(a, "'s") for a in g0.alphabet])
    assert q == pytest.approx(want, abs=1e-12)
    assert q == pytest.approx(0.5, abs=1e-12)


def test_q_copula_matches_enumeration():
    g0, g1 = copula()
    assert disallowed_mass(g0, g1, "prefix:'s") == pytest.approx(_oracle_q(g0, g1, [("'s",)]))
    assert disallowed_mass(g0, g1, "prefix:'s") == pytest.approx(0.9)


def test_q_averages_over_contexts():
    g0, g1 = contraction()
    # "he is" contributes weight .25 with q = 0, "he 's" weight .25 with q = .5
    q = disallowed_mass(g0, g1, ["prefix:he is", "prefix:he 's"])
    assert q == pytest.approx(0.25)


def test_state_context():
    g0 = parse_grammar(STATE_OVER, "over")
    g1 = parse_grammar(STATE_RESTRICTED, "restricted")
    assert disallowed_mass(g0, g1, "state:q0") == pytest.approx(0.3)
    corpus = [["a"] * k for k in range(5)]
    with pytest.warns(LearnabilityWarning):  # dropping a rule makes g1 the cheaper one
        est = learnability_report(g0, g1, "state:q0", rate_per_million=1.0, corpus=corpus)
    assert est.method == CLOSED_FORM


def test_swapped_pair_is_structural_error():
    g0, g1 = contraction()
    with pytest.raises(StructuralError):
        disallowed_mass(g1, g0, "prefix:* 's")


def test_context_forbidden_by_restricted_grammar():
    g0, g1 = contraction()
    no_she = parse_grammar(g1.to_text().replace("s0 : he -> s1 : 0.5", "s0 : he -> s1 : 1.0")
                           .replace("s0 : she -> s1 : 0.5\n", ""))
    assert disallowed_mass(g0, no_she, "prefix:he 's") == pytest.approx(0.5)
    with pytest.raises(StructuralError, match="forbids the context"):
        disallowed_mass(g0, no_she, "prefix:she 's")


def test_context_syntax():
    assert parse_context("prefix:a b").value == ("a", "b")
    assert parse_context(["a"]).kind == "prefix"
    for bad in ("nope", "state:a b", "prefix:a $end", "other:x"):
        with pytest.raises(ParameterError):
            parse_context(bad)


# -- composed report ------------------------------------------------------------------


def test_report_recomputed_by_hand():
    g0, g1 = contraction()
    corpus = mini()
    stats = ingest(DATA / "contraction_mini.txt", ["'s"])
    est = learnability_report(g0, g1, "prefix:* 's", corpus_stats=stats, pattern="'s", corpus=corpus)
    sents = corpus.sentences()
    words = sum(len(s) for s in sents)
    hits = sum(count_in_sentence(s, ("'s",)) for s in sents)
    rate = hits * 1e6 / words
    assert est.delta_bits == grammar_code_length(g1) - grammar_code_length(g0) == 16
    assert est.q == pytest.approx(0.5)
    assert est.savings_bits == pytest.approx(1.0)
    assert est.occurrences_needed == 16
    assert est.rate_per_million == pytest.approx(rate)
    assert est.years_needed == pytest.approx(16 / (rate * 10))
    assert est.method == CLOSED_FORM
    assert list(est.as_dict()) == KEYS


def test_report_shuffle_invariant():
    g0, g1 = contraction()
    sents = list(mini().sentences())
    a = learnability_report(g0, g1, "prefix:* 's", rate_per_million=3.0, corpus=sents)
    random.Random(5).shuffle(sents)
    b = learnability_report(g0, g1, "prefix:* 's", rate_per_million=3.0, corpus=sents)
    assert a == b


def test_pcfg_pair_uses_measured_savings():
    g0, g1 = contraction("pcfg")
    sents = mini().sentences()
    est = learnability_report(g0, g1, "prefix:* 's", rate_per_million=3.0, corpus=sents)
    assert est.method == EMPIRICAL
    saved = sum(math.log2(pcfg_sentence_oracle(g1, s) / pcfg_sentence_oracle(g0, s)) for s in sents)
    occ = sum(1 for s in sents if len(s) > 1 and s[1] == "'s")
    assert est.savings_bits == pytest.approx(saved / occ, abs=1e-9)
    assert est.occurrences_needed == math.ceil(est.delta_bits / est.savings_bits)
    with pytest.raises(ParameterError):
        learnability_report(g0, g1, "prefix:* 's", rate_per_million=3.0)


def test_forced_closed_form_on_pcfg():
    g0, g1 = contraction("pcfg")
    est = learnability_report(g0, g1, "prefix:* 's", rate_per_million=3.0,
                              corpus=mini().sentences(), method=CLOSED_FORM)
    assert est.savings_bits == pytest.approx(savings_per_occurrence(est.q))


def _occurrences_through(corpus, index, ctx_hits):
    return sum(ctx_hits(s) for s in corpus.sentences()[:index + 1])


@pytest.mark.parametrize("name", ["contraction", "copula"])
def test_estimate_agrees_with_crossover(name):
    if name == "contraction":
        g0, g1 = contraction()
        ctx = "prefix:* 's"
        corpus = mini()
        hits = lambda s: int(len(s) > 1 and s[1] == "'s")  # noqa: E731
    else:
        g0, g1 = copula()
        ctx = "prefix:'s"
        corpus = generate(g1, 11, 10**6, n_sentences=300)
        hits = lambda s: int(s[0] == "'s")  # noqa: E731
    est = learnability_report(g0, g1, ctx, rate_per_million=1.0, corpus=corpus)
    assert est.method == CLOSED_FORM
    idx = crossover_point(g0, g1, corpus)
    assert idx is not None
    assert abs(_occurrences_through(corpus, idx, hits) - est.occurrences_needed) <= 1


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_crossover_agreement_on_random_samples(seed):
    g0, g1 = contraction()
    corpus = generate(g1, seed, 10**6, n_sentences=200)
    est = learnability_report(g0, g1, "prefix:* 's", rate_per_million=1.0)
    idx = crossover_point(g0, g1, corpus)
    hits = lambda s: int(len(s) > 1 and s[1] == "'s")  # noqa: E731
    total = sum(hits(s) for s in corpus.sentences())
    assume(total > est.occurrences_needed + 1)
    assert abs(_occurrences_through(corpus, idx, hits) - est.occurrences_needed) <= 1


def test_corpus_must_fit_overgeneral_grammar():
    g0, g1 = contraction()
    with pytest.raises(StructuralError):
        learnability_report(g0, g1, "prefix:* 's", rate_per_million=1.0,
                            corpus=TokenSequence(["tall", "$end"]))
