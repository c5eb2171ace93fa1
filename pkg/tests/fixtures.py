"""Small grammars shared by the test modules."""

from pathlib import Path

import simplicity_lab
from simplicity_lab.grammar import load_grammar, parse_grammar

DATA = Path(simplicity_lab.__file__).parent / "data"


def data(name):
    return DATA / name


def hibye():
    return load_grammar(DATA / "hibye_iid.pfsg"), load_grammar(DATA / "hibye_alt.pfsg")


COPULA_OVER = """\
format: pfsg
start: s1
alphabet: is 's tall
s1 : is -> s2 : 0.2
s1 : 's -> s2 : 0.8
s2 : tall -> s3 : 0.1
s2 : $end : 0.9
s3 : $end : 1.0
"""

COPULA_RESTRICTED = """\
format: pfsg
start: s1
alphabet: is 's tall
s1 : is -> s2 : 0.2
s1 : 's -> s4 : 0.8
s2 : tall -> s3 : 0.1
s2 : $end : 0.9
s4 : tall -> s3 : 1.0
s3 : $end : 1.0
"""


def copula():
    """Overgeneral and restricted pair where the restriction is well attested."""
    return (parse_grammar(COPULA_OVER, "copula_over"),
            parse_grammar(COPULA_RESTRICTED, "copula_restricted"))


NO_AA = """\
format: pfsg
start: q0
alphabet: a b
q0 : a -> qa : 0.3
q0 : b -> q0 : 0.5
q0 : $end : 0.2
qa : b -> q0 : 0.7
qa : $end : 0.3
"""

NO_A_END = """\
format: pfsg
start: q0
alphabet: a b
q0 : a -> qa : 0.3
q0 : b -> q0 : 0.5
q0 : $end : 0.2
qa : a -> qa : 0.3
qa : b -> q0 : 0.7
"""

AB_IID = """\
format: pfsg
start: q0
alphabet: a b
q0 : a -> q0 : 0.3
q0 : b -> q0 : 0.5
q0 : $end : 0.2
"""


def no_aa():
    """Truth forbids "a a"; the competitor, equally long to encode, forbids
    "a $end" instead, so each overgenerates where the other does not."""
    return parse_grammar(NO_A_END, "no_a_end"), parse_grammar(NO_AA, "no_aa")


def ab_iid():
    return parse_grammar(AB_IID, "ab_iid")


COIN_PROBS = (0.1, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8, 0.9)


def coin(p):
    return parse_grammar(f"""\
format: pfsg
start: c0
alphabet: H T
c0 : H -> c1 : {p}
c0 : T -> c1 : {1 - p:.10g}
c1 : $end : 1.0
""", f"coin_{p}")


def coins():
    return [coin(p) for p in COIN_PROBS]


def fixed_sentence(words, alphabet=("a", "b", "c")):
    states = [f"w{i}" for i in range(len(words) + 1)]
    lines = ["format: pfsg", "start: w0", "alphabet: " + " ".join(alphabet)]
    for i, w in enumerate(words):
        lines.append(f"{states[i]} : {w} -> {states[i + 1]} : 1.0")
    lines.append(f"{states[-1]} : $end : 1.0")
    return parse_grammar("\n".join(lines) + "\n", "fixed_" + "_".join(words))


def sentence_family():
    """Every one-sentence grammar of length 2 or 3 over {a, b, c} plus a unigram model."""
    import itertools

    out = [fixed_sentence(w) for n in (2, 3) for w in itertools.product("abc", repeat=n)]
    out.append(parse_grammar("""\
format: pfsg
start: u
alphabet: a b c
u : a -> u : 0.25
u : b -> u : 0.25
u : c -> u : 0.25
u : $end : 0.25
""", "unigram"))
    return out


FOUR_STATE = """\
# Nondeterministic: 'x' from p can lead to q or r.
format: pfsg
start: p
alphabet: x y z
p : x -> q : 0.3
p : x -> r : 0.2
p : y -> s : 0.4
p : $end : 0.1
q : y -> p : 0.5
q : z -> r : 0.25
q : $end : 0.25
r : x -> r : 0.3
r : z -> s : 0.3
r : $end -> q : 0.4
s : y -> q : 0.6
s : $end : 0.4
"""


def four_state():
    return parse_grammar(FOUR_STATE, "four_state")


GEOMETRIC = """\
format: pcfg
start: S
S -> a S : 0.5
S -> a : 0.5
"""

ARITH = """\
# Unary chains, a ternary rule and a left-recursive rule.
format: pcfg
start: E
alphabet: n + ( )
E -> E + T : 0.3
E -> T : 0.7
T -> F : 0.8
T -> ( E ) : 0.2
F -> n : 0.9
F -> P : 0.1
P -> ( n ) : 1.0
"""

AMBIG = """\
format: pcfg
start: S
S -> S S : 0.3
S -> a : 0.5
S -> A : 0.2
A -> a : 0.6
A -> b : 0.4
"""


def pcfgs():
    return [parse_grammar(t, n) for t, n in ((GEOMETRIC, "geometric"), (ARITH, "arith"),
                                             (AMBIG, "ambig"))]
