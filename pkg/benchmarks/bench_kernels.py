"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel runs on the same inputs under both backends; the outputs are
checked for equality before the timings are reported.
"""

import argparse
import sys
import timeit

import numpy as np

from simplicity_lab import kernels
from simplicity_lab.grammar import generate, parse_grammar, sample_rules, stream_log_loss

PFSG = """\
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

PCFG = """\
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


def cases():
    g = parse_grammar(PFSG, "bench_pfsg")
    sents = generate(g, 1, 200_000).sentences()
    pcfg = parse_grammar(PCFG, "bench_pcfg")
    words = ["n"] + ["+", "(", "n", ")"] * 6
    return {
        "pfsg sample (50k tokens)": lambda b: sample_rules(g, 3, 50_000, backend=b)[0],
        "pfsg stream log-loss (200k tokens)": lambda b: stream_log_loss(g, sents, backend=b),
        f"pcfg inside chart ({len(words)} words)": lambda b: pcfg.inside_chart(words, backend=b),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if kernels.BACKEND != "cython":
        print("compiled kernels not built; nothing to compare", file=sys.stderr)
        return 1
    print(f"{'kernel':40s} {'cython s':>10s} {'python s':>10s} {'speedup':>8s}")
    for name, fn in cases().items():
        a, b = fn("cython"), fn("python")
        if isinstance(a, np.ndarray):
            assert np.allclose(a, b, rtol=0, atol=1e-12), name
        else:
            assert a == b, name
        tc = min(timeit.repeat(lambda: fn("cython"), number=1, repeat=args.repeat))
        tp = min(timeit.repeat(lambda: fn("python"), number=1, repeat=args.repeat))
        print(f"{name:40s} {tc:10.4f} {tp:10.4f} {tp / tc:7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
