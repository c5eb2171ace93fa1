"""Command-line entry point.

Exit status: 0 on success, 1 when the input is rejected (bad grammar,
impossible data, violated preconditions), 2 on usage errors.

Output formats: ``report`` (default) wraps the result with the run
configuration, input digests and tool version; ``json`` prints the bare
result object; ``csv`` and ``text`` where they make sense.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import __version__
from . import coding, corpus, formmeaning, learnability, learner, report
from .errors import SimplicityError
from .grammar import PFSG, generate, load_corpus, load_grammar

SEED_ENV = "SIMPLICITY_LAB_SEED"


class UsageError(Exception):
    pass


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _emit(args, text: str) -> None:
    if args.out:
        try:
            Path(args.out).write_text(text, encoding="utf-8", newline="\n")
        except OSError as exc:
            raise report.ReportError(f"cannot write {args.out}: {exc.strerror or exc}") from None
    else:
        sys.stdout.write(text)


def _json_out(args, config, result) -> str:
    if args.format == "json":
        return report.dumps(result)
    return report.dumps(report.envelope(config, result))


# -- subcommands ----------------------------------------------------------------


def cmd_grammar_check(args):
    g = load_grammar(args.grammar)
    result = {
        "formalism": g.formalism,
        "start": g.start,
        "alphabet": list(g.alphabet),
        "nonterminals": list(g.nonterminals),
        "rules": len(g.rules),
        "code_length_bits": coding.grammar_code_length(g, args.param_bits),
        "free_parameters": coding.free_parameters(g),
    }
    if g.formalism == PFSG:
        result["deterministic"] = g.is_deterministic
    else:
        result["spectral_radius"] = g.spectral_radius
    config = report.RunConfig("grammar check", [args.grammar], param_bits=args.param_bits,
                              output_format=args.format)
    if args.format == "text":
        return "".join(f"{k}: {v if not isinstance(v, list) else ' '.join(v)}\n"
                       for k, v in report.clean(result).items())
    return _json_out(args, config, result)


def cmd_generate(args):
    g = load_grammar(args.grammar)
    seed = _seed(args)
    seq = generate(g, seed, args.max_tokens, args.sentences)
    config = report.RunConfig("generate", [args.grammar], seed=seed, output_format=args.format,
                              extra={"max_tokens": args.max_tokens, "sentences": args.sentences})
    sents = seq.sentences()
    if args.format == "text":
        return "".join(" ".join(s) + "\n" for s in sents)
    result = {"sentences": [" ".join(s) for s in sents], "truncated": seq.truncated,
              "tokens": len(seq.tokens)}
    return _json_out(args, config, result)


def cmd_encode(args):
    g = load_grammar(args.grammar)
    c = load_corpus(args.corpus)
    rep = coding.two_part_length(g, c, args.param_bits)
    config = report.RunConfig("encode", [args.grammar, args.corpus], param_bits=args.param_bits,
                              output_format=args.format)
    if args.format == "csv":
        rows = [{"sentence": i, "bits": b} for i, b in enumerate(rep.per_sentence_bits)]
        return report.to_csv(("sentence", "bits"), rows)
    return _json_out(args, config, rep.as_dict())


def cmd_compare(args):
    g0, g1 = load_grammar(args.g0), load_grammar(args.g1)
    c = load_corpus(args.corpus)
    t0 = coding.cumulative_totals(g0, c, args.param_bits)
    t1 = coding.cumulative_totals(g1, c, args.param_bits)
    idx = coding.crossover_point(g0, g1, c, args.param_bits)
    config = report.RunConfig("compare", [args.g0, args.g1, args.corpus],
                              param_bits=args.param_bits, output_format=args.format)
    rows = []
    for n, (a, b) in enumerate(zip(t0, t1)):
        rows.append({"sentences": n, "total_g0": a, "total_g1": b,
                     "preferred": "g1" if b < a else ("g0" if a < b else "tie")})
    if args.format == "csv":
        return report.to_csv(("sentences", "total_g0", "total_g1", "preferred"), rows)
    result = {
        "g0": {"grammar_bits": t0[0], "total_bits": t0[-1]},
        "g1": {"grammar_bits": t1[0], "total_bits": t1[-1]},
        "sentences": len(t0) - 1,
        "crossover_sentence_index": idx,
        "cumulative": rows,
    }
    return _json_out(args, config, result)


def cmd_simulate(args):
    seed = _seed(args)
    truth = load_grammar(args.truth)
    m = learner.load_class(args.class_manifest, args.param_bits)
    fs = args.f or [8.0]
    prof = learner.convergence_profile(
        m, truth, args.horizon, args.mode, fs=fs, ref=args.ref, trials=args.trials, seed=seed,
        budget=args.budget, param_bits=args.param_bits)
    manifest_inputs = [p for p, _ in learner.parse_manifest(
        Path(args.class_manifest).read_text(encoding="utf-8"), Path(args.class_manifest).parent)]
    config = report.RunConfig(
        "simulate", [args.truth, args.class_manifest] + manifest_inputs, seed=seed, mode=args.mode,
        trials=args.trials if args.mode == "monte-carlo" else None, horizon=args.horizon, f=fs,
        param_bits=args.param_bits, output_format=args.format,
        extra={"ref": prof.ref_symbol, "budget": args.budget})
    if args.plot:
        report.emit_profile_plot(prof, args.plot)
    if args.format == "csv":
        return report.profile_csv(prof)
    result = report.profile_dict(prof)
    result["priors"] = {h.name: h.prior_weight for h in m.hypotheses}
    return _json_out(args, config, result)


def cmd_formmeaning(args):
    seed = _seed(args)
    inv = formmeaning.parse_inventory(Path(args.inventory).read_text(encoding="utf-8"))
    tables = [formmeaning.load_table(p, inv) for p in args.table]
    cls = formmeaning.JointClass(tables, param_bits=args.param_bits)
    truth = formmeaning.load_table(args.truth, inv) if args.truth else None
    inputs = [args.inventory] + list(args.table) + ([args.truth] if args.truth else [])
    if args.pairs:
        pairs = formmeaning.parse_pairs(Path(args.pairs).read_text(encoding="utf-8"), inv)
        inputs.append(args.pairs)
    elif args.sample is not None:
        if truth is None:
            raise UsageError("--sample needs --truth")
        pairs = truth.sample(args.sample, seed)
    else:
        pairs = []
    post = formmeaning.learn_joint(cls, pairs)
    result = {
        "pairs": len(pairs),
        "description_bits": {t.name: b for t, b in zip(tables, cls.bits)},
        "prior": dict(zip((t.name for t in tables), cls.priors)),
        "posterior": dict(zip((t.name for t in tables), post.posterior)),
        "given_sentence": {}, "given_interpretation": {},
    }
    for s in cls.sentences:
        try:
            result["given_sentence"][" ".join(s)] = formmeaning.conditional(post, sentence=s)
        except SimplicityError:
            result["given_sentence"][" ".join(s)] = None
    for c in cls.labels:
        try:
            result["given_interpretation"][c] = formmeaning.conditional(post, interpretation=c)
        except SimplicityError:
            result["given_interpretation"][c] = None
    prof = None
    if truth is not None:
        tpost = formmeaning.learn_joint(formmeaning.JointClass([truth]), [])
        tv = []
        for s in cls.sentences:
            a = result["given_sentence"][" ".join(s)]
            try:
                b = formmeaning.conditional(tpost, sentence=s)
            except SimplicityError:
                continue
            tv.append(formmeaning.total_variation(a or {}, b))
        result["max_tv_given_sentence"] = max(tv) if tv else 0.0
        if args.horizon:
            prof = formmeaning.joint_error_profile(
                cls, truth, args.horizon, args.mode, param_bits=args.param_bits,
                fs=args.f or [8.0], trials=args.trials, seed=seed, budget=args.budget)
            result["profile"] = report.profile_dict(prof)
    config = report.RunConfig(
        "formmeaning", inputs, seed=seed, mode=args.mode if prof else None,
        trials=args.trials if prof and args.mode == "monte-carlo" else None,
        horizon=args.horizon if prof else None, f=args.f, param_bits=args.param_bits,
        output_format=args.format, extra={"sample": args.sample})
    if args.plot:
        if prof is None:
            raise UsageError("--plot needs --truth and --horizon")
        report.emit_profile_plot(prof, args.plot)
    if args.format == "csv":
        if prof is None:
            raise UsageError("--format csv needs --truth and --horizon")
        return report.profile_csv(prof)
    return _json_out(args, config, result)


def cmd_learnability(args):
    g0, g1 = load_grammar(args.g0), load_grammar(args.g1)
    inputs = [args.g0, args.g1]
    stats = sentences = None
    if args.corpus:
        inputs.append(args.corpus)
        if args.pattern:
            stats = corpus.ingest(args.corpus, [args.pattern])
        if args.method != "closed_form":
            try:
                sentences = load_corpus(args.corpus)
                for s in sentences.sentences():
                    g0.encode_tokens(s)
            except SimplicityError:
                sentences = None  # corpus outside the grammars' vocabulary
    if args.rate is None and stats is None:
        raise UsageError("give --rate or --corpus with --pattern")
    est = learnability.learnability_report(
        g0, g1, args.context, corpus_stats=stats, pattern=args.pattern,
        rate_per_million=args.rate, corpus=sentences, words_per_year=args.words_per_year,
        param_bits=args.param_bits, method=args.method)
    config = report.RunConfig(
        "learnability", inputs, param_bits=args.param_bits, words_per_year=args.words_per_year,
        output_format=args.format,
        extra={"contexts": list(args.context), "pattern": args.pattern, "rate": args.rate,
               "method": args.method,
               "rate_source": "given" if args.rate is not None else
               "corpus pattern matches per million words (operational definition of an occurrence)"})
    return _json_out(args, config, est.as_dict())


def cmd_corpus_stats(args):
    stats = None
    for p in args.corpus:
        s = corpus.ingest(p, args.pattern)
        stats = s if stats is None else corpus.merge(stats, s)
    config = report.RunConfig("corpus stats", list(args.corpus), output_format=args.format,
                              extra={"patterns": list(args.pattern)})
    if args.format == "csv":
        rows = stats.as_dict()["patterns"]
        return report.to_csv(("pattern", "count", "per_million"), rows)
    return _json_out(args, config, stats.as_dict())


# -- parser ------------------------------------------------------------------------


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simplicity-lab",
                                description="Simplicity-based language learning experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, formats=("report", "json")):
        sp.add_argument("--format", choices=formats, default=formats[0])
        sp.add_argument("--out", help="write output here instead of stdout")
        sp.add_argument("--param-bits", type=float, default=coding.DEFAULT_PARAM_BITS)

    g = sub.add_parser("grammar", help="grammar utilities")
    gsub = g.add_subparsers(dest="grammar_command", required=True)
    gc = gsub.add_parser("check", help="validate a grammar file")
    gc.add_argument("grammar")
    common(gc, ("text", "report", "json"))
    gc.set_defaults(func=cmd_grammar_check)

    gen = sub.add_parser("generate", help="sample sentences from a grammar")
    gen.add_argument("--grammar", required=True)
    gen.add_argument("--seed", type=int)
    gen.add_argument("--max-tokens", type=_nonneg_int, default=10_000)
    gen.add_argument("--sentences", type=_nonneg_int)
    common(gen, ("text", "report", "json"))
    gen.set_defaults(func=cmd_generate)

    enc = sub.add_parser("encode", help="two-part code length of a corpus")
    enc.add_argument("--grammar", required=True)
    enc.add_argument("--corpus", required=True)
    common(enc, ("report", "json", "csv"))
    enc.set_defaults(func=cmd_encode)

    cmp_ = sub.add_parser("compare", help="cumulative code lengths and crossover")
    cmp_.add_argument("--g0", required=True, help="simpler grammar")
    cmp_.add_argument("--g1", required=True, help="alternative grammar")
    cmp_.add_argument("--corpus", required=True)
    common(cmp_, ("report", "json", "csv"))
    cmp_.set_defaults(func=cmd_compare)

    def learner_opts(sp):
        sp.add_argument("--mode", choices=("exact", "monte-carlo"), default="exact")
        sp.add_argument("--trials", type=_positive_int, default=10_000)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--f", type=float, action="append",
                        help="underestimation factor (> e); repeatable, first is tabulated")
        sp.add_argument("--budget", type=_positive_int, default=learner.DEFAULT_BUDGET)
        sp.add_argument("--plot", help="also write an SVG plot of the profile")

    sim = sub.add_parser("simulate", help="convergence profile of a finite mixture")
    sim.add_argument("--truth", required=True)
    sim.add_argument("--class", dest="class_manifest", required=True)
    sim.add_argument("--horizon", type=_positive_int, default=30)
    sim.add_argument("--ref", help="reference symbol for the squared error")
    learner_opts(sim)
    common(sim, ("csv", "report", "json"))
    sim.set_defaults(func=cmd_simulate)

    fm = sub.add_parser("formmeaning", help="learn a sentence-interpretation joint")
    fm.add_argument("--inventory", required=True)
    fm.add_argument("--table", action="append", required=True, help="hypothesis table; repeatable")
    fm.add_argument("--truth")
    src = fm.add_mutually_exclusive_group()
    src.add_argument("--pairs")
    src.add_argument("--sample", type=_nonneg_int, help="draw this many pairs from --truth")
    fm.add_argument("--horizon", type=_nonneg_int, default=0)
    learner_opts(fm)
    common(fm, ("report", "json", "csv"))
    fm.set_defaults(func=cmd_formmeaning)

    ln = sub.add_parser("learnability", help="occurrences and years before a restriction pays off")
    ln.add_argument("--g0", required=True, help="overgeneral grammar")
    ln.add_argument("--g1", required=True, help="restricted grammar")
    ln.add_argument("--context", action="append", required=True,
                    help="'prefix:<tokens>' (* = any token) or 'state:<name>'; repeatable")
    ln.add_argument("--corpus")
    ln.add_argument("--pattern", help="corpus pattern whose rate measures the context")
    ln.add_argument("--rate", type=float, help="context occurrences per million words")
    ln.add_argument("--words-per-year", type=float, default=learnability.DEFAULT_WORDS_PER_YEAR)
    ln.add_argument("--method", choices=("auto", "closed_form", "empirical"), default="auto")
    common(ln)
    ln.set_defaults(func=cmd_learnability)

    cs = sub.add_parser("corpus", help="corpus utilities")
    csub = cs.add_subparsers(dest="corpus_command", required=True)
    st = csub.add_parser("stats", help="word, sentence and pattern counts")
    st.add_argument("corpus", nargs="+")
    st.add_argument("--pattern", action="append", default=[], help="repeatable; * = any token")
    common(st, ("report", "json", "csv"))
    st.set_defaults(func=cmd_corpus_stats)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        text = args.func(args)
        _emit(args, text)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"simplicity-lab: error: {exc}", file=sys.stderr)
        return 2
    except SimplicityError as exc:
        print(f"simplicity-lab: {' '.join(str(exc).split())}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"simplicity-lab: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
