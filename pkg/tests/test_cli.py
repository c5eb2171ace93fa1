import csv
import io
import json
import math
import re
import subprocess
import sys

import numpy as np
import pytest

from simplicity_lab.cli import main
from simplicity_lab.errors import ParameterError
from simplicity_lab.learner import ConvergenceProfile
from simplicity_lab.report import csv_cell, dumps, emit_profile_plot, num, profile_svg

from fixtures import DATA


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def d(name):
    return DATA / name


# -- number formatting ---------------------------------------------------------


def test_num_formatting():
    assert num(1.0) == 1 and isinstance(num(1.0), int)
    assert num(1 / 3) == 0.333333333
    assert num(math.inf) == "inf" and num(-math.inf) == "-inf"
    assert num(np.float64(2.5)) == 2.5
    assert dumps({"a": np.array([1.0, 0.5])}) == '{\n  "a": [\n    1,\n    0.5\n  ]\n}\n'
    assert csv_cell(None) == "" and csv_cell(0.1 + 0.2) == "0.3"


# -- subcommands ------------------------------------------------------------------


def test_grammar_check(capsys):
    code, out, _ = run(capsys, "grammar", "check", d("hibye_alt.pfsg"), "--format", "json")
    assert code == 0
    res = json.loads(out)
    assert res["code_length_bits"] == 48 and res["deterministic"] is True


def test_grammar_check_pcfg_text(capsys):
    code, out, _ = run(capsys, "grammar", "check", d("contraction_over.pcfg"))
    assert code == 0 and "spectral_radius:" in out and "formalism: pcfg" in out


def test_invalid_grammar_exits_1(capsys, tmp_path):
    bad = tmp_path / "bad.pfsg"
    bad.write_text("format: pfsg\nstart: q\nq : a -> q : 0.7\n")
    code, _, err = run(capsys, "grammar", "check", bad)
    assert code == 1 and err.startswith("simplicity-lab:")


def test_missing_file_exits_1(capsys, tmp_path):
    code, _, err = run(capsys, "grammar", "check", tmp_path / "nope.pfsg")
    assert code == 1 and "nope.pfsg" in err


def test_unknown_flag_exits_2(capsys):
    code, _, err = run(capsys, "compare", "--bogus")
    assert code == 2 and "usage" in err


def test_missing_subcommand_exits_2(capsys):
    assert run(capsys)[0] == 2


def test_compare_crossover(capsys):
    code, out, _ = run(capsys, "compare", "--g0", d("hibye_iid.pfsg"), "--g1", d("hibye_alt.pfsg"),
                       "--corpus", d("hibye.txt"))
    assert code == 0
    rep = json.loads(out)
    assert rep["tool"] == "simplicity-lab" and rep["config"]["subcommand"] == "compare"
    assert all(len(i["sha256"]) == 64 for i in rep["inputs"])
    assert rep["result"]["crossover_sentence_index"] == 7
    assert rep["result"]["g0"]["grammar_bits"] == 41


def test_compare_csv(capsys):
    code, out, _ = run(capsys, "compare", "--g0", d("hibye_iid.pfsg"), "--g1", d("hibye_alt.pfsg"),
                       "--corpus", d("hibye.txt"), "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 41
    assert rows[7]["preferred"] == "tie" and rows[8]["preferred"] == "g1"


def test_encode_impossible_corpus_inf(capsys):
    code, out, _ = run(capsys, "encode", "--grammar", d("hibye_pair.pfsg"), "--corpus",
                       d("hibye.txt"), "--format", "json")
    assert code == 0
    assert json.loads(out)["total_bits"] == "inf"


def test_encode_oov_exits_1(capsys):
    code, _, err = run(capsys, "encode", "--grammar", d("hibye_iid.pfsg"), "--corpus",
                       d("contraction_mini.txt"))
    assert code == 1 and "line 2" in err


def test_generate_seed_env(capsys, monkeypatch):
    args = ("generate", "--grammar", d("contraction_over.pfsg"), "--sentences", 20)
    monkeypatch.setenv("SIMPLICITY_LAB_SEED", "17")
    _, a, _ = run(capsys, *args)
    _, b, _ = run(capsys, *args, "--seed", 17)
    _, c, _ = run(capsys, *args, "--seed", 18)
    assert a == b != c
    monkeypatch.setenv("SIMPLICITY_LAB_SEED", "x")
    assert run(capsys, *args)[0] == 2


def test_simulate_csv_within_bound(capsys):
    code, out, _ = run(capsys, "simulate", "--truth", d("hibye_alt.pfsg"),
                       "--class", d("hibye.manifest"), "--horizon", 20)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [int(r["n"]) for r in rows] == list(range(1, 21))
    for r in rows:
        assert float(r["cum_s"]) <= float(r["bound_pred"])
        assert float(r["cum_delta"]) <= float(r["bound_over"])


def test_simulate_rejects_small_f(capsys):
    code, _, err = run(capsys, "simulate", "--truth", d("hibye_alt.pfsg"),
                       "--class", d("hibye.manifest"), "--f", 2)
    assert code == 1 and "f" in err


def test_simulate_truth_outside_class_alphabet(capsys):
    code, _, _ = run(capsys, "simulate", "--truth", d("contraction_over.pfsg"),
                     "--class", d("hibye.manifest"))
    assert code == 1


def test_simulate_plot(capsys, tmp_path):
    svg = tmp_path / "p.svg"
    code, out, _ = run(capsys, "simulate", "--truth", d("hibye_alt.pfsg"),
                       "--class", d("hibye.manifest"), "--horizon", 10, "--plot", svg,
                       "--format", "json")
    assert code == 0
    res = json.loads(out)
    text = svg.read_text()
    vals = {m.group(1): float(m.group(2))
            for m in re.finditer(r'class="bound" data-series="(\w+)" data-value="([^"]+)"', text)}
    assert vals["s"] == pytest.approx(res["bounds"]["prediction"], rel=1e-8)
    assert vals["delta"] == pytest.approx(res["bounds"]["overgeneralization"], rel=1e-8)


def test_simulate_monte_carlo(capsys):
    code, out, _ = run(capsys, "simulate", "--truth", d("hibye_alt.pfsg"), "--class",
                       d("hibye.manifest"), "--mode", "monte-carlo", "--trials", 200,
                       "--seed", 3, "--format", "report")
    rep = json.loads(out)
    assert code == 0 and rep["config"]["trials"] == 200 and rep["config"]["seed"] == 3
    assert "ci95" in rep["result"]


def test_formmeaning(capsys):
    tables = [a for n in ("fm_truth.tsv", "fm_spread.tsv", "fm_flat.tsv") for a in ("--table", d(n))]
    code, out, _ = run(capsys, "formmeaning", "--inventory", d("fm_inventory.txt"), *tables,
                       "--truth", d("fm_truth.tsv"), "--sample", 2000, "--seed", 1,
                       "--format", "json")
    assert code == 0
    res = json.loads(out)
    assert res["pairs"] == 2000 and res["max_tv_given_sentence"] <= 0.05
    assert res["given_sentence"]["visit the bank"]["M1"] == pytest.approx(0.75, abs=0.05)


def test_formmeaning_pairs_file(capsys):
    code, out, _ = run(capsys, "formmeaning", "--inventory", d("fm_inventory.txt"),
                       "--table", d("fm_truth.tsv"), "--table", d("fm_flat.tsv"),
                       "--pairs", d("fm_pairs.tsv"), "--format", "json")
    assert code == 0 and json.loads(out)["pairs"] == 5


def test_formmeaning_sample_needs_truth(capsys):
    code, _, _ = run(capsys, "formmeaning", "--inventory", d("fm_inventory.txt"),
                     "--table", d("fm_truth.tsv"), "--sample", 5)
    assert code == 2


def test_learnability_exact_keys(capsys):
    code, out, _ = run(capsys, "learnability", "--g0", d("contraction_over.pfsg"),
                       "--g1", d("contraction_restricted.pfsg"), "--context", "prefix:* 's",
                       "--corpus", d("contraction_mini.txt"), "--pattern", "'s", "--format", "json")
    assert code == 0
    res = json.loads(out)
    assert list(res) == ["delta_bits", "q", "savings_bits", "occurrences_needed",
                         "rate_per_million", "words_per_year", "years_needed", "method"]
    assert res["occurrences_needed"] == 16 and res["method"] == "closed_form"


def test_learnability_needs_rate(capsys):
    code, _, _ = run(capsys, "learnability", "--g0", d("contraction_over.pfsg"),
                     "--g1", d("contraction_restricted.pfsg"), "--context", "prefix:* 's")
    assert code == 2


@pytest.mark.filterwarnings("ignore::simplicity_lab.learnability.LearnabilityWarning")
def test_learnability_swapped_pair_exits_1(capsys):
    code, _, _ = run(capsys, "learnability", "--g1", d("contraction_over.pfsg"),
                     "--g0", d("contraction_restricted.pfsg"), "--context", "prefix:* 's",
                     "--rate", 5)
    assert code == 1


def test_corpus_stats(capsys, tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    a.write_bytes(b"hi bye\n")
    b.write_bytes(b"hi\n")
    code, out, _ = run(capsys, "corpus", "stats", a, b, "--pattern", "hi", "--format", "json")
    res = json.loads(out)
    assert code == 0 and list(res)[:2] == ["word_count", "sentence_count"]
    assert res["word_count"] == 3 and res["patterns"][0]["count"] == 2
    assert len(res["parts"]) == 2


def test_corpus_stats_bad_utf8(capsys, tmp_path):
    a = tmp_path / "a.txt"
    a.write_bytes(b"ok\n\xfe\n")
    code, _, err = run(capsys, "corpus", "stats", a)
    assert code == 1 and "byte offset 3" in err


def test_out_file(capsys, tmp_path):
    out = tmp_path / "r.json"
    code, stdout, _ = run(capsys, "grammar", "check", d("hibye_iid.pfsg"), "--format", "json",
                          "--out", out)
    assert code == 0 and stdout == "" and json.loads(out.read_text())["rules"] == 3


def test_console_script_entry():
    r = subprocess.run([sys.executable, "-m", "simplicity_lab", "--version"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("simplicity-lab")


# -- plot ----------------------------------------------------------------------------


def _profile(horizon=5):
    z = np.linspace(0.1, 0.01, horizon)
    return ConvergenceProfile(mode="exact", horizon=horizon, truth_bits=10.0, ref_symbol="a",
                              s=z, delta=z / 2, lam={8.0: z / 3}, tv2=z,
                              bound_pred=3.4, bound_over=6.9, bound_under={8.0: 12.0})


def test_svg_deterministic(tmp_path):
    p1, p2 = tmp_path / "a.svg", tmp_path / "b.svg"
    emit_profile_plot(_profile(), p1)
    emit_profile_plot(_profile(), p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert 'data-value="3.4"' in p1.read_text()


def test_empty_profile_creates_no_file(tmp_path):
    p = tmp_path / "e.svg"
    empty = ConvergenceProfile(mode="exact", horizon=0, truth_bits=1.0, ref_symbol="a",
                               s=np.zeros(0), delta=np.zeros(0), lam={8.0: np.zeros(0)},
                               tv2=np.zeros(0), bound_pred=1.0, bound_over=1.0,
                               bound_under={8.0: 1.0})
    with pytest.raises(ParameterError):
        emit_profile_plot(empty, p)
    assert not p.exists()
    with pytest.raises(ParameterError):
        profile_svg(None)
