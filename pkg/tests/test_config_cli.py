import functools
import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bifrac import cli
from bifrac import config as cfgmod
from bifrac.errors import ConfigError
from bifrac.signal import GridFunction

FIXTURE_CFG = str(cfgmod.PACKAGE_FIXTURES / "thmG.cfg")


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


# config files


def test_shipped_fixture_parses():
    c = cfgmod.load(FIXTURE_CFG)
    assert c.theorem == "thmG" and c.ladder == (6, 7)
    assert c.exponents.r == 2 and c.weight_spec("u") == "power(0.6)"


def test_round_trip_fixture():
    c = cfgmod.load(FIXTURE_CFG)
    again = cfgmod.parse(cfgmod.emit(c), "<emitted>", c.source_dir)
    assert again == c
    assert cfgmod.emit(again) == cfgmod.emit(c)


@settings(max_examples=30)
@given(st.sampled_from(["thmG-weak", "thmI", "thmF", "thmD"]), st.integers(0, 99),
       st.floats(0.05, 0.45), st.sampled_from([2.0, 3.0, 4.0]), st.integers(1, 3),
       st.sampled_from(["power(0.5)", "const", "power(-0.25)"]), st.booleans())
def test_round_trip_random(theorem, seed, alpha, p, refine, wspec, csv_out):
    text = f"""
[run]
theorem = {theorem}
seed = {seed}
[exponents]
n = 1
alpha = {alpha!r}
p1 = {p!r}
p2 = {p!r}
q = {1 / (1 / (p / 2) - alpha)!r}
[weights]
u = {wspec}
[mesh]
refine = {refine}
[output]
format = {"csv" if csv_out else "json"}
"""
    c = cfgmod.parse(text)
    assert cfgmod.parse(cfgmod.emit(c)) == c


@pytest.mark.parametrize("text,line,msg", [
    ("[run]\ntheorem = thmG\n[bogus]\n", 3, "unknown section"),
    ("[run]\nseed = x\n", 2, "cannot read"),
    ("[run]\nseed = 1\nseed = 2\n", 3, "repeated"),
    ("theorem = thmG\n", 1, "outside any section"),
    ("[weights]\n# comment\nu = power(\n", 3, "cannot read"),
    ("[run]\ntheorem = thmQ\n", 2, "unknown theorem"),
    ("[exponents]\np1 = 0.5\n", 1, "p1 > 1"),
    ("[young]\n\nphi = nonsense(2)\n", 3, ""),
    ("[run]\njust words\n", 2, "key = value"),
])
def test_line_anchored_errors(text, line, msg):
    with pytest.raises(ConfigError) as e:
        cfgmod.parse(text, "exp.cfg")
    assert str(e.value).startswith(f"exp.cfg:{line}:")
    assert msg in str(e.value)


def test_fixture_search_path(tmp_path, monkeypatch):
    f = GridFunction.sample(lambda c: np.exp(-c * c), 1, 1, 4)
    cfgmod.save_grid_function(f, tmp_path / "bump.csv")
    cfgmod.save_grid_function(f, tmp_path / "bump.bin")
    monkeypatch.setenv(cfgmod.FIXTURE_ENV, str(tmp_path))
    assert cfgmod.find_fixture("bump.csv") == tmp_path / "bump.csv"
    g = cfgmod.load_grid_function(cfgmod.find_fixture("bump.bin"))
    assert np.array_equal(g.values, f.values)
    # the override replaces the shipped directory
    with pytest.raises(ConfigError, match="not found"):
        cfgmod.find_fixture("indicator.csv")


def test_fixture_weight_mesh_mismatch(tmp_path, monkeypatch):
    f = GridFunction.constant(1.0, 1, 1, 4)
    cfgmod.save_grid_function(f, tmp_path / "w.csv")
    monkeypatch.setenv(cfgmod.FIXTURE_ENV, str(tmp_path))
    c = cfgmod.parse("[weights]\nu = fixture(w.csv)\n[mesh]\nL0 = 1\nL = 4\n")
    assert c.weight("u").values.sum() == f.values.sum()
    with pytest.raises(ConfigError, match="mesh"):
        c.weight("u", L=5)


# CLI


def test_orlicz_example(capsys):
    code, out, _ = run(["orlicz", "--phi", "power(2)", "--indicator", "0.25"], capsys)
    assert code == 0 and out.strip() == "0.5"


def test_sparse_example(capsys):
    code, out, err = run(["sparse", "--a", "64", "--grid", "t0"], capsys)
    assert code == 0
    d = json.loads(out)
    ratios = [c["E_over_Q"] for lev in d["levels"].values() for c in lev]
    assert ratios and min(ratios) >= 0.5
    assert not any(d["invariant_violations"].values())
    assert err.startswith("sparse a=64")


def test_verify_thmG_example(capsys, tmp_path):
    out_path = tmp_path / "g.json"
    code, out, _ = run(["verify", "--theorem", "thmG", "--config", FIXTURE_CFG, "--out", str(out_path)], capsys)
    assert code == 0 and out.startswith("verify thmG-weak: pass")
    d = json.loads(out_path.read_text())
    assert {"sufficiency", "necessity"} <= set(d["sections"])


def test_verify_determinism(tmp_path, capsys):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        assert cli.main(["verify", "--config", FIXTURE_CFG, "--seed", "7", "--out", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    csvs = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in csvs:
        assert cli.main(["verify", "--config", FIXTURE_CFG, "--format", "csv", "--out", str(p)]) == 0
    assert csvs[0].read_bytes() == csvs[1].read_bytes()
    assert csvs[0].read_text().splitlines()[0] == "theorem,n,alpha,p1,p2,q,r,s,scale,constant,ratio,drift"


def test_refine_flag(capsys):
    code, out, _ = run(["verify", "--config", FIXTURE_CFG, "--refine", "3"], capsys)
    assert code == 0 and [r["scale"] for r in json.loads(out)["ladder"]] == [6, 7, 8]


def test_other_subcommands(capsys):
    for argv in (["bi-alpha", "--alpha", "0.5", "--x", "0.5"],
                 ["maximal", "--phi", "power(2)", "--psi", "power(2)", "--alpha", "0.25"],
                 ["commutator", "--alpha", "0.5", "--N", "2", "--m", "1"],
                 ["weights", "--config", FIXTURE_CFG, "--kind", "eq21"],
                 ["weights", "--config", FIXTURE_CFG, "--kind", "ap", "--weight", "v1"],
                 ["verify", "--theorem", "section10-example", "--powers=-1.5,0.5"],
                 ["sweep", "--config", FIXTURE_CFG, "--theorem", "thmG-weak", "--param", "alpha", "--values",
                  "0.25"]):
        code, out, err = run(argv, capsys)
        assert code == 0, (argv, err)
        json.loads(out)
    code, out, _ = run(["bi-alpha", "--alpha", "0.5", "--x", "0.5"], capsys)
    assert json.loads(out)["value"] == pytest.approx(2 * np.sqrt(2), abs=1e-12)
    code, out, _ = run(["commutator", "--alpha", "0.5", "--N", "2", "--m", "1"], capsys)
    assert json.loads(out)["route_gap"] < 1e-8


def test_validation_exit_codes(capsys, tmp_path):
    assert run(["nope"], capsys)[0] == 2
    assert run(["orlicz"], capsys)[0] == 2
    bad = tmp_path / "bad.cfg"
    exps = "[exponents]\nn = 1\nalpha = 0.25\np1 = 4\np2 = 4\nq = 4\n"
    bad.write_text(exps + "r = 5\ns = 1.25\n")
    code, _, err = run(["verify", "--theorem", "thmG-weak", "--config", str(bad)], capsys)
    assert code == 2 and "p1 >= r (thmG)" in err
    # the strong theorems need the strict inequality
    bad.write_text(exps + "r = 4\ns = 1.3333333333333333\n")
    code, _, err = run(["verify", "--theorem", "thmE", "--config", str(bad)], capsys)
    assert code == 2 and "p1 > r (thmE)" in err
    bad.write_text("[run]\nseed = 1\nseed = 1\n")
    code, _, err = run(["verify", "--config", str(bad)], capsys)
    assert code == 2 and f"{bad}:3:" in err
    assert run(["verify", "--config", str(tmp_path / "missing.cfg")], capsys)[0] == 2


def test_numeric_failure_exit_code(capsys, tmp_path, monkeypatch):
    w = GridFunction.sample(lambda c: np.where(c < 0, 1e-12, 1.0), 1, 2, 6)
    cfgmod.save_grid_function(w, tmp_path / "imb.csv")
    monkeypatch.setenv(cfgmod.FIXTURE_ENV, str(tmp_path))
    cfg = tmp_path / "w.cfg"
    cfg.write_text("[weights]\nu = fixture(imb.csv)\n[mesh]\nL0 = 2\nL = 6\n")
    monkeypatch.setattr(cli, "ainfty_reverse_holder", functools.partial(cli.ainfty_reverse_holder, ms=(2.0,)))
    code, _, err = run(["weights", "--config", str(cfg), "--kind", "ainfty"], capsys)
    assert code == 3 and "reverse Hölder" in err


def test_console_script_entry_point():
    r = subprocess.run([sys.executable, "-m", "bifrac.cli", "orlicz", "--phi", "power(2)", "--indicator", "0.25"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip() == "0.5"
    r = subprocess.run([sys.executable, "-m", "bifrac.cli", "frobnicate"], capture_output=True, text=True)
    assert r.returncode == 2
