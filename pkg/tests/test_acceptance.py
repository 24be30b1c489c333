"""Acceptance criteria, one test each.

Every test checks its tolerance and its runtime budget, records a one-line
verdict (printed in the terminal summary) and then asserts.
"""

import json
import math
import time

import numpy as np
import pytest

from bifrac import cli
from bifrac import config as cfgmod
from bifrac.dyadic import Cube, DyadicGrid
from bifrac.operators import CommutatorSpec, bi_alpha, commutator_direct, commutator_kernel
from bifrac.signal import ExponentConfig, GridFunction, PowerWeight, make_test_family
from bifrac.sparse import check_invariants, cz_select, subtree_weight_sum
from bifrac.verify import SteinWeissTuple, drift, section10_example, steinweiss_check, verify_theorem
from bifrac.young import (ExpL, LLogL, LogBump, Power, ReverseLogBump, bp_check, holder_pair_check, orlicz_norm,
                          orlicz_norm_prime)

FIXTURE_CFG = str(cfgmod.PACKAGE_FIXTURES / "thmG.cfg")


@pytest.fixture
def report(record_property):
    def _report(num, title, ok, elapsed, budget, detail=""):
        ok = bool(ok) and (budget is None or elapsed < budget)
        limit = f" / {budget:.0f}s" if budget is not None else ""
        line = f"[{'PASS' if ok else 'FAIL'}] {num:>2}. {title}: {detail} ({elapsed:.1f}s{limit})"
        record_property("acceptance", line)
        return ok
    return _report


def test_01_orlicz_calculus(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    phis = [Power(2.0), Power(1.5), LogBump(2.0, 1.0), LLogL(1.0), ExpL(), LLogL(2.0), ReverseLogBump(2.0, 1.5)]
    fams = {1: make_test_family("random-nonnegative", {"count": 40, "decades": 3, "zero_fraction": 0.2, "block": 3},
                                seed=1, n=1, L0=1, L=5),
            2: make_test_family("random-nonnegative", {"count": 20, "decades": 3, "zero_fraction": 0.2, "block": 1},
                                seed=2, n=2, L0=1, L=3)}
    equiv = holder = 0
    for i in range(1000):
        n = 2 if i % 5 == 0 else 1
        fs = fams[n]
        f, g = fs[rng.integers(len(fs))], fs[rng.integers(len(fs))]
        side = 2.0 ** -int(rng.integers(0, 4))
        corner = tuple(np.floor(rng.uniform(-2, 2 - side, size=n) / side) * side)
        q, phi = Cube(corner, side), phis[i % len(phis)]
        nrm, prime = orlicz_norm(f, q, phi), orlicz_norm_prime(f, q, phi)
        equiv += not (nrm * (1 - 1e-9) <= prime <= 2 * nrm * (1 + 1e-9))
        lhs, rhs = holder_pair_check(f, g, q, phi)
        holder += not (lhs <= rhs * (1 + 1e-9))
    dt = time.perf_counter() - t0
    ok = report(1, "Orlicz calculus", equiv == holder == 0, dt, 30,
                f"1000 instances, {equiv} equivalence and {holder} Hölder violations")
    assert ok


BP_CASES = [
    (Power(1.5), 2.0, True), (Power(2.0), 2.0, False), (Power(3.0), 2.0, False),
    (ReverseLogBump(3.0, 1 + 2 * 0.5), 3.0, True),
    (ReverseLogBump(4.0, 1 + 3 * 0.5), 4.0, True),
    (ReverseLogBump(2.0, 1 + 0.5), 2.0, True),
    (ReverseLogBump(2.0, 1.0), 2.0, False), (ReverseLogBump(2.0, 0.5), 2.0, False),
    (LogBump(2.0, -2.0), 2.0, True), (LogBump(2.0, 1.0), 2.0, False),
    (LogBump(1.5, 3.0), 2.0, True), (LLogL(1.0), 1.5, True),
]


def test_02_bp_classifier(report):
    t0 = time.perf_counter()
    bad = []
    for phi, p, expected in BP_CASES:
        r = bp_check(phi, p)
        if not (r.symbolic == r.numeric == expected):
            bad.append(f"{phi.spec()} p={p:g}")
    dt = time.perf_counter() - t0
    ok = report(2, "B_p classifier", not bad, dt, 10,
                f"{len(BP_CASES) - len(bad)}/{len(BP_CASES)} cases agree" + (f", mismatched {bad}" if bad else ""))
    assert ok


def test_03_quadrature_ground_truth(report):
    t0 = time.perf_counter()
    errs = {}
    for L in (8, 10, 12):
        f = GridFunction.sample(lambda c: ((c >= 0) & (c < 1)).astype(float), 1, 1, L)
        v = bi_alpha(f, f, 0.5)
        # the sample of the cell containing x = 0.5
        errs[L] = abs(float(v.values[int((0.5 + v.W) / v.h)]) - 2 * math.sqrt(2))
    rates = [math.log2(errs[a] / errs[b]) / (b - a) for a, b in ((8, 10), (10, 12))]
    dt = time.perf_counter() - t0
    first_order = all(0.8 <= r <= 1.2 for r in rates)
    ok = report(3, "quadrature ground truth", errs[12] <= 1e-4 and first_order, dt, 20,
                f"|err| at L=12 {errs[12]:.2e} (tol 1e-04), observed orders {rates[0]:.3f}, {rates[1]:.3f}")
    assert ok


def test_04_commutator_routes(report):
    t0 = time.perf_counter()

    def smooth(fn):
        return GridFunction.sample(fn, 1, 1, 5)

    def rand(seed):
        rng = np.random.default_rng(seed)
        g = GridFunction.zeros(1, 1, 5)
        return g.like(np.where(np.abs(g.centers()) < 0.5 * g.W, rng.standard_normal(g.shape), 0.0))

    fns = [np.sin, np.cos, lambda x: np.exp(-x * x)]
    f, g = rand(7), rand(8)
    route = 0.0
    for slots in [(1,), (2,), (1, 2), (2, 2), (1, 1, 2), (1, 2, 2), (2, 1, 1)]:
        spec = CommutatorSpec([smooth(fns[i]) for i in range(len(slots))], list(slots))
        d = commutator_direct(spec, f, g, 0.5).values
        k = commutator_kernel(spec, f, g, 0.5).values
        route = max(route, np.abs(d - k).max() / max(np.abs(d).max(), 1e-300))
    perm = 0.0
    bs = [smooth(fn) for fn in fns]
    base = commutator_direct(CommutatorSpec(bs, [1, 2, 1]), f, g, 0.5).values
    for order in [(1, 0, 2), (2, 1, 0), (0, 2, 1)]:
        other = commutator_direct(CommutatorSpec([bs[i] for i in order], [[1, 2, 1][i] for i in order]),
                                  f, g, 0.5).values
        perm = max(perm, np.abs(base - other).max() / max(1.0, np.abs(base).max()))
    dt = time.perf_counter() - t0
    ok = report(4, "commutator routes", route <= 1e-8 and perm <= 1e-10, dt, 60,
                f"route gap {route:.1e} (tol 1e-08), permutation gap {perm:.1e} (tol 1e-10)")
    assert ok


def test_05_sparse_invariants(report):
    t0 = time.perf_counter()
    violations = 0
    for i in range(500):
        n = 2 if i % 4 == 0 else 1
        L = 3 if n == 2 else 5
        f, g = make_test_family("random-nonnegative", {"count": 2, "decades": 3, "zero_fraction": 0.3,
                                                       "block": 1 if n == 2 else 2}, seed=i, n=n, L0=1, L=L)
        grid = DyadicGrid.all_shifts(n)[i % 2**n]
        if i % 2 == 0:
            fam = cz_select(f, g, LLogL(1), LLogL(1), 2.0 ** (2 * n + 4), grid)
        else:
            fam = cz_select(f, g, LLogL(2), LLogL(2), 2.0 ** (n + 2), grid, f_power=2.0, g_power=2.0)
        violations += sum(check_invariants(fam).values())
    dt = time.perf_counter() - t0
    ok = report(5, "sparse invariants", violations == 0, dt, 60, f"500 draws, {violations} violations")
    assert ok


def test_06_geometric_collapse(report):
    t0 = time.perf_counter()
    top = DyadicGrid(1).cube(0, (0,))
    gap = 0.0
    for alpha in (0.25, 0.5, 0.75):
        for q in (0.5, 1.0, 2.0):
            expected = 2 ** (alpha * q) / (2 ** (alpha * q) - 1)
            gap = max(gap, abs(subtree_weight_sum(top, alpha, q) - expected))
    dt = time.perf_counter() - t0
    ok = report(6, "geometric collapse", gap <= 1e-10, dt, None, f"max gap {gap:.1e} over 3x3 (tol 1e-10)")
    assert ok


def test_07_thmG_fixture(report, tmp_path, capsys):
    t0 = time.perf_counter()
    out = tmp_path / "thmG.json"
    code = cli.main(["verify", "--theorem", "thmG", "--config", FIXTURE_CFG, "--out", str(out)])
    capsys.readouterr()
    d = json.loads(out.read_text())
    suff, nec = d["sections"]["sufficiency"], d["sections"]["necessity"]
    dt = time.perf_counter() - t0
    ok = report(7, "thmG at desk scale", code == 0 and suff["passed"] and nec["passed"], dt, 180,
                f"sufficiency {'pass' if suff['passed'] else 'fail'}, necessity {'pass' if nec['passed'] else 'fail'}")
    assert ok


def test_08_ainfty_control(report):
    t0 = time.perf_counter()
    cfg = ExponentConfig(n=1, alpha=0.25, p1=4, p2=4, q=4, r=2, s=2, N=2, m=1)
    ladder, worst, failed = (9, 10), 0.0, []
    for theorem in ("thmF", "thmC"):
        for a in (0.5, -0.5, 1.0):
            rep = verify_theorem(theorem, cfg, L0=2, ladder=ladder, w=PowerWeight(a, 1, 2, ladder[0]),
                                 q_values=(0.7, 1.0, 2.0))
            worst = max(worst, rep.trend["ratio_drift"])
            if not rep.passed:
                failed.append(f"{theorem} |x|^{a:g}")
    dt = time.perf_counter() - t0
    ok = report(8, "A_inf control", not failed and worst < 0.1, dt, 300,
                f"thmF + thmC, 3 weights x 3 q, worst drift {worst:.3f} (tol 0.1)"
                + (f", failed {failed}" if failed else ""))
    assert ok


def test_09_section10_headline(report):
    t0 = time.perf_counter()
    rep = section10_example(-1.5, 0.5, 4, 4)
    K, ap = rep.condition["K"], rep.condition["ap_w1"]
    growth = [b / a for a, b in zip(ap, ap[1:])]
    d = drift(K)
    dt = time.perf_counter() - t0
    ok = report(9, "power-weight separation", d <= 0.1 and min(growth) >= 1.5 and rep.passed, dt, 120,
                f"K drift {d:.3f} over W=2..16, A_2(|x|^-1.5) growth per doubling {min(growth):.2f}..{max(growth):.2f}")
    assert ok


def test_10_steinweiss_gate(report):
    t0 = time.perf_counter()
    good = steinweiss_check(SteinWeissTuple(0.7, 0.1, 0.1, 0.1, 4, 4, 2))
    bad = steinweiss_check(SteinWeissTuple(0.9, 0.1, 0.1, 0.1, 4, 4, 2))
    ok_good = good.sections["admissible"] and good.trend["constant_class"] == "stable"
    ok_bad = not bad.sections["admissible"] and bad.trend["constant_class"] == "divergent"
    dt = time.perf_counter() - t0
    ok = report(10, "Stein-Weiss gate", ok_good and ok_bad, dt, 120,
                f"admissible {good.trend['constant_class']}, violating {bad.trend['constant_class']}")
    assert ok


def test_11_determinism(report, tmp_path, capsys):
    t0 = time.perf_counter()
    runs = [["verify", "--config", FIXTURE_CFG, "--seed", "7"],
            ["verify", "--config", FIXTURE_CFG, "--seed", "7", "--format", "csv"],
            ["verify", "--theorem", "section10-example", "--powers=-1.5,0.5", "--seed", "3"]]
    same = []
    for k, argv in enumerate(runs):
        blobs = []
        for rep in range(2):
            out = tmp_path / f"{k}-{rep}.out"
            assert cli.main(argv + ["--out", str(out)]) == 0
            blobs.append(out.read_bytes())
        same.append(blobs[0] == blobs[1])
    capsys.readouterr()
    dt = time.perf_counter() - t0
    ok = report(11, "determinism", all(same), dt, None, f"{sum(same)}/{len(runs)} repeated runs byte-identical")
    assert ok
