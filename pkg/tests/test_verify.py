import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bifrac.errors import ConfigError, NoReverseHolder
from bifrac.operators import bi_alpha
from bifrac.signal import ExponentConfig, GridFunction, PowerWeight, lp_norm, make_test_family
from bifrac.verify import (CSV_COLUMNS, MESH_MEMBERS, PAIR_MEMBERS, FamilySpec, SteinWeissTuple, TheoremReport,
                           classify, control_ratio, control_ratio_details, drift, growth_factors,
                           one_weight_triple, reports_to_csv, section10_example, steinweiss_check, strong_ratio,
                           thmg_necessity, thmg_report, verify_theorem, weak_level_sup, weak_ratio,
                           weak_ratio_details)
from bifrac.weights import WeightTriple

KS = ExponentConfig(n=1, alpha=0.25, p1=4, p2=4, q=4, r=2, s=2, sobolev=True)


def unit_triple(L0=2, L=5):
    return WeightTriple.powers(0, 0, 0, 1, L0, L)


def ind(corner, side, L0=2, L=5):
    return make_test_family("indicator", {"cube": (corner, side)}, n=1, L0=L0, L=L)[0]


# trend helpers


def test_trend_classes():
    assert classify([1.0, 1.05, 1.02]) == "stable"
    assert classify([1.0, 1.6, 2.6]) == "divergent"
    assert classify([1.0, 0.6, 0.3]) == "divergent"
    assert classify([1.0, 1.3, 1.7]) == "indeterminate"
    assert growth_factors([1.0, 2.0, 6.0]) == [2.0, 3.0]
    assert drift([2.0, 2.0]) == 0.0


# strong / weak / control ratios


def test_strong_ratio_one_pair_by_hand():
    f = ind(0.0, 1.0)
    got = strong_ratio(lambda a, b: bi_alpha(a, b, KS.alpha), KS, unit_triple(), [(f, f)])
    by_hand = lp_norm(bi_alpha(f, f, KS.alpha), KS.q) / (lp_norm(f, 4) * lp_norm(f, 4))
    assert got == by_hand


def test_kenig_stein_unweighted_stable():
    fam = FamilySpec(members=("unit", "split", "small", "offset", "tent"))
    vals = []
    for L in (5, 6, 7):
        pairs = fam.build(1, 2, L)
        vals.append(strong_ratio(lambda a, b: bi_alpha(a, b, KS.alpha), KS, unit_triple(2, L), pairs))
    assert all(np.isfinite(vals)) and drift(vals) < 0.1


def test_dilation_family_growth_for_violating_weights():
    # u = |x|^4 adds 4/q = 1 to the homogeneity: the ratio doubles with the dilation
    w = WeightTriple.powers(4.0, 0.0, 0.0, 1, 4, 4)
    op = lambda a, b: bi_alpha(a, b, KS.alpha)  # noqa: E731
    vals = [strong_ratio(op, KS, w, FamilySpec(members=("unit", "offset"), dilation=t).build(1, 4, 4))
            for t in (1.0, 2.0, 4.0, 8.0)]
    assert all(g >= 1.5 for g in growth_factors(vals))


def test_zero_pairs_are_skipped():
    z = GridFunction.zeros(1, 2, 5)
    f = ind(0.0, 1.0)
    with pytest.raises(ConfigError, match="zero denominator"):
        weak_ratio(KS, unit_triple(), [(z, z)])
    res = weak_ratio_details(KS, unit_triple(), [(z, z), (f, f)])
    assert res.per_pair[0] is None and res.notes == ["pair 0 skipped: zero denominator"]
    with pytest.raises(ConfigError):
        control_ratio(lambda a, b: bi_alpha(a, b, 0.5), lambda a, b: a, 1.0, PowerWeight(0, 1, 2, 5), [(z, z)])


def test_weak_level_sup_by_hand():
    M = np.array([3.0, 1.0, 2.0, 2.0])
    u = np.ones(4)
    # lam -> 3: 3 * 1; lam -> 2: 2 * 3; lam -> 1: 1 * 4 (q = 1, unit cells)
    assert weak_level_sup(M, u, 1.0, 1.0) == 6.0
    assert weak_level_sup(np.zeros(4), u, 1.0, 1.0) == 0.0


def test_weak_sufficiency_stable():
    w = WeightTriple.powers(0.6, 0.4, 0.2, 1, 2, 5)
    vals = [weak_ratio(KS, w, FamilySpec().build(1, 2, L)) for L in (5, 6)]
    assert all(np.isfinite(vals)) and drift(vals) < 0.1


def test_thmg_necessity_per_cube():
    w = WeightTriple.powers(0.6, 0.4, 0.2, 1, 2, 5)
    rep = thmg_necessity(KS, w, L0=2, L=5)
    rows = rep.sections["necessity"]["cubes"]
    assert rows and rep.passed
    for r in rows:
        assert r["condition"] <= 2 * max(r["ratio_at_lambda"], r["weak_ratio"]) * 1.05


def test_control_trivial_weight():
    rep = verify_theorem("thmF", KS, L0=2, ladder=(5, 6), w=PowerWeight(0.0, 1, 2, 5), q_values=(1.0,))
    assert rep.passed and rep.trend["ratio_drift"] < 0.1


def test_control_q_sweep():
    rep = verify_theorem("thmF", KS, L0=2, ladder=(5, 6), w=PowerWeight(0.5, 1, 2, 5), q_values=(0.7, 1.0, 2.0))
    for q in ("0.7", "1", "2"):
        assert rep.trend[f"q={q}"]["ratio_class"] == "stable"
    assert math.isfinite(rep.max_ratio) and rep.passed


def test_control_requires_ainfty(monkeypatch):
    # NoReverseHolder propagates as a precondition failure; a single-exponent
    # reverse Hölder test is strict enough to reject this weight
    import functools

    import bifrac.verify as v
    from bifrac.weights import CubeScan, ainfty_reverse_holder
    monkeypatch.setattr(v, "ainfty_reverse_holder", functools.partial(ainfty_reverse_holder, ms=(2.0,)))
    w = GridFunction.sample(lambda c: np.where(c < 0, 1e-12, 1.0), 1, 2, 5)
    f = ind(0.0, 1.0)
    with pytest.raises(NoReverseHolder):
        control_ratio_details(lambda a, b: bi_alpha(a, b, 0.5), lambda a, b: a, 1.0, w, [(f, f)],
                              scan=CubeScan(1, 2, 5))


# theorem drivers


@pytest.mark.parametrize("a,b,ok", [(0.0, 0.0, True), (0.5, -0.3, True), (0.0, 5.0, False), (5.0, 0.0, False)])
def test_thmI_designed_set(a, b, ok):
    fam = FamilySpec(members=PAIR_MEMBERS + MESH_MEMBERS)
    w = one_weight_triple(PowerWeight(a, 1, 2, 5), PowerWeight(b, 1, 2, 5), KS)
    rep = verify_theorem("thmI", KS, w, L0=2, ladder=(5, 6, 7), family=fam)
    expected = "stable" if ok else "divergent"
    # finiteness of the strong ratio co-occurs with finiteness of the condition
    assert rep.trend["constant_class"] == expected
    assert rep.trend["ratio_class"] == expected
    assert rep.passed is (True if ok else None)


@settings(max_examples=10)
@given(st.lists(st.sampled_from(PAIR_MEMBERS), min_size=1, max_size=3, unique=True),
       st.sampled_from(PAIR_MEMBERS))
def test_monotone_family_growth(members, extra):
    w = WeightTriple.powers(0.6, 0.4, 0.2, 1, 2, 4)
    small = FamilySpec(members=tuple(members)).build(1, 2, 4)
    big = FamilySpec(members=tuple(members) + (extra,)).build(1, 2, 4)
    op = lambda f, g: bi_alpha(f, g, KS.alpha)  # noqa: E731
    assert strong_ratio(op, KS, w, big) >= strong_ratio(op, KS, w, small)
    assert weak_ratio(KS, w, big) >= weak_ratio(KS, w, small)


def test_open_case_requires_exploratory():
    cfg = ExponentConfig(n=1, alpha=0.9, p1=1.5, p2=1.5, q=1.0 / (1 / 0.75 - 0.9))
    w = unit_triple()
    with pytest.raises(ConfigError, match="exploratory"):
        verify_theorem("thmD", cfg, w, ladder=(4, 5))
    rep = verify_theorem("thmD", cfg, w, ladder=(4, 5), exploratory=True,
                         family=FamilySpec(members=("unit",)))
    assert rep.passed is None and rep.trend["ratio_class"] in ("stable", "divergent", "indeterminate")


def test_unknown_theorem():
    with pytest.raises(ConfigError):
        verify_theorem("thmZ", KS, unit_triple())
    with pytest.raises(ConfigError):
        TheoremReport("thmZ", KS)


def test_thmg_report_both_directions():
    w = WeightTriple.powers(0.6, 0.4, 0.2, 1, 2, 5)
    rep = thmg_report(KS, w, L0=2, ladder=(5, 6))
    assert rep.passed
    assert rep.sections["sufficiency"]["passed"] and rep.sections["necessity"]["passed"]


# Stein-Weiss and the power-weight example


def test_steinweiss_pure_bilinear_case():
    # beta = gammas = 0 and alpha = n + n/q - n/p
    t = SteinWeissTuple(alpha=1 + 1 / 4 - 1 / 2, beta=0, gamma1=0, gamma2=0, p1=4, p2=4, q=4)
    rep = steinweiss_check(t, trilinear=False)
    assert rep.sections["admissible"] and rep.passed
    assert rep.condition["constant"] < np.inf


def test_steinweiss_admissible_and_violating():
    ok = steinweiss_check((0.7, 0.1, 0.1, 0.1, 4, 4, 2))
    assert ok.sections["admissible"] and ok.trend["constant_class"] == "stable" and ok.passed
    bad = steinweiss_check((0.9, 0.1, 0.1, 0.1, 4, 4, 2))
    assert not bad.sections["flags"]["balance"]
    assert bad.trend["constant_class"] == "divergent" and bad.passed
    assert all(v > 0 for k, v in ok.sections["trilinear"].items())


def test_section10_trivial():
    rep = section10_example(0.0, 0.0, 4, 4, L0s=(1, 2))
    assert rep.condition["K"] == pytest.approx([1.0, 1.0])
    assert rep.condition["ap_w1"] == pytest.approx([1.0, 1.0])
    assert rep.condition["ap_w2"] == pytest.approx([1.0, 1.0])


def test_section10_headline():
    rep = section10_example(-1.5, 0.5, 4, 4)
    assert rep.passed
    assert rep.sections["headline"]["K_stable"] and rep.sections["headline"]["ap_w1_diverges"]


def test_section10_boundary_probe():
    Ks = [max(section10_example(a, 0.0, 4, 4, L0s=(2, 3)).condition["K"]) for a in (0.5, 0.9, 0.99)]
    assert Ks[0] < Ks[1] < Ks[2]


# serialization


def test_report_json_and_csv():
    w = WeightTriple.powers(0.6, 0.4, 0.2, 1, 2, 4)
    rep = verify_theorem("thmG-weak", KS, w, L0=2, ladder=(4, 5), family=FamilySpec(members=("unit",)))
    d = json.loads(rep.to_json())
    assert d["schema"] == 1 and d["theorem"] == "thmG-weak"
    assert d["provenance"]["family_digest"] == FamilySpec(members=("unit",)).digest()
    assert rep.to_json() == rep.to_json()
    rows = list(csv.DictReader(io.StringIO(reports_to_csv([rep, rep]))))
    assert len(rows) == 4 and tuple(rows[0]) == CSV_COLUMNS
    assert all(float(r["ratio"]) >= 0 for r in rows)


def test_family_digest_changes_with_manifest():
    assert FamilySpec(seed=1).digest() != FamilySpec(seed=2).digest()
    with pytest.raises(ConfigError):
        FamilySpec(members=("nope",))
