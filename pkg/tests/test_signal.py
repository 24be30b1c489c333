import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bifrac.dyadic import Cube
from bifrac.errors import ConfigError
from bifrac.signal import (ExponentConfig, GridFunction, PowerWeight, average, lp_norm, make_test_family,
                           weight_product)


def ind(corner, side, L=6, n=1, L0=2):
    return make_test_family("indicator", {"cube": (corner, side)}, 0, n=n, L0=L0, L=L)[0]


def test_average_constant():
    f = GridFunction.constant(3.5, 1, 2, 5)
    assert average(f, Cube((-1.3,), 2.17)) == pytest.approx(3.5, rel=1e-14)


def test_average_measure_ratio():
    assert average(ind(0.0, 1.0), Cube((0.0,), 2.0)) == pytest.approx(0.5, abs=1e-15)


def test_average_misaligned_cube_with_refinement_oracle():
    q = Cube((0.25,), 1.5)
    coarse = average(ind(0.0, 1.0, L=4), q)
    # brute force: subcell summation on a fine mesh
    fine = ind(0.0, 1.0, L=10)
    c = fine.centers()
    inside = (c >= 0.25) & (c < 1.75)
    brute = fine.values[inside].mean()
    assert coarse == pytest.approx(0.5, abs=1e-14)
    assert brute == pytest.approx(coarse, abs=2 ** -9)


def test_average_zero_volume_rejected():
    with pytest.raises(ValueError):
        Cube((0.0,), 0.0)


def test_lp_norm_examples():
    assert lp_norm(ind(0.0, 1.0), 2) == pytest.approx(1.0)
    one = ind(-1.0, 2.0)
    assert lp_norm(one, 1, ind(0.0, 1.0)) == pytest.approx(1.0)
    L = 10
    x = GridFunction.sample(lambda c: np.where((c >= 0) & (c < 1), c, 0.0), 1, 2, L)
    assert lp_norm(x, 2) == pytest.approx(3 ** -0.5, abs=4 * 2.0**-L)


def test_lp_norm_rejects_nonpositive_p():
    with pytest.raises(ValueError):
        lp_norm(ind(0.0, 1.0), 0)


def test_family_examples():
    f = make_test_family("indicator", {"cube": (0.0, 1.0)}, n=1, L0=2, L=5)[0]
    c = f.centers()
    assert np.array_equal(f.values, ((c >= 0) & (c < 1)).astype(float))
    tp = make_test_family("truncated-power", {"a": -0.5}, n=1, L0=2, L=5)[0]
    h = tp.h
    r = np.abs(tp.centers())
    expect = np.where(r < 1, np.minimum(r ** -0.5, h ** -0.5), 0.0)
    assert np.allclose(tp.values, expect)


def test_family_thmg_necessity_member():
    p1, r = 4.0, 2.0
    v1 = PowerWeight(0.3 * p1, 1, 2, 5)
    f = make_test_family("thmG-necessity", {"weight": v1, "exponent": 1 / (p1 - r), "cube": (0.0, 1.0)},
                         n=1, L0=2, L=5)[0]
    c = f.centers()
    mask = (c >= 0) & (c < 1)
    assert np.allclose(f.values[mask], v1.values[mask] ** (-1 / (p1 - r)))
    assert np.all(f.values[~mask] == 0)


def test_family_unknown_kind():
    with pytest.raises(ConfigError):
        make_test_family("gaussian")


def test_family_deterministic():
    a = make_test_family("random-nonnegative", {"count": 3}, 7, n=2, L0=1, L=3)
    b = make_test_family("random-nonnegative", {"count": 3}, 7, n=2, L0=1, L=3)
    assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))
    assert all((x.values >= 0).all() for x in a)


def test_exponent_config_invariants():
    with pytest.raises(ConfigError):
        ExponentConfig(n=1, alpha=1.0)
    with pytest.raises(ConfigError):
        ExponentConfig(r=2.0, s=3.0)
    with pytest.raises(ConfigError):
        ExponentConfig(alpha=0.25, p1=4, p2=4, q=3, sobolev=True)
    cfg = ExponentConfig(alpha=0.25, p1=4, p2=4, q=4, sobolev=True, r=2, s=2)
    assert cfg.p == pytest.approx(2.0)
    cfg.require_holder(False, "thmG")
    cfg.require_holder(True, "thmE")
    edge = ExponentConfig(alpha=0.25, p1=4, p2=4, q=4, r=4, s=4 / 3)
    edge.require_holder(False, "thmG")
    with pytest.raises(ConfigError, match="p1 > r"):
        edge.require_holder(True, "thmE")


@pytest.mark.parametrize("n,L0,L", [(1, 2, 5), (2, 1, 3)])
def test_serialization_round_trip(n, L0, L):
    f = make_test_family("random-nonnegative", {"count": 1}, 3, n=n, L0=L0, L=L)[0]
    for g in (GridFunction.from_bytes(f.to_bytes()), GridFunction.from_csv(f.to_csv())):
        assert (g.n, g.L0, g.L) == (n, L0, L)
        assert np.array_equal(g.values, f.values)


def test_binary_layout_little_endian():
    f = GridFunction.constant(1.5, 1, 0, 0)
    data = f.to_bytes()
    assert data[-8:] == np.float64(1.5).astype("<f8").tobytes()


def test_power_weight_exact_cell_average():
    w = PowerWeight(0.5, 1, 2, 3)
    h = w.pow(1.0).h
    # cell [0, h): average of x^0.5 is h^0.5 / 1.5
    i = int(4 / h)
    assert w.values[i] == pytest.approx(h ** 0.5 / 1.5, rel=1e-12)


def test_weight_product_symbolic():
    a, b = PowerWeight(0.4, 1, 2, 4), PowerWeight(0.2, 1, 2, 4)
    prod = weight_product((a, 2.0), (b, 1.0))
    assert np.allclose(prod.values, PowerWeight(1.0, 1, 2, 4).values)


vals = st.lists(st.floats(0, 10, allow_nan=False), min_size=4, max_size=4)


@given(vals, vals, st.floats(-2, 2, allow_nan=False), st.floats(0.01, 2.5), st.floats(-3.9, 3.5))
def test_average_linear_and_bounded(v1, v2, c, side, corner):
    f = GridFunction(np.repeat(np.array(v1), 8), 0, 4)
    g = GridFunction(np.repeat(np.array(v2), 8), 0, 4)
    corner = max(-1.0, min(corner, 1.0 - side)) if side < 2 else -1.0
    q = Cube((corner,), min(side, 2.0))
    lhs = average(f * c + g, q)
    assert lhs == pytest.approx(c * average(f, q) + average(g, q), abs=1e-10)
    a = average(f, q)
    assert min(v1) - 1e-12 <= a <= max(v1) + 1e-12


@given(st.lists(st.tuples(st.floats(0, 5), st.floats(0, 5), st.floats(0, 5)), min_size=1, max_size=20),
       st.floats(1.2, 4.0), st.floats(1.2, 4.0), st.floats(0.0, 1.0))
def test_discrete_holder_three_sequences(rows, p1, p2, t):
    # exponents with 1/p1 + 1/p2 < 1 <= 1/p1 + 1/p2 + 1/p3
    s12 = 1 / p1 + 1 / p2
    if s12 >= 1:
        return
    inv3 = (1 - s12) + t * s12
    p3 = 1 / inv3
    a, b, c = (np.array(x) for x in zip(*rows))
    lhs = float(np.sum(a * b * c))
    rhs = (np.sum(a**p1) ** (1 / p1)) * (np.sum(b**p2) ** (1 / p2)) * (np.sum(c**p3) ** (1 / p3))
    assert lhs <= rhs * (1 + 1e-12) + 1e-12


def test_refinement_consistency_smooth():
    def tent(L):
        return make_test_family("tent", {"center": (0.0,), "radius": 1.0}, n=1, L0=2, L=L)[0]

    q = Cube((-0.3,), 0.9)
    a1, a2 = average(tent(6), q), average(tent(7), q)
    assert abs(a1 - a2) <= 2 * 2.0**-6
    assert abs(lp_norm(tent(6), 2) - lp_norm(tent(7), 2)) <= 2 * 2.0**-6
    assert math.isfinite(a1)
