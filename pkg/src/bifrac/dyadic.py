"""Shifted dyadic grids, cube arithmetic and the one-third-shift covering lemma.

Grid cubes are addressed by ``(t, k, m)``: the cube
``2**-k * ([0, 1)**n + m + (-1)**k * t)`` with ``t`` in ``{0, 1/3}**n``.
Corners of addressed cubes are computed with :class:`fractions.Fraction`,
so membership and containment tests never accumulate rounding error.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .errors import GridMembershipError

THIRD = Fraction(1, 3)


def _as_shift(value) -> Fraction:
    if isinstance(value, Fraction):
        frac = value
    else:
        frac = Fraction(value).limit_denominator(3)
    if frac not in (0, THIRD):
        raise ValueError(f"grid shift must be 0 or 1/3, got {value!r}")
    return frac


def _exact(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(float(x))


@dataclass(frozen=True)
class Address:
    shift: tuple[Fraction, ...]
    level: int
    index: tuple[int, ...]


@dataclass(frozen=True)
class Cube:
    """Half-open axis-parallel cube ``[corner, corner + side)``.

    ``address`` is set when the cube belongs to a shifted dyadic grid; it is
    the source of truth for the exact corner in that case.
    """

    corner: tuple[float, ...]
    side: float
    address: Optional[Address] = None

    def __post_init__(self):
        if not self.side > 0:
            raise ValueError(f"cube side must be positive, got {self.side}")
        object.__setattr__(self, "corner", tuple(float(c) for c in self.corner))

    @classmethod
    def from_bounds(cls, lo: Sequence[float], side: float) -> "Cube":
        return cls(tuple(lo), float(side))

    @property
    def n(self) -> int:
        return len(self.corner)

    @property
    def volume(self) -> float:
        return self.side**self.n

    @property
    def center(self) -> tuple[float, ...]:
        return tuple(c + 0.5 * self.side for c in self.corner)

    @property
    def upper(self) -> tuple[float, ...]:
        return tuple(c + self.side for c in self.corner)

    @property
    def level(self) -> int:
        if self.address is None:
            raise GridMembershipError("cube is not addressed in a dyadic grid")
        return self.address.level

    def exact_corner(self) -> tuple[Fraction, ...]:
        if self.address is None:
            return tuple(_exact(c) for c in self.corner)
        a = self.address
        scale = Fraction(2) ** (-a.level)
        sign = 1 if a.level % 2 == 0 else -1
        return tuple(scale * (m + sign * t) for m, t in zip(a.index, a.shift))

    def exact_side(self) -> Fraction:
        if self.address is None:
            return _exact(self.side)
        return Fraction(2) ** (-self.address.level)

    def triple(self) -> "Cube":
        """Concentric cube with three times the side (unaddressed)."""
        return Cube(tuple(c - self.side for c in self.corner), 3.0 * self.side)

    def contains_point(self, point: Sequence[float]) -> bool:
        lo = self.exact_corner()
        s = self.exact_side()
        return all(a <= _exact(x) < a + s for a, x in zip(lo, point))

    def contains(self, other: "Cube") -> bool:
        lo, s = self.exact_corner(), self.exact_side()
        olo, os_ = other.exact_corner(), other.exact_side()
        return all(a <= b and b + os_ <= a + s for a, b in zip(lo, olo))

    def intersects(self, other: "Cube") -> bool:
        lo, s = self.exact_corner(), self.exact_side()
        olo, os_ = other.exact_corner(), other.exact_side()
        return all(b < a + s and a < b + os_ for a, b in zip(lo, olo))

    def to_dict(self) -> dict:
        d = {"corner": list(self.corner), "side": self.side}
        if self.address is not None:
            d["shift"] = [str(t) for t in self.address.shift]
            d["level"] = self.address.level
            d["index"] = list(self.address.index)
        return d


@dataclass(frozen=True)
class DyadicGrid:
    """The grid ``D^t`` for a shift vector ``t`` in ``{0, 1/3}**n``."""

    n: int
    shift: tuple[Fraction, ...]

    def __init__(self, n: int, shift=None):
        if n < 1:
            raise ValueError("dimension must be positive")
        if shift is None:
            shift = (0,) * n
        elif not isinstance(shift, (tuple, list)):
            shift = (shift,) * n
        if len(shift) != n:
            raise ValueError("shift length must equal dimension")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "shift", tuple(_as_shift(t) for t in shift))

    @classmethod
    def all_shifts(cls, n: int) -> list["DyadicGrid"]:
        """All ``2**n`` grids in lexicographic order of the shift."""
        return [cls(n, t) for t in itertools.product((Fraction(0), THIRD), repeat=n)]

    @property
    def name(self) -> str:
        return "t" + "".join("0" if t == 0 else "3" for t in self.shift)

    def cube(self, level: int, index: Sequence[int]) -> Cube:
        addr = Address(self.shift, int(level), tuple(int(m) for m in index))
        scale = Fraction(2) ** (-level)
        sign = 1 if level % 2 == 0 else -1
        corner = tuple(float(scale * (m + sign * t)) for m, t in zip(addr.index, self.shift))
        return Cube(corner, float(scale), addr)

    def index_of(self, level: int, point: Sequence[float]) -> tuple[int, ...]:
        scale = Fraction(2) ** level
        sign = 1 if level % 2 == 0 else -1
        return tuple(
            math.floor(_exact(x) * scale - sign * t) for x, t in zip(point, self.shift)
        )

    def offset(self, level: int) -> tuple[float, ...]:
        """Float corner offset of the level-``level`` lattice, per axis."""
        sign = 1 if level % 2 == 0 else -1
        return tuple(float(Fraction(2) ** (-level) * sign * t) for t in self.shift)

    def contains(self, cube: Cube) -> bool:
        return cube.address is not None and cube.address.shift == self.shift


def cube_at(grid: DyadicGrid, level: int, point: Sequence[float]) -> Cube:
    """The unique level-``level`` cube of ``grid`` containing ``point``."""
    if len(point) != grid.n:
        raise ValueError("point dimension does not match grid")
    if not all(math.isfinite(x) for x in point):
        raise ValueError("point must be finite")
    return grid.cube(level, grid.index_of(level, point))


def _require_address(c: Cube) -> Address:
    if c.address is None:
        raise GridMembershipError("parent/children need a cube addressed in a dyadic grid")
    return c.address


def parent(c: Cube) -> Cube:
    a = _require_address(c)
    grid = DyadicGrid(len(a.shift), a.shift)
    p = grid.cube(a.level - 1, grid.index_of(a.level - 1, c.exact_corner()))
    assert p.contains(c)
    return p


def children(c: Cube) -> list[Cube]:
    a = _require_address(c)
    grid = DyadicGrid(len(a.shift), a.shift)
    lo = c.exact_corner()
    half = c.exact_side() / 2
    out = []
    for e in itertools.product((0, 1), repeat=len(lo)):
        corner = tuple(x + half * b for x, b in zip(lo, e))
        child = grid.cube(a.level + 1, grid.index_of(a.level + 1, corner))
        assert child.exact_corner() == corner
        out.append(child)
    return out


def lerner_cover(q: Cube) -> tuple[tuple[Fraction, ...], Cube]:
    """Find ``t`` and ``Q_t`` in ``D^t`` with ``q`` inside and side at most ``6 * side(q)``.

    Shifts are scanned in lexicographic order; within a shift, levels run from
    the smallest admissible side upward.  The first containing cube wins.
    """
    s = q.exact_side()
    # smallest k with 2**-k >= s  <=>  largest admissible level
    k_hi = math.floor(-math.log2(float(s))) + 1
    while Fraction(2) ** (-k_hi) < s:
        k_hi -= 1
    for grid in DyadicGrid.all_shifts(q.n):
        k = k_hi
        while Fraction(2) ** (-k) <= 6 * s:
            cand = cube_at(grid, k, q.exact_corner())
            if cand.contains(q):
                return grid.shift, cand
            k -= 1
    raise RuntimeError(f"no covering dyadic cube found for {q}")
