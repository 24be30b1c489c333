"""Calderón–Zygmund level-set selection and the resulting sparse family.

The tested functional on a dyadic cube ``Q`` is

    F(Q) = |Q|^{alpha/n} * ||f^r||_{Phi,Q}^{1/r} * ||g^s||_{Psi,Q}^{1/s}

with the volume factor optional and ``r = s = 1`` by default.  For each
integer ``k`` the family holds the maximal grid cubes with ``F(Q) > a**k``;
``E_j^k`` is ``Q_j^k`` minus the level ``k+1`` cubes, stored as a boolean
mask over the level-``L`` cubes of the same grid ("atoms").
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .dyadic import Cube, DyadicGrid, children
from .errors import ConfigError
from .signal import ExponentConfig, GridFunction
from .weights import cube_norms
from .young import LLogL, Power, YoungFunction


MAX_CLIMB = 40
PAINT_MIN = 48  # levels with more cubes are painted through a coarse array
SNAP_RTOL = 1e-12


def _threshold(a: float, k: int) -> float:
    return float(a) ** k


def _k_at_least(a: float, x: float) -> int:
    """Smallest integer ``k`` with ``a**k >= x`` (``x > 0``)."""
    k = math.ceil(math.log(x) / math.log(a))
    while _threshold(a, k - 1) >= x:
        k -= 1
    while _threshold(a, k) < x:
        k += 1
    return k


def _k_below(a: float, x: float) -> int:
    """Largest integer ``k`` with ``a**k < x`` (``x > 0``)."""
    return _k_at_least(a, x) - 1


def _snap(vals: np.ndarray, a: float, rtol: float = SNAP_RTOL) -> np.ndarray:
    """Move values within ``rtol`` of a power of ``a`` onto it.

    Prefix-sum averages carry rounding noise, and a value that is exactly a
    threshold must not be selected by ``F > a**k``.
    """
    out = np.array(vals, dtype=float)
    pos = out > 0
    if pos.any():
        k = np.round(np.log(out[pos]) / math.log(a))
        p = float(a) ** k
        v = out[pos]
        out[pos] = np.where(np.abs(v / p - 1.0) <= rtol, p, v)
    return out


def _signs(grid: DyadicGrid, level: int) -> np.ndarray:
    """Per-axis offset in the child index map ``m' = 2m + s + e``."""
    sgn = 1 if level % 2 == 0 else -1
    return np.array([sgn if t != 0 else 0 for t in grid.shift], dtype=np.int64)


def parent_index(grid: DyadicGrid, level: int, index: np.ndarray) -> np.ndarray:
    """Index of the level ``level - 1`` parent of level-``level`` cubes."""
    return np.floor_divide(np.asarray(index) - _signs(grid, level - 1), 2)


def _corners(grid: DyadicGrid, level: int, idx: np.ndarray) -> np.ndarray:
    off = np.array(grid.offset(level))
    return idx.astype(np.float64) * 2.0**-level + off


@dataclass(frozen=True)
class SelectedCube:
    k: int
    cube: Cube
    value: float
    ancestor_max: float
    atom_lo: tuple[int, ...]
    mask: np.ndarray = field(repr=False, compare=False)

    @property
    def level(self) -> int:
        return self.cube.level

    @property
    def e_ratio(self) -> float:
        return float(self.mask.mean())

    @property
    def e_volume(self) -> float:
        return float(self.mask.sum()) * self.cube.volume / self.mask.size


@dataclass(frozen=True)
class _Tree:
    """All tree cubes with a positive functional, level by level."""

    levels: tuple[int, ...]
    index: tuple[np.ndarray, ...]
    value: tuple[np.ndarray, ...]
    ancestor_max: tuple[np.ndarray, ...]
    atom_lo: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class SparseFamily:
    grid: DyadicGrid
    a: float
    atom_level: int
    k_range: Optional[tuple[int, int]]
    cubes: dict = field(repr=False)
    tree: Optional[_Tree] = field(default=None, repr=False, compare=False)

    def __iter__(self):
        for k in sorted(self.cubes):
            yield from self.cubes[k]

    def __len__(self) -> int:
        return sum(len(v) for v in self.cubes.values())

    def level(self, k: int) -> list[SelectedCube]:
        return list(self.cubes.get(k, ()))

    @property
    def empty(self) -> bool:
        return len(self) == 0

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.name,
            "shift": [str(t) for t in self.grid.shift],
            "a": self.a,
            "atom_level": self.atom_level,
            "k_range": list(self.k_range) if self.k_range else None,
            "levels": {
                str(k): [
                    {
                        "level": c.level,
                        "index": list(c.cube.address.index),
                        "corner": list(c.cube.corner),
                        "side": c.cube.side,
                        "value": c.value,
                        "E_over_Q": c.e_ratio,
                    }
                    for c in self.cubes[k]
                ]
                for k in sorted(self.cubes)
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def _support_box(f: GridFunction, g: GridFunction):
    nz = (f.values != 0) | (g.values != 0)
    if not nz.any():
        return None
    lo, hi = [], []
    for ax in range(f.n):
        other = tuple(i for i in range(f.n) if i != ax)
        used = np.nonzero(nz.any(axis=other) if other else nz)[0]
        lo.append(-f.W + used[0] * f.h)
        hi.append(-f.W + (used[-1] + 1) * f.h)
    return np.array(lo), np.array(hi)


def _level_values(f, g, phi, psi, f_power, g_power, alpha, volume, grid, level, idx):
    side = 2.0**-level
    corners = _corners(grid, level, idx)
    fv = f if f_power == 1 else f.pow(f_power)
    gv = g if g_power == 1 else g.pow(g_power)
    nf = cube_norms(fv, phi, corners, side) ** (1.0 / f_power)
    keep = nf > 0
    out = np.zeros(len(idx))
    if keep.any():
        ng = cube_norms(gv, psi, corners[keep], side) ** (1.0 / g_power)
        out[keep] = nf[keep] * ng
    if volume:
        out *= side**alpha
    return out


def cz_select(
    f: GridFunction,
    g: GridFunction,
    phi: YoungFunction,
    psi: YoungFunction,
    a: float,
    grid: Optional[DyadicGrid] = None,
    alpha: float = 0.0,
    include_volume_factor: bool = False,
    *,
    f_power: float = 1.0,
    g_power: float = 1.0,
) -> SparseFamily:
    """Select maximal cubes of ``grid`` with ``F(Q) > a**k`` for every attainable ``k``.

    The walk starts from the coarsest level whose cubes are at least as large
    as the joint support box and stops at the mesh level ``L``.
    """
    if not a > 1:
        raise ConfigError(f"threshold base a must exceed 1, got {a}")
    if f.n != g.n or f.values.shape != g.values.shape or (f.L0, f.L) != (g.L0, g.L):
        raise ConfigError("f and g must live on the same mesh")
    if (f.values < 0).any() or (g.values < 0).any():
        raise ConfigError("selection needs nonnegative f and g")
    if f_power <= 0 or g_power <= 0:
        raise ConfigError("f_power and g_power must be positive")
    if grid is None:
        grid = DyadicGrid(f.n)
    if grid.n != f.n:
        raise ConfigError("grid dimension does not match the data")
    L = f.L
    box = _support_box(f, g)
    if box is None:
        return SparseFamily(grid, float(a), L, None, {}, None)
    lo, hi = box
    k0 = -math.ceil(math.log2(float((hi - lo).max()))) if (hi - lo).max() > 1 else 0
    k0 = min(k0, L)
    args = (f, g, phi, psi, f_power, g_power, alpha, include_volume_factor, grid)

    def values_at(level, idx):
        return _snap(_level_values(*args, level, idx), a)

    def roots(level):
        first = grid.index_of(level, lo)
        last = grid.index_of(level, hi - 1e-12 * f.h)
        return np.array(
            list(itertools.product(*[range(a_, b_ + 1) for a_, b_ in zip(first, last)])),
            dtype=np.int64,
        )

    # climb until the roots sit a full band below the support-scale peak, so
    # the top selected level has genuine maximal cubes
    peak = float(values_at(k0, roots(k0)).max())
    for _ in range(MAX_CLIMB):
        if peak <= 0 or float(values_at(k0, roots(k0)).max()) <= peak / a:
            break
        k0 -= 1
    idx = roots(k0)
    levels, index, value, anc, atom_lo = [], [], [], [], []
    cur_anc = np.zeros(len(idx))
    for level in range(k0, L + 1):
        vals = values_at(level, idx)
        keep = vals > 0
        idx, vals, cur_anc = idx[keep], vals[keep], cur_anc[keep]
        if len(idx) == 0:
            break
        levels.append(level)
        index.append(idx)
        value.append(vals)
        anc.append(cur_anc)
        if level == L:
            break
        e = np.array(list(itertools.product((0, 1), repeat=f.n)), dtype=np.int64)
        s = _signs(grid, level)
        idx_next = (2 * idx + s)[:, None, :] + e[None, :, :]
        cur_anc = np.repeat(np.maximum(cur_anc, vals), len(e))
        idx = idx_next.reshape(-1, f.n)
    # atom boxes: map each cube down to level L
    for i, level in enumerate(levels):
        lo_idx = index[i].copy()
        for lv in range(level, L):
            lo_idx = 2 * lo_idx + _signs(grid, lv)
        atom_lo.append(lo_idx)
    tree = _Tree(tuple(levels), tuple(index), tuple(value), tuple(anc), tuple(atom_lo))
    if not levels:
        return SparseFamily(grid, float(a), L, None, {}, tree)

    k_min = _k_at_least(a, float(value[0].max()))
    k_max = _k_below(a, max(float(v.max()) for v in value))
    if k_max < k_min:
        return SparseFamily(grid, float(a), L, None, {}, tree)

    chosen: dict[int, list[tuple[int, int]]] = {}
    for i, level in enumerate(levels):
        for row in range(len(index[i])):
            F = float(value[i][row])
            A = float(anc[i][row])
            k_lo = k_min if A <= 0 else max(k_min, _k_at_least(a, A))
            k_hi = _k_below(a, F)
            for k in range(k_lo, k_hi + 1):
                chosen.setdefault(k, []).append((i, row))

    cubes: dict[int, list[SelectedCube]] = {}
    for k in sorted(chosen):
        nxt = chosen.get(k + 1, [])
        entries = []
        for i, row in chosen[k]:
            level = levels[i]
            span = 2 ** (L - level)
            mask = np.ones((span,) * f.n, dtype=bool)
            base = atom_lo[i][row]
            for j, r2 in nxt:
                if levels[j] <= level:
                    continue
                sub = atom_lo[j][r2] - base
                sspan = 2 ** (L - levels[j])
                if (sub >= 0).all() and (sub + sspan <= span).all():
                    mask[tuple(slice(int(o), int(o) + sspan) for o in sub)] = False
            mask.setflags(write=False)
            entries.append(
                SelectedCube(
                    k=k,
                    cube=grid.cube(level, index[i][row]),
                    value=float(value[i][row]),
                    ancestor_max=float(anc[i][row]),
                    atom_lo=tuple(int(x) for x in base),
                    mask=mask,
                )
            )
        entries.sort(key=lambda c: (c.level, c.cube.address.index))
        cubes[k] = entries
    return SparseFamily(grid, float(a), L, (k_min, k_max), cubes, tree)


def check_invariants(family: SparseFamily) -> dict:
    """Violation counts for the structural properties of a sparse family.

    Keys: ``threshold`` (cube not above ``a**k``), ``maximality`` (an
    ancestor already exceeds ``a**k``), ``disjoint`` (same-level overlap),
    ``carved_disjoint`` (two carved sets share an atom), ``half`` (cube larger
    than twice its carved set), ``covering`` (selected union differs from the
    superlevel set of the dyadic maximal functional) and ``bands`` (a tree cube
    in band ``k >= k_min`` not inside exactly one level-``k`` cube).
    """
    out = dict.fromkeys(
        ("threshold", "maximality", "disjoint", "carved_disjoint", "half", "covering", "bands"), 0
    )
    tree = family.tree
    if family.empty or tree is None:
        return out
    a, L = family.a, family.atom_level
    root_lo = tree.atom_lo[0].min(axis=0)
    root_span = 2 ** (L - tree.levels[0])
    shape = tuple(int(x) for x in (tree.atom_lo[0].max(axis=0) - root_lo + root_span))

    def box(lo, level):
        o = np.asarray(lo) - root_lo
        s = 2 ** (L - level)
        return tuple(slice(int(x), int(x) + s) for x in o)

    def paint(los, level, vals, reduce):
        """Atom array holding ``vals`` on the boxes of same-level cubes."""
        span = 2 ** (L - level)
        rel = np.asarray(los) - root_lo
        offset = rel[0] % span
        coarse_idx = (rel - offset) // span + 1
        cshape = tuple(int(x) for x in (np.array(shape) - offset) // span + 2)
        coarse = np.zeros(cshape, dtype=np.asarray(vals).dtype)
        reduce.at(coarse, tuple(coarse_idx.T), vals)
        fine = coarse
        for ax in range(len(shape)):
            fine = np.repeat(fine, span, axis=ax)
        start = span - offset
        return fine[tuple(slice(int(a0), int(a0) + n0) for a0, n0 in zip(start, shape))]

    dmax = np.zeros(shape)
    for i, level in enumerate(tree.levels):
        if len(tree.value[i]) > PAINT_MIN:
            np.maximum(dmax, paint(tree.atom_lo[i], level, tree.value[i], np.maximum), out=dmax)
            continue
        for lo, v in zip(tree.atom_lo[i], tree.value[i]):
            sl = box(lo, level)
            np.maximum(dmax[sl], v, out=dmax[sl])

    carved = np.zeros(shape, dtype=np.int64)
    for k, cs in family.cubes.items():
        thr = _threshold(a, k)
        union = np.zeros(shape, dtype=np.int64)
        by_level: dict[int, list[SelectedCube]] = {}
        for c in cs:
            if not c.value > thr:
                out["threshold"] += 1
            if c.ancestor_max > thr:
                out["maximality"] += 1
            if not c.mask.size <= 2 * int(c.mask.sum()):
                out["half"] += 1
            by_level.setdefault(c.level, []).append(c)
            carved[box(c.atom_lo, c.level)] += c.mask
        for level, group in by_level.items():
            if len(group) > PAINT_MIN:
                los = np.array([c.atom_lo for c in group])
                union += paint(los, level, np.ones(len(group), dtype=np.int64), np.add)
            else:
                for c in group:
                    union[box(c.atom_lo, level)] += 1
        out["disjoint"] += int((union > 1).sum())
        out["covering"] += int(((union > 0) != (dmax > thr)).sum())
    out["carved_disjoint"] = int((carved > 1).sum())

    k_min, _ = family.k_range
    sel = {
        k: (np.array([c.atom_lo for c in cs]), np.array([c.mask.shape[0] for c in cs]))
        for k, cs in family.cubes.items()
    }
    for i, level in enumerate(tree.levels):
        bands = np.array([_k_below(a, float(v)) for v in tree.value[i]])
        span = 2 ** (L - level)
        for k in np.unique(bands[bands >= k_min]):
            lo = tree.atom_lo[i][bands == k]
            if int(k) not in sel:
                out["bands"] += len(lo)
                continue
            slo, sspan = sel[int(k)]
            o = lo[:, None, :] - slo[None, :, :]
            inside = ((o >= 0) & (o + span <= sspan[None, :, None])).all(axis=2)
            out["bands"] += int((inside.sum(axis=1) != 1).sum())
    return out


# -- sparse sums ------------------------------------------------------------

@dataclass(frozen=True)
class SparseTerm:
    """Factor ``||g^power||_{phi,Q}^exponent`` attached to every selected cube."""

    g: GridFunction
    phi: YoungFunction
    power: float = 1.0
    exponent: float = 1.0

    def evaluate(self, cubes: Sequence[Cube]) -> np.ndarray:
        """Raw norms ``||g^power||_{phi,Q}`` (before the root and exponent)."""
        out = np.empty(len(cubes))
        base = self.g if self.power == 1 else abs(self.g).pow(self.power)
        by_side: dict[float, list[int]] = {}
        for i, c in enumerate(cubes):
            by_side.setdefault(c.side, []).append(i)
        for side, rows in sorted(by_side.items()):
            corners = np.array([cubes[r].corner for r in rows])
            out[rows] = cube_norms(base, self.phi, corners, side)
        return out


def _term_values(term: SparseTerm, cubes: Sequence[Cube]) -> np.ndarray:
    vals = term.evaluate(cubes)
    if term.power != 1:
        vals = vals ** (1.0 / term.power)
    return vals ** term.exponent


def _llogl(k: float) -> YoungFunction:
    return Power(1) if k == 0 else LLogL(k)


def theorem_a_terms(f, g, u, cfg: ExponentConfig):
    """Volume exponent and factors of the q < 1 two-weight sparse form."""
    if not 0 < cfg.q < 1:
        raise ConfigError("the fractional-power sparse form needs 0 < q < 1")
    m, N, q = cfg.m, cfg.N, cfg.q
    uu = abs(u).pow(1.0 / (1.0 - q))
    terms = (
        SparseTerm(f, _llogl(m), 1.0, q),
        SparseTerm(g, _llogl(N - m), 1.0, q),
        SparseTerm(uu, _llogl(q * N / (1.0 - q)), 1.0, 1.0 - q),
    )
    return cfg.alpha * q / cfg.n + 1.0, terms


def theorem_b_terms(f, g, h, u, cfg: ExponentConfig):
    """Volume exponent and factors of the duality sparse form with ``h u^{1/q}``."""
    if cfg.q < 1:
        raise ConfigError("the duality sparse form needs q >= 1")
    m, N, r, s = cfg.m, cfg.N, cfg.r, cfg.s
    hu = abs(h) * abs(u).pow(1.0 / cfg.q)
    terms = (
        SparseTerm(f, _llogl(m * r), r, 1.0),
        SparseTerm(g, _llogl((N - m) * s), s, 1.0),
        SparseTerm(hu, _llogl(N), 1.0, 1.0),
    )
    return cfg.alpha / cfg.n + 1.0, terms


def sparse_sum(family: SparseFamily, volume_exponent: float, terms: Sequence[SparseTerm]) -> float:
    """``sum_{k,j} |Q_j^k|^volume_exponent * prod(terms)`` in a fixed cube order."""
    cubes = [c.cube for c in family]
    if not cubes:
        return 0.0
    n = cubes[0].n
    for t in terms:
        if t.g.n != n:
            raise ConfigError("term dimension does not match the family")
        if t.power <= 0:
            raise ConfigError("term power must be positive")
    prod = np.array([c.volume**volume_exponent for c in cubes])
    for t in terms:
        prod = prod * _term_values(t, cubes)
    return math.fsum(prod.tolist())


def subtree_weight_sum(
    top: Cube, alpha: float, q: float, *, explicit_depth: int = 6, tol: float = 1e-17
) -> float:
    """Normalized ``sum_{Q subset top} |Q|^{alpha q/n + 1} / |top|^{alpha q/n + 1}``.

    Shallow levels enumerate the dyadic children explicitly; deeper levels use
    the ``2**(n r)`` cube count.  The series is truncated once a level adds
    less than ``tol`` relative to the running sum.
    """
    if alpha * q <= 0:
        raise ConfigError("the subtree sum converges only for alpha*q > 0")
    n = top.n
    e = alpha * q / n + 1.0
    top_vol = top.exact_side() ** n
    parts: list[float] = []
    layer = [top]
    r = 0
    while True:
        if r <= explicit_depth and 2 ** (n * r) <= 1 << 14:
            term = math.fsum(float(c.exact_side() ** n / top_vol) ** e for c in layer)
            layer = [ch for c in layer for ch in children(c)]
        else:
            term = 2.0 ** (n * r) * (2.0 ** (-n * r)) ** e
        parts.append(term)
        if term < tol * math.fsum(parts):
            break
        r += 1
    return math.fsum(parts)


def brute_force_selection(f: GridFunction, g: GridFunction, a: float, grid: DyadicGrid, k: int,
                          levels: range) -> list[tuple[int, tuple[int, ...]]]:
    """Exhaustive oracle for the plain-average selection (``Phi = Psi = Power(1)``).

    Enumerates every cube of ``grid`` meeting the box for each level in
    ``levels``, computes averages exactly with fractions from the cell values,
    and keeps cubes above ``a**k`` none of whose ancestors (within
    ``levels``) are.
    """
    n = f.n
    W = Fraction(f.W)
    h = Fraction(1, 2**f.L)
    fv = [Fraction(float(x)) for x in f.values.reshape(-1)]
    gv = [Fraction(float(x)) for x in g.values.reshape(-1)]

    def avg(vals, cube):
        lo, s = cube.exact_corner(), cube.exact_side()
        tot = Fraction(0)
        ranges = []
        for ax in range(n):
            a0 = max(lo[ax], -W)
            a1 = min(lo[ax] + s, W)
            if a1 <= a0:
                return Fraction(0)
            i0 = math.floor((a0 + W) / h)
            i1 = math.ceil((a1 + W) / h)
            ranges.append([(i, min((i + 1) * h - W, a1) - max(i * h - W, a0)) for i in range(i0, i1)])
        for combo in itertools.product(*ranges):
            flat = 0
            wgt = Fraction(1)
            for i, w in combo:
                flat = flat * f.N + i
                wgt *= w
            tot += vals[flat] * wgt
        return tot / s**n

    thr = Fraction(a) ** k
    above = {}
    for level in levels:
        span = []
        for ax in range(n):
            i0 = grid.index_of(level, (-f.W,) * n)[ax] - 1
            i1 = grid.index_of(level, (f.W,) * n)[ax] + 1
            span.append(range(i0, i1 + 1))
        for idx in itertools.product(*span):
            c = grid.cube(level, idx)
            v = avg(fv, c) * avg(gv, c)
            if v > thr:
                above[(level, idx)] = c
    out = []
    for (level, idx), c in above.items():
        anc_above = any(
            lv < level and c2.contains(c) for (lv, _), c2 in above.items()
        )
        if not anc_above:
            out.append((level, idx))
    return sorted(out)
