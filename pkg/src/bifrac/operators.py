"""Bilinear fractional integrals, their commutators and the maximal operators.

All bilinear sums use the same discretisation: the output is sampled at cell
centers ``x_i`` and the ``y`` integral is split into cells of side ``h``
centered at ``j h``, so that ``x_i -+ y_c`` are again cell centers.  On each
``y`` cell the kernel ``|y|**(alpha - n)`` is integrated exactly (closed form
in 1D, polar closed form at the origin and Gauss-Legendre elsewhere in 2D)
while ``f`` and ``g`` are looked up at the displaced centers.  Values that
would need ``f`` or ``g`` outside the box are zero.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import dblquad, quad

from .dyadic import DyadicGrid
from .errors import ConfigError, ResourceLimitError
from .signal import GridFunction
from .weights import Avg, CubeScan, Orlicz, cube_norms, scan_maximal
from .young import Power, YoungFunction

MAX_COMMUTATOR_ARITY = 4


def _check_alpha(alpha: float, n: int, allow_zero: bool = False):
    ok = (0 <= alpha < n) if allow_zero else (0 < alpha < n)
    if not ok:
        bound = "0 <= alpha < n" if allow_zero else "0 < alpha < n"
        raise ConfigError(f"requires {bound}, got alpha={alpha} with n={n}")


def _same_mesh(*fs: GridFunction):
    for f in fs[1:]:
        if not fs[0].compatible(f):
            raise ValueError("inputs live on different meshes")


def _support(values: np.ndarray):
    """Per-axis inclusive index bounds of the nonzero cells, or None."""
    nz = np.nonzero(values)
    if len(nz[0]) == 0:
        return None
    return [(int(a.min()), int(a.max())) for a in nz]


# ---------------------------------------------------------------------------
# kernel tables


@lru_cache(maxsize=64)
def _kernel_1d(alpha: float, jmax: int) -> np.ndarray:
    """``int |y|**(alpha-1)`` over ``[(j-1/2), (j+1/2)]`` for ``j = 0..jmax`` (unit cells)."""
    K = np.empty(jmax + 1)
    K[0] = 2.0 * 0.5**alpha / alpha
    a = np.arange(1, jmax + 1) - 0.5
    K[1:] = a**alpha * np.expm1(alpha * np.log1p(1.0 / a)) / alpha
    return K


_GL8 = np.polynomial.legendre.leggauss(8)


@lru_cache(maxsize=32)
def _kernel_2d(alpha: float, jmax: int) -> np.ndarray:
    """``int |y|**(alpha-2)`` over unit cells centered at ``(a, b)``, ``0 <= a, b <= jmax``."""
    e = alpha - 2.0
    nodes, wts = _GL8
    idx = np.arange(jmax + 1, dtype=np.float64)
    # tensor Gauss-Legendre on every cell
    pts = idx[:, None] + 0.5 * nodes[None, :]  # (J, 8)
    w = 0.5 * wts
    T = np.empty((jmax + 1, jmax + 1))
    for a in range(jmax + 1):
        r2 = pts[a][:, None, None] ** 2 + pts[None, :, :] ** 2  # (8, J, 8)
        T[a] = np.einsum("i,ijk,k->j", w, r2 ** (0.5 * e), w)
    # near cells: adaptive quadrature
    near = min(jmax, 3)
    for a in range(near + 1):
        for b in range(a, near + 1):
            if a == 0 and b == 0:
                continue
            val, _ = dblquad(lambda y, x: (x * x + y * y) ** (0.5 * e), a - 0.5, a + 0.5,
                             b - 0.5, b + 0.5, epsabs=0, epsrel=1e-12)
            T[a, b] = T[b, a] = val
    sec, _ = quad(lambda th: math.cos(th) ** (-alpha), 0.0, math.pi / 4, epsabs=0, epsrel=1e-13)
    T[0, 0] = 8.0 * 0.5**alpha / alpha * sec
    return 0.5 * (T + T.T)


def kernel_weights(alpha: float, n: int, h: float, jmax: int) -> np.ndarray:
    """Exact cell integrals of ``|y|**(alpha-n)`` scaled to cell side ``h``."""
    if n == 1:
        return _kernel_1d(float(alpha), int(jmax)) * h**alpha
    return _kernel_2d(float(alpha), int(jmax)) * h**alpha


# ---------------------------------------------------------------------------
# the shared bilinear sum


def _shift_ranges(sf, sg, N):
    """Admissible shifts ``j`` and output ranges per axis."""
    per_axis = []
    for (af, bf), (ag, bg) in zip(sf, sg):
        jlo = math.ceil((ag - bf) / 2)
        jhi = math.floor((bg - af) / 2)
        per_axis.append((af, bf, ag, bg, jlo, jhi))
    return per_axis


def _bilinear_sum(fv: np.ndarray, gv: np.ndarray, weight_of_j, extra=None) -> np.ndarray:
    """``out[i] = sum_j weight_of_j(j) * f[i-j] * g[i+j] * extra(j, i-slices)``.

    ``extra(j, si, sm, sp)`` returns an array multiplying the slice product,
    where ``si``, ``sm``, ``sp`` index ``i``, ``i - j`` and ``i + j``.
    """
    N = fv.shape[0]
    out = np.zeros(fv.shape)
    sf, sg = _support(fv), _support(gv)
    if sf is None or sg is None:
        return out
    axes = _shift_ranges(sf, sg, N)
    for j in itertools.product(*[range(a[4], a[5] + 1) for a in axes]):
        si, sm, sp = [], [], []
        empty = False
        for jj, (af, bf, ag, bg, _, _) in zip(j, axes):
            ilo = max(af + jj, ag - jj, 0)
            ihi = min(bf + jj, bg - jj, N - 1)
            if ilo > ihi:
                empty = True
                break
            si.append(slice(ilo, ihi + 1))
            sm.append(slice(ilo - jj, ihi - jj + 1))
            sp.append(slice(ilo + jj, ihi + jj + 1))
        if empty:
            continue
        si, sm, sp = tuple(si), tuple(sm), tuple(sp)
        term = fv[sm] * gv[sp]
        if extra is not None:
            term = term * extra(j, si, sm, sp)
        out[si] += weight_of_j(j) * term
    return out


def _kernel_lookup(alpha, n, h, N):
    K = kernel_weights(alpha, n, h, N)
    if n == 1:
        return lambda j: K[abs(j[0])]
    return lambda j: K[abs(j[0]), abs(j[1])]


def bi_alpha(f: GridFunction, g: GridFunction, alpha: float) -> GridFunction:
    """``BI_alpha(f, g)(x) = int f(x - y) g(x + y) |y|**(alpha - n) dy`` at cell centers."""
    _same_mesh(f, g)
    _check_alpha(alpha, f.n)
    w = _kernel_lookup(alpha, f.n, f.h, f.N)
    return f.like(_bilinear_sum(f.values, g.values, w))


def _edge_integral(alpha, y):
    """Antiderivative of ``|y|**(alpha-1)``: ``sign(y) |y|**alpha / alpha``."""
    return np.sign(y) * np.abs(y) ** alpha / alpha


def bi_alpha_at(f: GridFunction, g: GridFunction, alpha: float, x: float) -> float:
    """Exact ``BI_alpha(f, g)(x)`` at an arbitrary point (1D, piecewise-constant inputs)."""
    _same_mesh(f, g)
    if f.n != 1:
        raise ValueError("pointwise evaluation is implemented for n = 1")
    _check_alpha(alpha, 1)
    edges = -f.W + np.arange(f.N + 1) * f.h
    bps = np.unique(np.concatenate([x - edges, edges - x, [0.0]]))
    y0, y1 = bps[:-1], bps[1:]
    ym = 0.5 * (y0 + y1)

    def lookup(fn, pts):
        i = np.floor((pts + fn.W) / fn.h).astype(np.int64)
        ok = (i >= 0) & (i < fn.N)
        return np.where(ok, fn.values[np.clip(i, 0, fn.N - 1)], 0.0)

    prod = lookup(f, x - ym) * lookup(g, x + ym)
    seg = _edge_integral(alpha, y1) - _edge_integral(alpha, y0)
    return float(np.sum(prod * seg))


# ---------------------------------------------------------------------------
# commutators


@dataclass(frozen=True)
class CommutatorSpec:
    """Symbols ``b_1..b_N`` with slots ``beta_i`` in ``{1, 2}``."""

    symbols: tuple
    slots: tuple

    def __init__(self, symbols: Sequence[GridFunction], slots: Sequence[int]):
        symbols, slots = tuple(symbols), tuple(int(s) for s in slots)
        if len(symbols) != len(slots):
            raise ConfigError("each commutator symbol needs exactly one slot")
        if any(s not in (1, 2) for s in slots):
            raise ConfigError("commutator slots must be 1 or 2")
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "slots", slots)

    @property
    def N(self) -> int:
        return len(self.slots)

    @property
    def m(self) -> int:
        return sum(1 for s in self.slots if s == 1)

    def canonical(self) -> "CommutatorSpec":
        """Stable reordering with all first-slot symbols first."""
        order = sorted(range(self.N), key=lambda i: self.slots[i])
        return CommutatorSpec([self.symbols[i] for i in order], [self.slots[i] for i in order])

    def permuted(self, perm: Sequence[int]) -> "CommutatorSpec":
        return CommutatorSpec([self.symbols[i] for i in perm], [self.slots[i] for i in perm])


def commutator_direct(spec: CommutatorSpec, f: GridFunction, g: GridFunction, alpha: float) -> GridFunction:
    """Iterated commutator by the recursive definition (``2**N`` calls of BI_alpha)."""
    if spec.N > MAX_COMMUTATOR_ARITY:
        raise ResourceLimitError(f"commutator arity N={spec.N} exceeds the limit {MAX_COMMUTATOR_ARITY}")
    _same_mesh(f, g, *spec.symbols)
    _check_alpha(alpha, f.n)

    def op(level):
        if level == 0:
            return lambda a, c: bi_alpha(a, c, alpha)
        inner = op(level - 1)
        b, slot = spec.symbols[level - 1], spec.slots[level - 1]
        if slot == 1:
            return lambda a, c: b * inner(a, c) - inner(b * a, c)
        return lambda a, c: b * inner(a, c) - inner(a, b * c)

    return op(spec.N)(f, g)


def commutator_kernel(spec: CommutatorSpec, f: GridFunction, g: GridFunction, alpha: float) -> GridFunction:
    """Iterated commutator from the product-kernel formula, one pass over ``y``."""
    _same_mesh(f, g, *spec.symbols)
    _check_alpha(alpha, f.n)
    first = [b.values for b, s in zip(spec.symbols, spec.slots) if s == 1]
    second = [b.values for b, s in zip(spec.symbols, spec.slots) if s == 2]

    def extra(j, si, sm, sp):
        w = 1.0
        for b in first:
            w = w * (b[si] - b[sm])
        for b in second:
            w = w * (b[si] - b[sp])
        return w

    w = _kernel_lookup(alpha, f.n, f.h, f.N)
    return f.like(_bilinear_sum(f.values, g.values, w, extra if spec.N else None))


# ---------------------------------------------------------------------------
# maximal operators


def bm_radii(f: GridFunction) -> list[int]:
    """Half-widths ``m`` (in cells) of the centered windows used by :func:`bm`."""
    ms, m = [0], 1
    while (2 * m + 1) * f.h <= 4 * f.W:
        ms.append(m)
        m *= 2
    return ms


def bm(f: GridFunction, g: GridFunction) -> GridFunction:
    """``sup_r (2r)**-n int_{[-r, r]^n} |f(x-y) g(x+y)| dy`` over ``r = (m + 1/2) h``."""
    _same_mesh(f, g)
    fv, gv = np.abs(f.values), np.abs(g.values)
    N, n = f.N, f.n
    out = np.zeros(fv.shape)
    acc = np.zeros(fv.shape)
    sf, sg = _support(fv), _support(gv)
    if sf is None or sg is None:
        return f.like(out)
    radii = bm_radii(f)
    done = -1
    for m in radii:
        # add the shell done < |j|_inf <= m
        for j in itertools.product(range(-m, m + 1), repeat=n):
            if max(abs(c) for c in j) <= done:
                continue
            si, sm, sp = [], [], []
            ok = True
            for jj, (af, bf), (ag, bg) in zip(j, sf, sg):
                ilo = max(af + jj, ag - jj, 0)
                ihi = min(bf + jj, bg - jj, N - 1)
                if ilo > ihi:
                    ok = False
                    break
                si.append(slice(ilo, ihi + 1))
                sm.append(slice(ilo - jj, ihi - jj + 1))
                sp.append(slice(ilo + jj, ihi + jj + 1))
            if ok:
                acc[tuple(si)] += fv[tuple(sm)] * gv[tuple(sp)]
        done = m
        np.maximum(out, acc / (2 * m + 1) ** n, out=out)
    return f.like(out)


def _factor(f: GridFunction, phi: YoungFunction):
    if isinstance(phi, Power):
        return Avg(abs(f).pow(phi.p), 1.0 / phi.p)
    return Orlicz(abs(f), phi)


def default_scan(f: GridFunction) -> CubeScan:
    return CubeScan(f.n, f.L0, f.L, odd=True)


def m_orlicz_alpha(f: GridFunction, g: GridFunction, phi: YoungFunction, psi: YoungFunction,
                   alpha: float, grid: Optional[DyadicGrid] = None,
                   scan: Optional[CubeScan] = None) -> GridFunction:
    """``sup_{Q containing x} |Q|**(alpha/n) ||f||_{phi,Q} ||g||_{psi,Q}`` at cell centers."""
    _same_mesh(f, g)
    _check_alpha(alpha, f.n, allow_zero=True)
    if grid is not None:
        return _dyadic_maximal([(f, phi), (g, psi)], alpha, grid)
    scan = scan or default_scan(f)
    return scan_maximal([_factor(f, phi), _factor(g, psi)], alpha / f.n, scan)


def m_orlicz(f: GridFunction, phi: YoungFunction, grid: Optional[DyadicGrid] = None,
             scan: Optional[CubeScan] = None) -> GridFunction:
    """``M_Phi f(x) = sup_{Q containing x} ||f||_{Phi,Q}``."""
    if grid is not None:
        return _dyadic_maximal([(f, phi)], 0.0, grid)
    scan = scan or default_scan(f)
    return scan_maximal([_factor(f, phi)], 0.0, scan)


def dyadic_levels(f: GridFunction) -> range:
    """Grid levels used by the dyadic maximal operators: side ``h`` up to ``16 W``."""
    return range(-(f.L0 + 4), f.L + 1)


def _dyadic_maximal(pairs, alpha: float, grid: DyadicGrid) -> GridFunction:
    f0 = pairs[0][0]
    n, N = f0.n, f0.N
    if grid.n != n:
        raise ValueError("grid dimension does not match inputs")
    centers = f0.centers().reshape(-1, n)
    out = np.zeros(len(centers))
    for k in dyadic_levels(f0):
        side = 2.0**-k
        off = np.asarray(grid.offset(k))
        idx = np.floor((centers - off) / side).astype(np.int64)
        uniq, inv = np.unique(idx, axis=0, return_inverse=True)
        corners = uniq * side + off
        vals = np.full(len(uniq), side ** alpha)
        for f, phi in pairs:
            vals = vals * cube_norms(f, phi, corners, side)
        np.maximum(out, vals[inv.reshape(-1)], out=out)
    return f0.like(out.reshape((N,) * n))
