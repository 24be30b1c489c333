"""Piecewise-constant functions on a truncated uniform mesh.

A :class:`GridFunction` lives on the box ``[-W, W)**n`` with ``W = 2**L0``,
split into cells of side ``h = 2**-L``; it is zero outside the box.  Cell
``i`` along an axis covers ``[-W + i*h, -W + (i+1)*h)``.  Because the
representative is piecewise constant, averages over arbitrary cubes are
exact: full cells come from prefix sums and boundary cells are weighted by
their overlap.
"""

from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .dyadic import Cube
from .errors import ConfigError

HEADER = struct.Struct("<3q")


def _prefix(values: np.ndarray) -> np.ndarray:
    """Zero-padded cumulative sums, accumulated in extended precision."""
    acc = values.astype(np.longdouble)
    for axis in range(values.ndim):
        acc = np.cumsum(acc, axis=axis)
    out = np.zeros(tuple(s + 1 for s in values.shape), dtype=np.longdouble)
    out[(slice(1, None),) * values.ndim] = acc
    return out.astype(np.float64)


class GridFunction:
    """Immutable piecewise-constant function with cached prefix sums."""

    __slots__ = ("n", "L0", "L", "values", "_prefix", "_strips")

    def __init__(self, values, L0: int, L: int):
        values = np.array(values, dtype=np.float64)
        n = values.ndim
        if n not in (1, 2):
            raise ValueError("only dimensions 1 and 2 are supported")
        N = 2 ** (L0 + L + 1)
        if values.shape != (N,) * n:
            raise ValueError(f"expected shape {(N,) * n}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("cell values must be finite")
        values.setflags(write=False)
        self.n, self.L0, self.L, self.values = n, int(L0), int(L), values
        self._prefix = None
        self._strips = None

    # -- geometry -------------------------------------------------------
    @property
    def W(self) -> float:
        return float(2.0**self.L0)

    @property
    def h(self) -> float:
        return float(2.0**-self.L)

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self):
        return self.values.shape

    @staticmethod
    def centers_1d(L0: int, L: int) -> np.ndarray:
        W, h = 2.0**L0, 2.0**-L
        N = 2 ** (L0 + L + 1)
        return -W + (np.arange(N) + 0.5) * h

    def centers(self) -> np.ndarray:
        """Cell centers, shape ``(N,)`` in 1D or ``(N, N, 2)`` in 2D."""
        c = self.centers_1d(self.L0, self.L)
        if self.n == 1:
            return c
        X, Y = np.meshgrid(c, c, indexing="ij")
        return np.stack([X, Y], axis=-1)

    def like(self, values) -> "GridFunction":
        return GridFunction(values, self.L0, self.L)

    @classmethod
    def zeros(cls, n: int, L0: int, L: int) -> "GridFunction":
        N = 2 ** (L0 + L + 1)
        return cls(np.zeros((N,) * n), L0, L)

    @classmethod
    def constant(cls, c: float, n: int, L0: int, L: int) -> "GridFunction":
        N = 2 ** (L0 + L + 1)
        return cls(np.full((N,) * n, float(c)), L0, L)

    @classmethod
    def sample(cls, fn: Callable, n: int, L0: int, L: int) -> "GridFunction":
        """Sample ``fn`` at cell centers; in 2D ``fn`` receives ``(x, y)`` arrays."""
        c = cls.centers_1d(L0, L)
        if n == 1:
            return cls(fn(c), L0, L)
        X, Y = np.meshgrid(c, c, indexing="ij")
        return cls(fn(X, Y), L0, L)

    def compatible(self, other: "GridFunction") -> bool:
        return (self.n, self.L0, self.L) == (other.n, other.L0, other.L)

    # -- arithmetic -------------------------------------------------------
    def _operand(self, other):
        if isinstance(other, GridFunction):
            if not self.compatible(other):
                raise ValueError("grid functions live on different meshes")
            return other.values
        return other

    def __add__(self, other):
        return self.like(self.values + self._operand(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.like(self.values - self._operand(other))

    def __rsub__(self, other):
        return self.like(self._operand(other) - self.values)

    def __mul__(self, other):
        return self.like(self.values * self._operand(other))

    __rmul__ = __mul__

    def __neg__(self):
        return self.like(-self.values)

    def __abs__(self):
        return self.like(np.abs(self.values))

    def pow(self, gamma: float) -> "GridFunction":
        """Pointwise power of the cell values (weights: must be positive)."""
        with np.errstate(divide="ignore"):
            out = np.power(self.values, gamma)
        return self.like(out)

    def __repr__(self):
        return f"GridFunction(n={self.n}, L0={self.L0}, L={self.L})"

    # -- integration ------------------------------------------------------
    @property
    def prefix(self) -> np.ndarray:
        if self._prefix is None:
            self._prefix = _prefix(self.values)
        return self._prefix

    def _strip_tables(self):
        if self._strips is None:
            v = self.values.astype(np.longdouble)
            rows = np.zeros((self.N, self.N + 1), dtype=np.longdouble)
            rows[:, 1:] = np.cumsum(v, axis=1)
            cols = np.zeros((self.N + 1, self.N), dtype=np.longdouble)
            cols[1:, :] = np.cumsum(v, axis=0)
            self._strips = (rows.astype(np.float64), cols.astype(np.float64))
        return self._strips

    def _locate(self, x):
        """Cell index and in-cell fraction for coordinates clamped to the box."""
        u = (np.clip(np.asarray(x, dtype=np.float64), -self.W, self.W) + self.W) / self.h
        i = np.minimum(np.floor(u).astype(np.int64), self.N)
        frac = np.where(i >= self.N, 0.0, u - i)
        return np.minimum(i, self.N), frac

    def antiderivative(self, *coords) -> np.ndarray:
        """Integral of the function over ``[-W, x1) x ... `` (vectorised)."""
        if self.n == 1:
            i, fx = self._locate(coords[0])
            S = self.prefix
            vi = self.values[np.minimum(i, self.N - 1)]
            return self.h * (S[i] + fx * vi)
        i, fx = self._locate(coords[0])
        j, fy = self._locate(coords[1])
        S = self.prefix
        rows, cols = self._strip_tables()
        ic, jc = np.minimum(i, self.N - 1), np.minimum(j, self.N - 1)
        corner = S[i, j]
        # strip of column i below row j, strip of row j left of column i
        col_strip = np.where(i < self.N, rows[ic, j], 0.0)
        row_strip = np.where(j < self.N, cols[i, jc], 0.0)
        cell = np.where((i < self.N) & (j < self.N), self.values[ic, jc], 0.0)
        return self.h**2 * (corner + fx * col_strip + fy * row_strip + fx * fy * cell)

    def integral_boxes(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Integrals over boxes ``[lo, hi)``; ``lo``, ``hi`` have shape ``(..., n)``."""
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        if self.n == 1:
            lo1 = lo[..., 0] if lo.ndim and lo.shape[-1:] == (1,) else lo
            hi1 = hi[..., 0] if hi.ndim and hi.shape[-1:] == (1,) else hi
            return self.antiderivative(hi1) - self.antiderivative(lo1)
        F = self.antiderivative
        a0, a1, b0, b1 = lo[..., 0], lo[..., 1], hi[..., 0], hi[..., 1]
        return F(b0, b1) - F(a0, b1) - F(b0, a1) + F(a0, a1)

    def average_many(self, corners: np.ndarray, sides: np.ndarray) -> np.ndarray:
        corners = np.asarray(corners, dtype=np.float64).reshape(-1, self.n)
        sides = np.asarray(sides, dtype=np.float64).reshape(-1)
        if np.any(sides <= 0):
            raise ValueError("zero-volume cube")
        ints = self.integral_boxes(corners, corners + sides[:, None])
        return ints / sides**self.n

    def integral(self) -> float:
        return float(self.prefix[(-1,) * self.n] * self.h**self.n)

    # -- aligned windows ----------------------------------------------------
    def window_index(self, cube: Cube):
        """Cell slices and overlap weights (fractions of each cell) for ``cube``.

        Returns ``(slices, weights)`` where ``weights`` has the shape of
        ``values[slices]`` and sums to ``|cube ∩ box| / h**n``.
        """
        per_axis = []
        for a in range(self.n):
            lo = max(cube.corner[a], -self.W)
            hi = min(cube.corner[a] + cube.side, self.W)
            if hi <= lo:
                return None, None
            u0 = (lo + self.W) / self.h
            u1 = (hi + self.W) / self.h
            i0 = int(math.floor(u0))
            i1 = min(int(math.ceil(u1)), self.N)
            idx = np.arange(i0, i1)
            w = np.minimum(idx + 1, u1) - np.maximum(idx, u0)
            per_axis.append((slice(i0, i1), np.clip(w, 0.0, 1.0)))
        slices = tuple(s for s, _ in per_axis)
        weights = per_axis[0][1]
        for _, w in per_axis[1:]:
            weights = np.multiply.outer(weights, w)
        return slices, weights

    # -- serialisation --------------------------------------------------------
    def to_bytes(self) -> bytes:
        return HEADER.pack(self.n, self.L0, self.L) + self.values.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "GridFunction":
        n, L0, L = HEADER.unpack_from(data, 0)
        N = 2 ** (L0 + L + 1)
        vals = np.frombuffer(data, dtype="<f8", offset=HEADER.size)
        if vals.size != N**n:
            raise ValueError("binary payload does not match header")
        return cls(vals.reshape((N,) * n), L0, L)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# n={self.n} L0={self.L0} L={self.L}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "value"])
        for idx, v in enumerate(self.values.reshape(-1)):
            w.writerow([idx, repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "GridFunction":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("#"):
            raise ValueError("CSV grid function needs a '# n= L0= L=' header line")
        meta = dict(tok.split("=") for tok in lines[0][1:].split())
        n, L0, L = int(meta["n"]), int(meta["L0"]), int(meta["L"])
        rows = list(csv.reader(lines[2:]))
        N = 2 ** (L0 + L + 1)
        vals = np.zeros(N**n)
        for idx, v in rows:
            vals[int(idx)] = float(v)
        return cls(vals.reshape((N,) * n), L0, L)


def average(f: GridFunction, q: Cube) -> float:
    """Exact average of the piecewise-constant ``f`` over ``q``."""
    if q.n != f.n:
        raise ValueError("cube dimension does not match function")
    if not q.side > 0:
        raise ValueError("zero-volume cube")
    # aligned cubes inside the box: sum the covered cells directly (prefix sums
    # leave ~1e-17 residue on zero data in 2D)
    lo = [(c + f.W) / f.h for c in q.corner]
    k = q.side / f.h
    if k == int(k) and all(x == int(x) and 0 <= x and x + k <= f.values.shape[0] for x in lo):
        block = f.values[tuple(slice(int(x), int(x + k)) for x in lo)]
        return float(np.mean(block))
    return float(f.average_many(np.array([q.corner]), np.array([q.side]))[0])


def lp_norm(f: GridFunction, p: float, weight=None) -> float:
    """``(sum |f|**p * w * h**n)**(1/p)``; ``weight`` may be any weight object."""
    if not p > 0:
        raise ConfigError(f"L^p norm needs p > 0, got {p}")
    vals = np.abs(f.values) ** p
    if weight is not None:
        w = weight_values(weight)
        vals = np.where(vals > 0, vals * w, 0.0)
    return float(np.sum(vals) * f.h**f.n) ** (1.0 / p)


def weight_values(weight) -> np.ndarray:
    """Cell values of a weight (``GridFunction`` or an object with ``pow``)."""
    if isinstance(weight, GridFunction):
        return weight.values
    return weight.pow(1.0).values


# ---------------------------------------------------------------------------
# exponents


def conjugate(p: float) -> float:
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


@dataclass(frozen=True)
class ExponentConfig:
    """Exponents of one weighted inequality.

    ``p`` is derived from ``1/p = 1/p1 + 1/p2``.  ``N`` and ``m`` describe the
    commutator (arity and number of first-slot symbols).
    """

    n: int = 1
    alpha: float = 0.0
    p1: float = 2.0
    p2: float = 2.0
    q: float = 1.0
    r: Optional[float] = None
    s: Optional[float] = None
    N: int = 0
    m: int = 0
    delta: float = 0.5
    sobolev: bool = False

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ConfigError("n must be 1 or 2")
        if not 0 <= self.alpha < self.n:
            raise ConfigError(f"requires 0 <= alpha < n, got alpha={self.alpha}")
        if not (self.p1 > 1 and self.p2 > 1):
            raise ConfigError("requires p1 > 1 and p2 > 1")
        if not self.q > 0:
            raise ConfigError("requires q > 0")
        if (self.r is None) != (self.s is None):
            raise ConfigError("r and s must be given together")
        if self.r is not None and abs(1 / self.r + 1 / self.s - 1) > 1e-12:
            raise ConfigError(f"(r, s) must be a Hölder pair, got 1/r + 1/s = {1/self.r + 1/self.s}")
        if not 0 <= self.m <= self.N:
            raise ConfigError("requires 0 <= m <= N")
        if self.sobolev and abs(1 / self.q - (1 / self.p - self.alpha / self.n)) > 1e-12:
            raise ConfigError("Sobolev scaling requires 1/q = 1/p - alpha/n")

    @property
    def p(self) -> float:
        return 1.0 / (1.0 / self.p1 + 1.0 / self.p2)

    @property
    def scale_exponent(self) -> float:
        """The ``|Q|`` power ``alpha/n + 1/q - 1/p`` in the bump conditions."""
        return self.alpha / self.n + 1.0 / self.q - 1.0 / self.p

    def require_holder(self, strict: bool, theorem: str):
        if self.r is None:
            raise ConfigError(f"requires a Hölder pair (r, s) ({theorem})")
        if strict:
            if not self.p1 > self.r:
                raise ConfigError(f"requires p1 > r ({theorem})")
            if not self.p2 > self.s:
                raise ConfigError(f"requires p2 > s ({theorem})")
        else:
            if not self.p1 >= self.r:
                raise ConfigError(f"requires p1 >= r ({theorem})")
            if not self.p2 >= self.s:
                raise ConfigError(f"requires p2 >= s ({theorem})")

    def to_dict(self) -> dict:
        return {
            "n": self.n, "alpha": self.alpha, "p1": self.p1, "p2": self.p2,
            "q": self.q, "r": self.r, "s": self.s, "N": self.N, "m": self.m,
            "delta": self.delta, "sobolev": self.sobolev,
        }


# ---------------------------------------------------------------------------
# test families

FAMILY_KINDS = (
    "indicator", "tent", "truncated-power", "log-weight", "random-nonnegative",
    "thmG-necessity",
)


def _box_mask(centers: np.ndarray, corner, side, n) -> np.ndarray:
    if n == 1:
        return (centers >= corner[0]) & (centers < corner[0] + side)
    return (
        (centers[..., 0] >= corner[0]) & (centers[..., 0] < corner[0] + side)
        & (centers[..., 1] >= corner[1]) & (centers[..., 1] < corner[1] + side)
    )


def _radius(centers: np.ndarray, n: int) -> np.ndarray:
    return np.abs(centers) if n == 1 else np.linalg.norm(centers, axis=-1)


def make_test_family(kind: str, params: Optional[dict] = None, seed: int = 0, *,
                     n: int = 1, L0: int = 2, L: int = 10) -> list[GridFunction]:
    """Deterministic nonnegative, bounded, compactly supported test functions.

    ``params`` by kind:

    * ``indicator``: ``cube=(corner, side)`` or ``count`` random cubes.
    * ``tent``: ``center``, ``radius`` (or ``count`` random tents).
    * ``truncated-power``: exponent ``a``, support radius ``R`` (default 1);
      values at cells near 0 capped at ``h**a`` when ``a < 0``.
    * ``log-weight``: ``|log|x||`` on ``|x| < R``, capped at ``|log h|``.
    * ``random-nonnegative``: ``count`` functions, constant on blocks of
      ``2**-block`` inside the support cube ``cube``; block heights are
      uniform on ``[0, 1)``, or log-uniform over ``decades`` decades, and a
      ``zero_fraction`` of blocks is emptied.
    * ``thmG-necessity``: ``weight`` (object with ``pow``), ``exponent``
      ``e`` and cube ``cube``; returns ``weight**(-e) * chi_Q``.
    """
    params = dict(params or {})
    rng = np.random.default_rng(seed)
    proto = GridFunction.zeros(n, L0, L)
    c = proto.centers()
    h = proto.h
    count = int(params.get("count", 1))

    def cube_param(default_side=1.0):
        cube = params.get("cube")
        if cube is None:
            return (0.0,) * n, default_side
        corner, side = cube
        corner = tuple(corner) if isinstance(corner, (list, tuple)) else (float(corner),) * n
        return corner, float(side)

    if kind == "indicator":
        if "cube" in params or count == 1:
            corner, side = cube_param()
            return [proto.like(_box_mask(c, corner, side, n).astype(float))]
        out = []
        for _ in range(count):
            side = 2.0 ** rng.integers(-3, 1)
            corner = tuple(rng.uniform(-1.0, 1.0 - side, size=n))
            out.append(proto.like(_box_mask(c, corner, side, n).astype(float)))
        return out
    if kind == "tent":
        specs = []
        if count == 1:
            specs.append((np.asarray(params.get("center", (0.0,) * n), float),
                          float(params.get("radius", 1.0))))
        else:
            for _ in range(count):
                specs.append((rng.uniform(-1.0, 1.0, size=n), float(rng.uniform(0.25, 1.0))))
        out = []
        for center, radius in specs:
            d = _radius(c - center, n) if n == 2 else np.abs(c - center[0])
            out.append(proto.like(np.clip(1.0 - d / radius, 0.0, None)))
        return out
    if kind == "truncated-power":
        a = float(params["a"])
        R = float(params.get("R", 1.0))
        r = _radius(c, n)
        with np.errstate(divide="ignore"):
            vals = np.power(r, a)
        if a < 0:
            vals = np.minimum(vals, h**a)
        return [proto.like(np.where(r < R, vals, 0.0))]
    if kind == "log-weight":
        R = float(params.get("R", 1.0))
        r = _radius(c, n)
        vals = np.minimum(np.abs(np.log(r)), abs(math.log(h)))
        return [proto.like(np.where(r < R, vals, 0.0))]
    if kind == "random-nonnegative":
        corner, side = cube_param(default_side=2.0)
        if "cube" not in params:
            corner = (-1.0,) * n
        block = float(2.0 ** -int(params.get("block", 3)))
        mask = _box_mask(c, corner, side, n)
        idx = np.floor((c - np.asarray(corner)) / block).astype(int) if n == 2 else \
            np.floor((c - corner[0]) / block).astype(int)
        nb = int(round(side / block))
        out = []
        decades = float(params.get("decades", 0.0))
        zero_fraction = float(params.get("zero_fraction", 0.0))
        for _ in range(count):
            table = rng.uniform(0.0, 1.0, size=(nb,) * n)
            if decades > 0:
                table = 10.0 ** (-decades * table)
            if zero_fraction > 0:
                table = np.where(rng.uniform(size=table.shape) < zero_fraction, 0.0, table)
            if n == 1:
                vals = table[np.clip(idx, 0, nb - 1)]
            else:
                ii = np.clip(idx[..., 0], 0, nb - 1)
                jj = np.clip(idx[..., 1], 0, nb - 1)
                vals = table[ii, jj]
            out.append(proto.like(np.where(mask, vals, 0.0)))
        return out
    if kind == "thmG-necessity":
        weight = params["weight"]
        e = float(params["exponent"])
        corner, side = cube_param()
        wv = weight_values(weight)
        if wv.shape != proto.shape:
            raise ValueError("weight lives on a different mesh")
        mask = _box_mask(c, corner, side, n)
        return [proto.like(np.where(mask, wv ** (-e), 0.0))]
    raise ConfigError(f"unknown test family kind {kind!r}; expected one of {FAMILY_KINDS}")


# ---------------------------------------------------------------------------
# power weights with exact cell averages

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def _sec_integral(c: float) -> float:
    """``int_0^{pi/4} sec(theta)**c dtheta``."""
    from scipy.integrate import quad

    val, _ = quad(lambda th: math.cos(th) ** (-c), 0.0, math.pi / 4, epsabs=0, epsrel=1e-13)
    return val


def _power_cells_1d(b: float, L0: int, L: int) -> np.ndarray:
    W, h = 2.0**L0, 2.0**-L
    N = 2 ** (L0 + L + 1)
    edges = -W + np.arange(N + 1) * h
    lo, hi = edges[:-1], edges[1:]
    A = np.minimum(np.abs(lo), np.abs(hi))
    out = np.empty(N)
    inner = A > 0
    Ai = A[inner]
    if b == -1:
        out[inner] = np.log1p(h / Ai) / h
    else:
        # A**(b+1) * ((1 + h/A)**(b+1) - 1) / ((b+1) h), without cancellation
        out[inner] = Ai ** (b + 1) * np.expm1((b + 1) * np.log1p(h / Ai)) / ((b + 1) * h)
    if b > -1:
        out[~inner] = h**b / (b + 1)
    else:
        out[~inner] = (0.5 * h) ** b
    return out


def _power_cells_2d(b: float, L0: int, L: int) -> np.ndarray:
    W, h = 2.0**L0, 2.0**-L
    N = 2 ** (L0 + L + 1)
    lo = -W + np.arange(N) * h
    # tensor Gauss-Legendre on every cell
    x = lo[:, None] + 0.5 * h * (_GL_NODES[None, :] + 1.0)
    wq = 0.5 * _GL_WEIGHTS
    out = np.empty((N, N))
    x2 = x**2
    for i in range(N):
        r2 = x2[i][:, None, None] + x2[:, None, :]
        vals = r2 ** (0.5 * b)
        out[i] = np.einsum("a,jab,b->j", wq, vals, wq)
    # cells within two cells of the origin: 4x4 sub-cells of Gauss-Legendre
    c0 = N // 2
    sub = 4
    hs = h / sub
    for i in range(c0 - 3, c0 + 3):
        for j in range(c0 - 3, c0 + 3):
            if i in (c0 - 1, c0) and j in (c0 - 1, c0):
                continue
            xs = (lo[i] + hs * np.arange(sub))[:, None] + 0.5 * hs * (_GL_NODES + 1.0)
            ys = (lo[j] + hs * np.arange(sub))[:, None] + 0.5 * hs * (_GL_NODES + 1.0)
            xs, ys = xs.reshape(-1), ys.reshape(-1)
            wx = np.tile(wq, sub) / sub
            r2 = xs[:, None] ** 2 + ys[None, :] ** 2
            out[i, j] = wx @ (r2 ** (0.5 * b)) @ wx
    # the four cells with a corner at the origin: polar closed form
    if b > -2:
        corner = 2.0 * h**b / (b + 2.0) * _sec_integral(b + 2.0)
    else:
        corner = (h / math.sqrt(2.0)) ** b
    out[c0 - 1:c0 + 1, c0 - 1:c0 + 1] = corner
    return out


_POWER_CACHE: dict = {}


@dataclass(frozen=True)
class PowerWeight:
    """The weight ``|x|**a`` on the mesh ``(n, L0, L)``.

    ``pow(gamma)`` returns the exact cell averages of ``|x|**(a*gamma)`` as a
    :class:`GridFunction`.  When the power is not locally integrable the four
    (or two) cells touching the origin get the value at their center instead.
    """

    a: float
    n: int = 1
    L0: int = 2
    L: int = 10

    def pow(self, gamma: float = 1.0) -> GridFunction:
        b = float(self.a) * float(gamma)
        key = (b, self.n, self.L0, self.L)
        if key not in _POWER_CACHE:
            if b == 0:
                vals = np.ones((2 ** (self.L0 + self.L + 1),) * self.n)
            elif self.n == 1:
                vals = _power_cells_1d(b, self.L0, self.L)
            else:
                vals = _power_cells_2d(b, self.L0, self.L)
            if len(_POWER_CACHE) > 256:
                _POWER_CACHE.clear()
            _POWER_CACHE[key] = GridFunction(vals, self.L0, self.L)
        return _POWER_CACHE[key]

    @property
    def values(self) -> np.ndarray:
        return self.pow(1.0).values

    def on(self, L0: int, L: int) -> "PowerWeight":
        return PowerWeight(self.a, self.n, L0, L)

    def describe(self) -> str:
        return f"|x|^{self.a:g}"


def weight_power(w, gamma: float) -> GridFunction:
    """``w**gamma`` as cell values; exact cell averages for :class:`PowerWeight`."""
    if isinstance(w, PowerWeight):
        return w.pow(gamma)
    if np.any(w.values <= 0):
        raise ValueError("weights must be strictly positive on the domain box")
    return w.pow(gamma)


def weight_product(*factors) -> GridFunction:
    """``prod w_i**gamma_i`` for ``(w_i, gamma_i)`` pairs.

    Power weights on a common mesh combine symbolically, so the product keeps
    exact cell averages.
    """
    if factors and all(isinstance(w, PowerWeight) for w, _ in factors):
        w0 = factors[0][0]
        if all((w.n, w.L0, w.L) == (w0.n, w0.L0, w0.L) for w, _ in factors):
            a = sum(w.a * g for w, g in factors)
            return PowerWeight(a, w0.n, w0.L0, w0.L).pow(1.0)
    out = None
    for w, g in factors:
        term = weight_power(w, g)
        out = term if out is None else out * term
    return out
