"""Weight classes, bump conditions, BMO and John-Nirenberg over a cube scan.

Every "sup over cubes" is a max over a :class:`CubeScan`: cubes with corners
on the cell mesh and ``2**j`` cells per side, plus optional seeded random
cubes off the mesh.  A condition is described as a product of *factors*
(averages, Orlicz norms, cell extremes, oscillations), each raised to a
power, times ``|Q|**vol_exp``; :func:`scan_functional` evaluates the product
on every scan cube with vectorised numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from .dyadic import Cube
from .errors import ConfigError, NoReverseHolder
from .signal import ExponentConfig, GridFunction, PowerWeight, conjugate, weight_power, weight_product
from .young import ExpL, LLogL, LogBump, Power, YoungFunction, orlicz_norm_batch

# ---------------------------------------------------------------------------
# the scan


@dataclass(frozen=True)
class CubeScan:
    """Finite family of cubes standing in for "all cubes".

    ``sizes`` are side lengths in cells; by default every power of two from
    one cell to the whole box.  Corners run over the mesh with stride 1 for
    prefix-sum functionals; functionals that need the whole window (Orlicz
    norms, oscillations) use stride ``max(1, k // density)``.  Cubes are kept
    inside the domain box.  ``odd=True`` adds the ``2m + 1``-cell sides that
    centered windows use.
    """

    n: int
    L0: int
    L: int
    sizes: Optional[tuple[int, ...]] = None
    density: Optional[int] = None
    n_random: int = 0
    seed: int = 0
    odd: bool = False

    def __post_init__(self):
        if self.sizes is not None:
            sizes = tuple(sorted({int(k) for k in self.sizes}))
            if not sizes or sizes[0] < 1 or sizes[-1] > self.N:
                raise ConfigError(f"scan sizes must lie in [1, {self.N}] cells")
            object.__setattr__(self, "sizes", sizes)

    @classmethod
    def for_function(cls, f, **kw) -> "CubeScan":
        return cls(f.n, f.L0, f.L, **kw)

    @property
    def N(self) -> int:
        return 2 ** (self.L0 + self.L + 1)

    @property
    def h(self) -> float:
        return 2.0**-self.L

    @property
    def W(self) -> float:
        return 2.0**self.L0

    def cell_sizes(self) -> tuple[int, ...]:
        if self.sizes is not None:
            return self.sizes
        out = {2**j for j in range(self.L0 + self.L + 2)}
        if self.odd:
            m = 1
            while 2 * m + 1 <= self.N:
                out.add(2 * m + 1)
                m *= 2
        return tuple(sorted(out))

    def stride(self, k: int, windowed: bool) -> int:
        if not windowed:
            return 1
        d = self.density or (8 if self.n == 1 else 4)
        return max(1, k // d)

    def corner_index(self, k: int, windowed: bool) -> np.ndarray:
        """1D corner indices (per axis) for ``k``-cell cubes."""
        st = self.stride(k, windowed)
        idx = np.arange(0, self.N - k + 1, st)
        if idx[-1] != self.N - k:
            idx = np.append(idx, self.N - k)
        return idx

    def random_cubes(self) -> tuple[np.ndarray, np.ndarray]:
        """``(corners (R, n), sides (R,))`` of the seeded off-mesh cubes."""
        if self.n_random == 0:
            return np.zeros((0, self.n)), np.zeros(0)
        rng = np.random.default_rng(self.seed)
        lo, hi = math.log(self.h), math.log(self.W / 2)
        sides = np.exp(rng.uniform(lo, hi, size=self.n_random))
        corners = rng.uniform(0.0, 1.0, size=(self.n_random, self.n)) * (2 * self.W - sides[:, None]) - self.W
        return corners, sides

    def count(self) -> int:
        tot = self.n_random
        for k in self.cell_sizes():
            tot += len(self.corner_index(k, False)) ** self.n
        return tot

    def restricted(self, sizes: Sequence[int]) -> "CubeScan":
        return CubeScan(self.n, self.L0, self.L, tuple(sizes), self.density, 0, self.seed, self.odd)


# ---------------------------------------------------------------------------
# factors


@dataclass(frozen=True)
class Avg:
    """``(avg_Q g)**power``."""

    g: GridFunction
    power: float = 1.0
    windowed = False


@dataclass(frozen=True)
class Orlicz:
    """``||g||_{phi,Q}**power``."""

    g: GridFunction
    phi: YoungFunction
    power: float = 1.0
    windowed = True


@dataclass(frozen=True)
class Extreme:
    """``(max_Q g)**power`` or ``(min_Q g)**power`` over cells meeting Q."""

    g: GridFunction
    power: float = 1.0
    kind: str = "max"
    windowed = False


@dataclass(frozen=True)
class Oscillation:
    """``avg_Q |g - g_Q|`` (``phi=None``) or ``||g - g_Q||_{phi,Q}``."""

    g: GridFunction
    phi: Optional[YoungFunction] = None
    power: float = 1.0
    windowed = True


def _aligned_windows(values: np.ndarray, k: int, idx: np.ndarray) -> np.ndarray:
    n = values.ndim
    view = sliding_window_view(values, (k,) * n)
    if n == 1:
        return view[idx]
    return view[idx[:, None], idx[None, :]].reshape(len(idx), len(idx), k * k)


def _extreme_filter(values: np.ndarray, k: int, kind: str, anchor: str = "corner") -> np.ndarray:
    """Sliding max/min over ``k``-cell windows.

    ``anchor="corner"``: ``out[i] = ext(values[i:i+k])`` (window starting at i).
    ``anchor="cover"``: ``out[c] = ext(values[c-k+1:c+1])`` (windows covering c).
    """
    filt = ndimage.maximum_filter1d if kind == "max" else ndimage.minimum_filter1d
    origin = -(k // 2) if anchor == "corner" else (k - 1) // 2
    fill = -np.inf if kind == "max" else np.inf
    out = values
    for axis in range(values.ndim):
        out = filt(out, size=k, axis=axis, origin=origin, mode="constant", cval=fill)
    return out


def _factor_aligned(fac, k: int, idx: np.ndarray, scan: CubeScan) -> np.ndarray:
    g = fac.g
    n = g.n
    if isinstance(fac, Avg):
        x = -g.W + idx * g.h
        if n == 1:
            corners = x[:, None]
        else:
            X, Y = np.meshgrid(x, x, indexing="ij")
            corners = np.stack([X.ravel(), Y.ravel()], axis=-1)
        vals = g.average_many(corners, np.full(len(corners), k * g.h))
        vals = vals.reshape((len(idx),) * n)
        return _raise(vals, fac.power)
    if isinstance(fac, Extreme):
        ext = _extreme_filter(g.values, k, fac.kind)
        sel = ext[idx] if n == 1 else ext[idx[:, None], idx[None, :]]
        return _raise(sel, fac.power)
    win = _aligned_windows(g.values, k, idx)
    if isinstance(fac, Orlicz):
        return _raise(orlicz_norm_batch(win, fac.phi), fac.power)
    dev = np.abs(win - win.mean(axis=-1, keepdims=True))
    if fac.phi is None:
        return _raise(dev.mean(axis=-1), fac.power)
    return _raise(orlicz_norm_batch(dev, fac.phi), fac.power)


def _raise(vals, power):
    if power == 1:
        return vals
    # prefix-sum averages of nonnegative data can land a few ulps below 0
    with np.errstate(divide="ignore", over="ignore"):
        return np.power(np.maximum(vals, 0.0), power)


def _random_windows(g: GridFunction, corners: np.ndarray, sides: np.ndarray):
    """Padded ``(values, weights)`` matrices for off-mesh cubes (weights are cell fractions)."""
    rows_v, rows_w = [], []
    for c, s in zip(corners, sides):
        sl, w = g.window_index(Cube(tuple(c), float(s)))
        if sl is None:
            rows_v.append(np.zeros(1))
            rows_w.append(np.zeros(1))
            continue
        rows_v.append(g.values[sl].reshape(-1))
        rows_w.append(w.reshape(-1))
    width = max(len(r) for r in rows_v)
    V = np.zeros((len(rows_v), width))
    Wt = np.zeros((len(rows_v), width))
    for i, (v, w) in enumerate(zip(rows_v, rows_w)):
        V[i, : len(v)] = v
        Wt[i, : len(w)] = w
    return V, Wt


def _factor_random(fac, corners: np.ndarray, sides: np.ndarray) -> np.ndarray:
    g = fac.g
    if isinstance(fac, Avg):
        return _raise(g.average_many(corners, sides), fac.power)
    V, Wt = _random_windows(g, corners, sides)
    if isinstance(fac, Extreme):
        if fac.kind == "max":
            ext = np.where(Wt > 0, V, -np.inf).max(axis=1)
        else:
            ext = np.where(Wt > 0, V, np.inf).min(axis=1)
        return _raise(ext, fac.power)
    if isinstance(fac, Orlicz):
        return _raise(orlicz_norm_batch(V, fac.phi, weights=Wt), fac.power)
    mean = np.sum(V * Wt, axis=1, keepdims=True) / np.sum(Wt, axis=1, keepdims=True)
    dev = np.abs(V - mean)
    if fac.phi is None:
        return _raise(np.sum(dev * Wt, axis=1) / np.sum(Wt, axis=1), fac.power)
    return _raise(orlicz_norm_batch(dev, fac.phi, weights=Wt), fac.power)


# ---------------------------------------------------------------------------
# results


@dataclass
class ScanResult:
    constant: float
    per_scale: dict
    argmax: Optional[Cube]
    count: int
    kind: str = ""
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "constant": self.constant,
            "per_scale": {repr(float(k)): v for k, v in sorted(self.per_scale.items())},
            "argmax": self.argmax.to_dict() if self.argmax is not None else None,
            "count": self.count,
            "notes": list(self.notes),
        }


def scan_groups(factors, vol_exp: float, scan: CubeScan):
    """Yield ``(corners (M, n), side, values (M,))`` for every scan group."""
    if not factors:
        raise ValueError("a scan functional needs at least one factor")
    windowed = any(f.windowed for f in factors)
    n, h, W = scan.n, scan.h, scan.W
    for k in scan.cell_sizes():
        idx = scan.corner_index(k, windowed)
        vals = np.ones((len(idx),) * n)
        for fac in factors:
            vals = vals * _factor_aligned(fac, k, idx, scan)
        side = k * h
        vals = vals * side ** (n * vol_exp)
        x = -W + idx * h
        if n == 1:
            corners = x[:, None]
        else:
            X, Y = np.meshgrid(x, x, indexing="ij")
            corners = np.stack([X.ravel(), Y.ravel()], axis=-1)
        yield corners, side, vals.reshape(-1)
    if scan.n_random:
        corners, sides = scan.random_cubes()
        vals = np.ones(len(sides))
        for fac in factors:
            vals = vals * _factor_random(fac, corners, sides)
        vals = vals * sides ** (n * vol_exp)
        yield corners, sides, vals


def scan_functional(factors, vol_exp: float, scan: CubeScan, kind: str = "") -> ScanResult:
    best, arg = -np.inf, None
    per_scale: dict = {}
    count = 0
    for corners, side, vals in scan_groups(factors, vol_exp, scan):
        count += len(vals)
        vals = np.where(np.isnan(vals), np.inf, vals)
        if np.ndim(side) == 0:
            per_scale[float(side)] = max(per_scale.get(float(side), -np.inf), float(np.max(vals)))
            sides = np.full(len(vals), side)
        else:
            sides = side
            per_scale["random"] = max(per_scale.get("random", -np.inf), float(np.max(vals)))
        i = int(np.argmax(vals))
        if vals[i] > best:
            best, arg = float(vals[i]), Cube(tuple(corners[i]), float(sides[i]))
    return ScanResult(best, per_scale, arg, count, kind)


# ---------------------------------------------------------------------------
# weights


@dataclass(frozen=True)
class WeightTriple:
    """``(u, v1, v2)``; for one-weight kinds ``v1, v2`` play ``w1, w2``."""

    u: object
    v1: object
    v2: object

    @classmethod
    def powers(cls, a_u: float, a_1: float, a_2: float, n: int = 1, L0: int = 2, L: int = 10) -> "WeightTriple":
        return cls(PowerWeight(a_u, n, L0, L), PowerWeight(a_1, n, L0, L), PowerWeight(a_2, n, L0, L))

    def describe(self) -> dict:
        def d(w):
            return w.describe() if isinstance(w, PowerWeight) else "grid"
        return {"u": d(self.u), "v1": d(self.v1), "v2": d(self.v2)}


def _check_positive(w):
    vals = w.values if isinstance(w, GridFunction) else w.pow(1.0).values
    if np.any(vals <= 0):
        raise ValueError("weights must be strictly positive on the domain box")


def ap_constant(w, p: float, scan: CubeScan) -> float:
    """Muckenhoupt ``A_p`` characteristic over the scan; ``p = 1`` uses ``max Mw / w``."""
    return ap_scan(w, p, scan).constant


def ap_scan(w, p: float, scan: CubeScan) -> ScanResult:
    _check_positive(w)
    if p < 1:
        raise ConfigError(f"A_p needs p >= 1, got {p}")
    if p == 1:
        wv = weight_power(w, 1.0)
        Mw = scan_maximal([Avg(wv)], 0.0, scan)
        ratio = Mw.values / wv.values
        i = int(np.argmax(ratio))
        return ScanResult(float(ratio.reshape(-1)[i]), {}, None, scan.count(), "A1")
    pp = conjugate(p)
    facs = [Avg(weight_power(w, 1.0)), Avg(weight_power(w, 1.0 - pp), p - 1.0)]
    return scan_functional(facs, 0.0, scan, kind=f"A{p:g}")


def ainfty_reverse_holder(w, scan: CubeScan, ms: Sequence[float] = (2.0, 1.5, 1.25, 1.1, 1.05),
                          threshold: float = 10.0) -> tuple[float, float]:
    """Largest tested ``m`` with ``max (avg w**m)**(1/m) / avg w <= threshold``."""
    _check_positive(w)
    base = weight_power(w, 1.0)
    tried = {}
    for m in sorted(ms, reverse=True):
        C = scan_functional([Avg(weight_power(w, m), 1.0 / m), Avg(base, -1.0)], 0.0, scan).constant
        tried[m] = C
        if C <= threshold:
            return float(m), float(C)
    raise NoReverseHolder(
        f"no reverse Hölder exponent among {sorted(ms)} has constant <= {threshold}: {tried}")


def ainfty_eta_kappa(w, scan: CubeScan, etas: Sequence[float] = (0.25, 0.5, 0.75, 0.9)) -> dict:
    """Measured ``kappa(eta) = min_Q min_{|E| >= eta|Q|} w(E)/w(Q)`` on cell-aligned E."""
    wv = weight_power(w, 1.0)
    out = {}
    for eta in etas:
        worst = 1.0
        for k in scan.cell_sizes():
            idx = scan.corner_index(k, True)
            win = _aligned_windows(wv.values, k, idx).reshape(-1, k**scan.n)
            m = int(math.ceil(eta * win.shape[1]))
            part = np.sort(win, axis=1)[:, :m].sum(axis=1) / win.sum(axis=1)
            worst = min(worst, float(part.min()))
        out[eta] = worst
    return out


# ---------------------------------------------------------------------------
# bump conditions

BUMP_KINDS = ("thmD", "thmE", "eq22", "thmH", "thmA", "thmB", "eq21", "onevec", "eq91",
              "onevecwp", "section10", "BMtw", "steinweiss", "eq105")


def default_bumps(kind: str, cfg: ExponentConfig) -> dict:
    """The Young functions each theorem names (``delta`` from ``cfg``)."""
    d = cfg.delta
    if kind == "thmD":
        p1c, p2c = conjugate(cfg.p1), conjugate(cfg.p2)
        return {"phi1": LogBump(p1c, p1c - 1 + d), "phi2": LogBump(p2c, p2c - 1 + d)}
    if kind == "thmA":
        p1c, p2c = conjugate(cfg.p1), conjugate(cfg.p2)
        N, m = cfg.N, cfg.m
        psi = LLogL(cfg.q * N / (1 - cfg.q)) if cfg.q < 1 else None
        return {"psi": psi, "phi1": LogBump(p1c, (m + 1) * p1c - 1 + d),
                "phi2": LogBump(p2c, (N - m + 1) * p2c - 1 + d)}
    if kind in ("thmE", "eq22", "thmH", "thmB", "BMtw"):
        cfg.require_holder(True, kind)
        N, m = (cfg.N, cfg.m) if kind == "thmB" else (0, 0)
        a1 = conjugate(cfg.p1 / cfg.r)
        a2 = conjugate(cfg.p2 / cfg.s)
        qq = cfg.p if kind == "BMtw" else cfg.q
        return {"psi": LogBump(qq, (N + 1) * qq - 1 + d),
                "phi1": LogBump(a1, (m * cfg.r + 1) * a1 - 1 + d),
                "phi2": LogBump(a2, ((N - m) * cfg.s + 1) * a2 - 1 + d)}
    return {}


def _validate(kind: str, cfg: ExponentConfig):
    p, q = cfg.p, cfg.q
    if kind in ("thmD", "thmA"):
        if not (0.5 < p <= q <= 1):
            raise ConfigError(f"requires 1/2 < p <= q <= 1 ({kind}), got p={p:g}, q={q:g}")
        if kind == "thmA" and not 0 < cfg.alpha:
            raise ConfigError("requires 0 < alpha < n (thmA)")
    elif kind in ("thmE", "eq22", "thmH", "thmB"):
        cfg.require_holder(True, kind)
        if not (1 < p <= q):
            raise ConfigError(f"requires 1 < p <= q ({kind}), got p={p:g}, q={q:g}")
        if kind in ("thmE", "thmB") and not 0 < cfg.alpha:
            raise ConfigError(f"requires 0 < alpha < n ({kind})")
    elif kind in ("eq21", "steinweiss", "eq105"):
        cfg.require_holder(False, "thmG")
        if not (1 < p <= q):
            raise ConfigError(f"requires 1 < p <= q (thmG), got p={p:g}, q={q:g}")
    elif kind in ("onevec", "eq91"):
        cfg.require_holder(True, "thmI")
        if abs(1 / q - (1 / p - cfg.alpha / cfg.n)) > 1e-12:
            raise ConfigError("requires 1/q = 1/p - alpha/n (thmI)")
    elif kind == "BMtw":
        cfg.require_holder(True, "BMtw")
        if not p > 1:
            raise ConfigError("requires p > 1 (BMtw)")
    elif kind in ("onevecwp", "section10"):
        if not p >= 1:
            raise ConfigError("requires p >= 1 (onevecwp)")
    else:
        raise ConfigError(f"unknown bump kind {kind!r}; expected one of {BUMP_KINDS}")


def _neg_power_factor(v, r: float, pi: float) -> list:
    """``(avg v**(-r/(pi-r)))**((pi-r)/(r pi))``, or ``(inf v)**(-1/pi)`` when ``pi == r``."""
    if pi == r:
        return [Extreme(weight_power(v, 1.0), -1.0 / pi, "min")]
    return [Avg(weight_power(v, -r / (pi - r)), (pi - r) / (r * pi))]


def bump_factors(kind: str, weights: WeightTriple, cfg: ExponentConfig, bumps: Optional[dict] = None):
    """``(factors, vol_exp)`` describing the displayed condition of ``kind``."""
    _validate(kind, cfg)
    b = default_bumps(kind, cfg)
    b.update(bumps or {})
    u, v1, v2 = weights.u, weights.v1, weights.v2
    p1, p2, q, p = cfg.p1, cfg.p2, cfg.q, cfg.p
    sigma = cfg.scale_exponent
    if kind in ("thmD", "thmA"):
        if q == 1:
            ufac = [Extreme(weight_power(u, 1.0), 1.0, "max")]
        elif kind == "thmD":
            ufac = [Avg(weight_power(u, 1 / (1 - q)), (1 - q) / q)]
        else:
            ufac = [Orlicz(weight_power(u, 1 / (1 - q)), b["psi"], (1 - q) / q)]
        return ufac + [Orlicz(weight_power(v1, -1 / p1), b["phi1"]),
                       Orlicz(weight_power(v2, -1 / p2), b["phi2"])], sigma
    if kind in ("thmE", "eq22", "thmH", "thmB", "BMtw"):
        r, s = cfg.r, cfg.s
        qq = p if kind == "BMtw" else q
        facs = [Orlicz(weight_power(u, 1 / qq), b["psi"]),
                Orlicz(weight_power(v1, -r / p1), b["phi1"], 1 / r),
                Orlicz(weight_power(v2, -s / p2), b["phi2"], 1 / s)]
        return facs, (0.0 if kind == "BMtw" else sigma)
    if kind in ("eq21", "steinweiss", "eq105"):
        r, s = cfg.r, cfg.s
        facs = [Avg(weight_power(u, 1.0), 1 / q)] + _neg_power_factor(v1, r, p1) + _neg_power_factor(v2, s, p2)
        return facs, sigma
    if kind in ("onevec", "eq91"):
        r, s = cfg.r, cfg.s
        uu = weight_product((v1, q / p1), (v2, q / p2))
        return [Avg(uu, 1 / q)] + _neg_power_factor(v1, r, p1) + _neg_power_factor(v2, s, p2), 0.0
    # onevecwp: q = p, r = p1/p, s = p2/p
    uu = weight_product((v1, p / p1), (v2, p / p2))
    facs = [Avg(uu, 1 / p)]
    if p == 1:
        facs += [Extreme(weight_power(v1, 1.0), -1 / p1, "min"), Extreme(weight_power(v2, 1.0), -1 / p2, "min")]
    else:
        facs += [Avg(weight_power(v1, 1 / (1 - p)), (p - 1) / p1), Avg(weight_power(v2, 1 / (1 - p)), (p - 1) / p2)]
    return facs, 0.0


def bump_scan(kind: str, weights: WeightTriple, cfg: ExponentConfig, bumps: Optional[dict] = None,
              scan: Optional[CubeScan] = None) -> ScanResult:
    facs, vol = bump_factors(kind, weights, cfg, bumps)
    if scan is None:
        g = facs[0].g
        scan = CubeScan(g.n, g.L0, g.L)
    res = scan_functional(facs, vol, scan, kind=kind)
    for w in (weights.u, weights.v1, weights.v2):
        if not isinstance(w, PowerWeight):
            res.notes.append("non-symbolic weight: negative powers use clipped cell values")
            break
    return res


def bump_constant(kind: str, weights: WeightTriple, cfg: ExponentConfig, bumps: Optional[dict] = None,
                  scan: Optional[CubeScan] = None) -> float:
    return bump_scan(kind, weights, cfg, bumps, scan).constant


def apq_constant(w1, w2, cfg: ExponentConfig, scan: CubeScan) -> float:
    """``(avg (w1 w2)**q)**(1/q) (avg w1**-p1')**(1/p1') (avg w2**-p2')**(1/p2')``."""
    _check_positive(w1)
    _check_positive(w2)
    q = cfg.q
    a1, a2 = conjugate(cfg.p1), conjugate(cfg.p2)
    facs = [Avg(weight_product((w1, q), (w2, q)), 1 / q),
            Avg(weight_power(w1, -a1), 1 / a1), Avg(weight_power(w2, -a2), 1 / a2)]
    return scan_functional(facs, 0.0, scan, kind="apq").constant


# ---------------------------------------------------------------------------
# BMO


def bmo_norm(b: GridFunction, scan: CubeScan) -> float:
    return scan_functional([Oscillation(b)], 0.0, scan, kind="bmo").constant


def john_nirenberg_check(b: GridFunction, scan: CubeScan) -> float:
    """``max_Q ||b - b_Q||_{exp L, Q} / ||b||_BMO``; 0 for constant ``b``."""
    bmo = bmo_norm(b, scan)
    if bmo <= 1e-14 * max(1.0, float(np.max(np.abs(b.values)))):
        return 0.0
    osc = scan_functional([Oscillation(b, ExpL())], 0.0, scan, kind="john-nirenberg").constant
    return osc / bmo


# ---------------------------------------------------------------------------
# scan-restricted maximal functions


def scan_maximal(factors, vol_exp: float, scan: CubeScan) -> GridFunction:
    """``x -> max over scan cubes Q containing x`` of the functional, per cell."""
    g = factors[0].g
    N, n = scan.N, scan.n
    out = np.zeros((N,) * n)
    windowed = any(f.windowed for f in factors)
    for k in scan.cell_sizes():
        idx = scan.corner_index(k, windowed)
        vals = np.ones((len(idx),) * n)
        for fac in factors:
            vals = vals * _factor_aligned(fac, k, idx, scan)
        vals = vals * (k * scan.h) ** (n * vol_exp)
        grid = np.full((N,) * n, -np.inf)
        if n == 1:
            grid[idx] = vals
        else:
            grid[idx[:, None], idx[None, :]] = vals
        np.maximum(out, _extreme_filter(grid, k, "max", anchor="cover"), out=out)
    if scan.n_random:
        corners, sides = scan.random_cubes()
        vals = np.ones(len(sides))
        for fac in factors:
            vals = vals * _factor_random(fac, corners, sides)
        vals = vals * sides ** (n * vol_exp)
        for c, s, v in zip(corners, sides, vals):
            # cells whose centers lie in [c, c + s)
            i0 = np.ceil((c + scan.W) / scan.h - 0.5).astype(int)
            i1 = np.ceil((c + s + scan.W) / scan.h - 0.5).astype(int)
            sl = tuple(slice(max(a, 0), min(b_, N)) for a, b_ in zip(i0, i1))
            region = out[sl]
            np.maximum(region, v, out=region)
    return GridFunction(out, g.L0, g.L)


def _equal_side_windows(g: GridFunction, corners: np.ndarray, side: float):
    """Flattened ``(values, cell-fraction weights)`` for many cubes of one side."""
    M = len(corners)
    m = int(math.ceil(side / g.h - 1e-9)) + 1
    vals_idx = []
    wts = []
    for ax in range(g.n):
        u0 = (corners[:, ax] + g.W) / g.h
        u1 = u0 + side / g.h
        i0 = np.floor(u0).astype(np.int64)
        idx = i0[:, None] + np.arange(m)[None, :]
        w = np.minimum(idx + 1, u1[:, None]) - np.maximum(idx, u0[:, None])
        w = np.clip(w, 0.0, 1.0)
        inside = (idx >= 0) & (idx < g.N)
        w = np.where(inside, w, 0.0)
        vals_idx.append(np.clip(idx, 0, g.N - 1))
        wts.append(w)
    if g.n == 1:
        V = g.values[vals_idx[0]]
        Wt = wts[0]
    else:
        V = g.values[vals_idx[0][:, :, None], vals_idx[1][:, None, :]].reshape(M, -1)
        Wt = (wts[0][:, :, None] * wts[1][:, None, :]).reshape(M, -1)
    return np.where(Wt > 0, V, 0.0), Wt


def cube_norms(f: GridFunction, phi: YoungFunction, corners: np.ndarray, side: float) -> np.ndarray:
    """Orlicz norms of ``|f|`` over equal-side cubes anywhere (zero outside the box)."""
    corners = np.asarray(corners, dtype=np.float64).reshape(-1, f.n)
    if len(corners) == 0:
        return np.zeros(0)
    if isinstance(phi, Power):
        fp = abs(f).pow(phi.p)
        return np.maximum(fp.average_many(corners, np.full(len(corners), side)), 0.0) ** (1.0 / phi.p)
    if f.n <= 2 and side <= f.W:
        V, Wt = _equal_side_windows(abs(f), corners, side)
    else:
        V, Wt = _random_windows(abs(f), corners, np.full(len(corners), side))
    outside = (side / f.h) ** f.n - Wt.sum(axis=1)
    V = np.concatenate([V, np.zeros((len(V), 1))], axis=1)
    Wt = np.concatenate([Wt, np.maximum(outside, 0.0)[:, None]], axis=1)
    return orlicz_norm_batch(V, phi, weights=Wt)
