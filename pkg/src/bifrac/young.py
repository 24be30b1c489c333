"""Young functions, their associates, Orlicz averages and the B_p test.

Every family member is evaluated through ``log_value(v)``, the logarithm of
``Phi(exp(v))``, so associates and integrability tails can be handled far
beyond the float range of ``Phi`` itself.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .dyadic import Cube
from .errors import ConfigError, IndeterminateError
from .signal import GridFunction

V_MIN, V_MAX = -745.0, 1.0e300


def _log_e_plus(v):
    """``log(e + exp(v))``."""
    return np.logaddexp(v, 1.0)


def _bracket_increasing(fn, target, lo=V_MIN, start=800.0):
    """Per-element bracket ``[lo, hi]`` with ``fn(hi) >= target``, doubling ``hi``."""
    target = np.asarray(target, dtype=np.float64)
    lo = np.full(target.shape, float(lo))
    hi = np.full(target.shape, float(start))
    while True:
        short = (fn(hi) < target) & (hi < V_MAX)
        if not np.any(short):
            return lo, hi
        lo = np.where(short, hi, lo)
        hi = np.where(short, hi * 2, hi)


def _bisect_increasing(fn, target, lo, hi, iters=90):
    """Vectorised bisection for ``fn(v) = target`` with ``fn`` increasing."""
    target = np.asarray(target, dtype=np.float64)
    lo = np.broadcast_to(np.asarray(lo, dtype=np.float64), target.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=np.float64), target.shape).copy()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        big = fn(mid) >= target
        hi = np.where(big, mid, hi)
        lo = np.where(big, lo, mid)
    return 0.5 * (lo + hi)


def _illinois_increasing(fn, target, lo, hi, xtol=1e-13, maxiter=200):
    """Bracketed Illinois iteration for ``fn(v) = target`` with ``fn`` increasing.

    Same contract as :func:`_bisect_increasing`: elements whose target lies
    outside ``[fn(lo), fn(hi)]`` end at the nearer endpoint.  Nearly-linear
    ``fn`` (the log-space derivatives here) converge in a handful of steps;
    the midpoint replaces any unusable secant point.
    """
    target = np.asarray(target, dtype=np.float64)
    lo = np.broadcast_to(np.asarray(lo, dtype=np.float64), target.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=np.float64), target.shape).copy()
    tiny = 4 * np.finfo(float).eps * (1.0 + np.abs(target))
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        flo, fhi = fn(lo) - target, fn(hi) - target
        below, above = flo >= 0, fhi <= 0
        x = np.where(below, lo, hi)
        done = below | above | (hi - lo <= xtol * (1.0 + np.abs(hi)))
        side = np.zeros(target.shape)
        for _ in range(maxiter):
            if np.all(done):
                break
            xs = (lo * fhi - hi * flo) / (fhi - flo)
            ok = np.isfinite(xs) & (xs > lo) & (xs < hi)
            xs = np.where(ok, xs, 0.5 * (lo + hi))
            fx = fn(xs) - target
            up = fx >= 0
            live = ~done
            hi, fhi = np.where(live & up, xs, hi), np.where(live & up, fx, fhi)
            lo, flo = np.where(live & ~up, xs, lo), np.where(live & ~up, fx, flo)
            # an endpoint kept twice in a row has its value halved
            flo = np.where(live & up & (side > 0), 0.5 * flo, flo)
            fhi = np.where(live & ~up & (side < 0), 0.5 * fhi, fhi)
            side = np.where(up, 1.0, -1.0)
            x = np.where(live, xs, x)
            done = done | (np.abs(fx) <= tiny) | (hi - lo <= xtol * (1.0 + np.abs(xs)))
    return x


class YoungFunction:
    """Base class; subclasses provide the three log-space primitives."""

    tag = "young"

    # log-space primitives ------------------------------------------------
    def log_value(self, v):
        raise NotImplementedError

    def log_derivative(self, v):
        raise NotImplementedError

    def elasticity(self, v):
        """``t Phi'(t) / Phi(t)`` at ``t = exp(v)``."""
        return np.exp(self.log_derivative(v) + v - self.log_value(v))

    def elasticity_excess(self, v):
        """``elasticity - 1``, overridden where cancellation would bite."""
        return self.elasticity(v) - 1.0

    # plain evaluation ------------------------------------------------------
    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        with np.errstate(divide="ignore", over="ignore"):
            out = np.exp(self.log_value(np.log(np.where(t > 0, t, 1.0))))
        return np.where(t > 0, out, 0.0)

    def derivative(self, t):
        t = np.asarray(t, dtype=np.float64)
        with np.errstate(divide="ignore", over="ignore"):
            return np.exp(self.log_derivative(np.log(np.where(t > 0, t, 1e-300))))

    def log_inverse(self, logy):
        """``log Phi^{-1}(exp(logy))`` (vectorised)."""
        lo, hi = _bracket_increasing(self.log_value, logy)
        return _bisect_increasing(self.log_value, logy, lo, hi, iters=100)

    def inverse(self, y):
        y = np.asarray(y, dtype=np.float64)
        with np.errstate(divide="ignore"):
            out = np.exp(self.log_inverse(np.log(np.where(y > 0, y, 1.0))))
        out = np.where(y > 0, out, 0.0)
        return float(out) if out.ndim == 0 else out

    # structure -------------------------------------------------------------
    def growth(self) -> Optional[tuple[float, float]]:
        """``(r, s)`` with ``Phi(t) ~ t**r log(t)**s`` at infinity; None if faster."""
        return None

    def spec(self) -> str:
        raise NotImplementedError

    def __repr__(self):
        return self.spec()

    def associate(self) -> "YoungFunction":
        # memoized so the associate's cached inverse survives between calls
        cached = self.__dict__.get("_assoc")
        if cached is None:
            cached = Associate(self)
            object.__setattr__(self, "_assoc", cached)
        return cached


@dataclass(frozen=True, repr=False)
class Power(YoungFunction):
    p: float

    tag = "power"

    def __post_init__(self):
        if not self.p >= 1:
            raise ConfigError(f"power Young function needs p >= 1, got {self.p}")

    def log_value(self, v):
        return self.p * np.asarray(v, dtype=np.float64)

    def log_derivative(self, v):
        return math.log(self.p) + (self.p - 1) * np.asarray(v, dtype=np.float64)

    def elasticity(self, v):
        return np.full(np.shape(v), float(self.p))

    def elasticity_excess(self, v):
        return np.full(np.shape(v), float(self.p) - 1.0)

    def __call__(self, t):
        return np.power(np.abs(np.asarray(t, dtype=np.float64)), self.p)

    def inverse(self, y):
        out = np.power(np.asarray(y, dtype=np.float64), 1.0 / self.p)
        return float(out) if out.ndim == 0 else out

    def log_inverse(self, logy):
        return np.asarray(logy, dtype=np.float64) / self.p

    def growth(self):
        return (float(self.p), 0.0)

    def spec(self):
        return f"power({self.p:g})"


@dataclass(frozen=True, repr=False)
class LogBump(YoungFunction):
    """``t**r * log(e + t)**s``."""

    r: float
    s: float

    tag = "logbump"

    def __post_init__(self):
        if not self.r >= 1:
            raise ConfigError(f"log-bump needs r >= 1, got r={self.r}")

    def log_value(self, v):
        v = np.asarray(v, dtype=np.float64)
        return self.r * v + self.s * np.log(_log_e_plus(v))

    def log_derivative(self, v):
        v = np.asarray(v, dtype=np.float64)
        Lg = _log_e_plus(v)
        frac = np.exp(v - Lg)  # t / (e + t)
        with np.errstate(divide="ignore", invalid="ignore"):
            return (self.r - 1) * v + (self.s - 1) * np.log(Lg) + np.log(self.r * Lg + self.s * frac)

    def elasticity(self, v):
        v = np.asarray(v, dtype=np.float64)
        Lg = _log_e_plus(v)
        return self.r + self.s * np.exp(v - Lg) / Lg

    def elasticity_excess(self, v):
        v = np.asarray(v, dtype=np.float64)
        Lg = _log_e_plus(v)
        return (self.r - 1.0) + self.s * np.exp(v - Lg) / Lg

    def growth(self):
        return (float(self.r), float(self.s))

    def spec(self):
        return f"logbump(r={self.r:g},s={self.s:g})"


@dataclass(frozen=True, repr=False)
class LLogL(LogBump):
    """``t * log(e + t)**k``."""

    tag = "llogl"

    def __init__(self, k: float):
        object.__setattr__(self, "r", 1.0)
        object.__setattr__(self, "s", float(k))

    @property
    def k(self) -> float:
        return self.s

    def spec(self):
        return f"llogl(k={self.s:g})"


@dataclass(frozen=True, repr=False)
class ReverseLogBump(LogBump):
    """``t**p / log(e + t)**c``."""

    tag = "reverselogbump"

    def __init__(self, p: float, c: float):
        object.__setattr__(self, "r", float(p))
        object.__setattr__(self, "s", -float(c))
        self.__post_init__()

    @property
    def p(self) -> float:
        return self.r

    @property
    def c(self) -> float:
        return -self.s

    def spec(self):
        return f"reverselogbump(p={self.r:g},c={-self.s:g})"


@dataclass(frozen=True, repr=False)
class ExpL(YoungFunction):
    """``exp(t) - 1``."""

    tag = "expl"

    def log_value(self, v):
        t = np.exp(np.minimum(np.asarray(v, dtype=np.float64), 709.0))
        with np.errstate(divide="ignore"):
            small = np.log(np.expm1(np.minimum(t, 30.0)))
            large = t + np.log1p(-np.exp(-np.maximum(t, 30.0)))
        return np.where(t > 30.0, large, small)

    def log_derivative(self, v):
        return np.exp(np.minimum(np.asarray(v, dtype=np.float64), 709.0))

    def elasticity(self, v):
        t = np.exp(np.minimum(np.asarray(v, dtype=np.float64), 709.0))
        return t / -np.expm1(-t)

    def elasticity_excess(self, v):
        t = np.exp(np.minimum(np.asarray(v, dtype=np.float64), 709.0))
        series = t / 2 - t**2 / 12
        exact = (t + np.expm1(-t)) / -np.expm1(-np.maximum(t, 1e-300))
        return np.where(t < 1e-3, series, exact)

    def __call__(self, t):
        with np.errstate(over="ignore"):
            return np.expm1(np.asarray(t, dtype=np.float64))

    def inverse(self, y):
        out = np.log1p(np.asarray(y, dtype=np.float64))
        return float(out) if out.ndim == 0 else out

    def log_inverse(self, logy):
        with np.errstate(divide="ignore"):
            return np.log(np.log1p(np.exp(np.asarray(logy, dtype=np.float64))))

    def spec(self):
        return "expl"


@dataclass(frozen=True, repr=False)
class ExpLPow(YoungFunction):
    """``exp(t**(1/xi)) - 1``."""

    xi: float

    tag = "explpow"

    def __post_init__(self):
        if not self.xi > 0:
            raise ConfigError(f"exp(L^(1/xi)) needs xi > 0, got {self.xi}")

    def log_value(self, v):
        return ExpL().log_value(np.asarray(v, dtype=np.float64) / self.xi)

    def log_derivative(self, v):
        v = np.asarray(v, dtype=np.float64)
        w = np.exp(np.minimum(v / self.xi, 709.0))
        return -math.log(self.xi) + (1.0 / self.xi - 1.0) * v + w

    def elasticity(self, v):
        return ExpL().elasticity(np.asarray(v, dtype=np.float64) / self.xi) / self.xi

    def elasticity_excess(self, v):
        v = np.asarray(v, dtype=np.float64) / self.xi
        if self.xi == 1:
            return ExpL().elasticity_excess(v)
        return (ExpL().elasticity(v) - self.xi) / self.xi

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        with np.errstate(over="ignore"):
            return np.expm1(np.power(np.abs(t), 1.0 / self.xi))

    def inverse(self, y):
        out = np.power(np.log1p(np.asarray(y, dtype=np.float64)), self.xi)
        return float(out) if out.ndim == 0 else out

    def log_inverse(self, logy):
        return self.xi * ExpL().log_inverse(logy)

    def spec(self):
        return f"explpow(xi={self.xi:g})"


@dataclass(frozen=True, repr=False)
class Associate(YoungFunction):
    """Numeric associate ``sup_t (s t - Phi(t))`` of ``base``.

    The maximiser solves ``Phi'(t) = s``; writing ``E`` for the elasticity of
    ``Phi`` there, ``Phi_bar(s) = s t (1 - 1/E)``.
    """

    base: YoungFunction

    tag = "associate"

    def _argmax(self, v):
        """``log t*`` for ``s = exp(v)``; ``nan`` where the sup is attained at 0."""
        v = np.asarray(v, dtype=np.float64)
        fn = self.base.log_derivative
        grid, table = self._derivative_table()
        floor = table[0]
        # narrow per-element brackets from the cached table; past its end, keep doubling
        i = np.clip(np.searchsorted(table, v), 1, grid.size - 1)
        lo, hi = grid[i - 1], grid[i]
        past = v > table[-1]
        if np.any(past):
            plo, phi = _bracket_increasing(fn, np.where(past, v, table[-1]), lo=grid[-1], start=2 * grid[-1])
            lo, hi = np.where(past, plo, lo), np.where(past, phi, hi)
        vs = _illinois_increasing(fn, v, lo, hi)
        return np.where(v > floor, vs, np.nan)

    def _derivative_table(self):
        cached = self.__dict__.get("_table")
        if cached is None:
            grid = np.linspace(V_MIN, 800.0, 1546)
            with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
                table = np.asarray(self.base.log_derivative(grid), dtype=np.float64)
            table = np.maximum.accumulate(np.where(np.isnan(table), -np.inf, table))
            cached = (grid, table)
            object.__setattr__(self, "_table", cached)
        return cached

    def log_value(self, v):
        v = np.asarray(v, dtype=np.float64)
        vs = self._argmax(v)
        with np.errstate(invalid="ignore", divide="ignore"):
            at = np.where(np.isnan(vs), 0.0, vs)
            out = v + vs + np.log(self.base.elasticity_excess(at)) - np.log(self.base.elasticity(at))
        return np.where(np.isnan(vs), -np.inf, out)

    def log_derivative(self, v):
        vs = self._argmax(v)
        return np.where(np.isnan(vs), -np.inf, vs)

    def elasticity(self, v):
        vs = self._argmax(v)
        at = np.where(np.isnan(vs), 0.0, vs)
        return self.base.elasticity(at) / self.base.elasticity_excess(at)

    def elasticity_excess(self, v):
        vs = self._argmax(v)
        return 1.0 / self.base.elasticity_excess(np.where(np.isnan(vs), 0.0, vs))

    def log_inverse(self, logy):
        logy = np.asarray(logy, dtype=np.float64)
        lo, hi = _bracket_increasing(self.log_value, logy, lo=-700.0, start=50.0)
        return _illinois_increasing(self.log_value, logy, lo, hi)

    def growth(self):
        g = self.base.growth()
        if g is None:
            return None
        r, s = g
        if r == 1:
            return None  # associate of t log^k t grows like exp(t^(1/k))
        rp = r / (r - 1)
        return (rp, -s * (rp - 1))

    def associate(self):
        return self.base

    def spec(self):
        return f"associate({self.base.spec()})"


def power_associate_exact(p: float, s):
    """Closed form ``s**p' / (p' p**(p'/p))`` of the associate of ``t**p``."""
    pp = p / (p - 1)
    return np.power(s, pp) / (pp * p ** (pp / p))


# ---------------------------------------------------------------------------
# grammar

_CALL = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$", re.IGNORECASE)
_FAMILIES = {
    "power": (Power, ("p",)),
    "logbump": (LogBump, ("r", "s")),
    "llogl": (LLogL, ("k",)),
    "expl": (ExpL, ()),
    "explpow": (ExpLPow, ("xi",)),
    "reverselogbump": (ReverseLogBump, ("p", "c")),
}


def parse_young(text: str) -> YoungFunction:
    """Parse ``power(2)``, ``logbump(r=2,s=1.5)``, ``associate(llogl(k=1))`` ..."""
    m = _CALL.match(text)
    if not m:
        raise ConfigError(f"cannot parse Young function {text!r}")
    name, body = m.group(1).lower(), (m.group(2) or "").strip()
    if name == "associate":
        return Associate(parse_young(body))
    if name not in _FAMILIES:
        raise ConfigError(f"unknown Young function family {name!r}; known: {sorted(_FAMILIES)} and associate")
    cls, names = _FAMILIES[name]
    args = [a.strip() for a in body.split(",")] if body else []
    kwargs: dict = {}
    for i, a in enumerate(args):
        if "=" in a:
            k, val = (x.strip() for x in a.split("=", 1))
        else:
            if i >= len(names):
                raise ConfigError(f"too many arguments for {name}: {text!r}")
            k, val = names[i], a
        if k not in names:
            raise ConfigError(f"{name} has no parameter {k!r}")
        try:
            kwargs[k] = float(val)
        except ValueError:
            raise ConfigError(f"parameter {k} of {name} is not a number: {val!r}") from None
    missing = [k for k in names if k not in kwargs]
    if missing:
        raise ConfigError(f"{name} is missing parameter(s) {missing}")
    return cls(**kwargs)


# ---------------------------------------------------------------------------
# Orlicz averages


def _log_mean_phi(phi: YoungFunction, logf: np.ndarray, w: np.ndarray, loglam, logw=None):
    """``log avg Phi(|f| / lam)`` along the last axis; ``logf = -inf`` for zeros."""
    loglam = np.asarray(loglam, dtype=np.float64)[..., None]
    finite = np.isfinite(logf)
    with np.errstate(invalid="ignore", over="ignore"):
        x = np.where(finite, phi.log_value(np.where(finite, logf - loglam, 0.0)), -np.inf)
    if logw is None:
        with np.errstate(divide="ignore"):
            logw = np.log(w)
    x = x + logw
    m = np.max(x, axis=-1, keepdims=True)
    m_safe = np.where(np.isfinite(m), m, 0.0)
    s = np.sum(np.exp(x - m_safe), axis=-1)
    with np.errstate(divide="ignore"):
        return np.log(s) + m_safe[..., 0] - np.log(np.sum(w, axis=-1))


def _inverse_one(phi: YoungFunction) -> float:
    cached = phi.__dict__.get("_inv1")
    if cached is None:
        cached = float(phi.inverse(1.0))
        object.__setattr__(phi, "_inv1", cached)
    return cached


def _cube_samples(f: GridFunction, q: Cube):
    if q.n != f.n:
        raise ValueError("cube dimension does not match function")
    if not q.side > 0:
        raise ValueError("zero-volume cube")
    slices, weights = f.window_index(q)
    total = q.side**f.n / f.h**f.n
    if slices is None:
        return np.zeros(1), np.ones(1)
    vals = np.abs(f.values[slices]).reshape(-1)
    w = weights.reshape(-1)
    outside = total - w.sum()
    if outside > 1e-12 * total:
        vals = np.append(vals, 0.0)
        w = np.append(w, outside)
    keep = w > 0
    return vals[keep], w[keep]


def orlicz_norm_samples(vals, w, phi: YoungFunction, rtol: float = 1e-12) -> float:
    """Luxemburg average of the discrete distribution ``(vals, w)``."""
    vals = np.abs(np.asarray(vals, dtype=np.float64))
    w = np.asarray(w, dtype=np.float64)
    top = float(vals.max()) if vals.size else 0.0
    if top == 0:
        return 0.0
    inv1 = _inverse_one(phi)
    mean = float(np.sum(vals * w) / np.sum(w))
    lo, hi = math.log(mean / inv1), math.log(top / inv1)
    if hi - lo < 1e-14:
        return math.exp(hi)
    with np.errstate(divide="ignore"):
        logf = np.log(vals)

    def g(ll):
        return float(_log_mean_phi(phi, logf, w, ll))

    glo, ghi = g(lo), g(hi)
    # the Jensen endpoint needs convexity; widen it for the rest
    step = 1.0
    while glo < 0 and lo > -700:
        lo -= step
        step *= 2
        glo = g(lo)
    if glo <= 0:
        return math.exp(lo)
    if ghi > 0:
        return math.exp(hi)
    ll = brentq(g, lo, hi, xtol=rtol, rtol=4 * np.finfo(float).eps, maxiter=200)
    return math.exp(ll)


def orlicz_norm(f: GridFunction, q: Cube, phi: YoungFunction) -> float:
    """``inf{lam > 0 : avg_q Phi(|f|/lam) <= 1}`` for the piecewise-constant ``f``."""
    vals, w = _cube_samples(f, q)
    return orlicz_norm_samples(vals, w, phi)


def orlicz_norm_batch(vals: np.ndarray, phi: YoungFunction, weights: Optional[np.ndarray] = None,
                      iters: int = 100) -> np.ndarray:
    """Luxemburg averages of many equal-weight windows (rows of ``vals``).

    Vectorised false-position solve in ``log lam`` inside the Jensen bracket,
    to about ``1e-14`` relative.
    """
    vals = np.abs(np.asarray(vals, dtype=np.float64))
    if isinstance(phi, Power):
        if weights is None:
            return np.mean(vals**phi.p, axis=-1) ** (1.0 / phi.p)
        return (np.sum(weights * vals**phi.p, axis=-1) / np.sum(weights, axis=-1)) ** (1.0 / phi.p)
    w = np.ones_like(vals) if weights is None else np.broadcast_to(weights, vals.shape)
    top = vals.max(axis=-1)
    mean = np.sum(vals * w, axis=-1) / np.sum(w, axis=-1)
    inv1 = _inverse_one(phi)
    out = np.zeros(vals.shape[:-1])
    live = top > 0
    if not np.any(live):
        return out
    v, ww = vals[live], w[live]
    with np.errstate(divide="ignore"):
        logf = np.log(v)
        logw = np.log(ww)
        lo = np.log(mean[live] / inv1)
        hi = np.log(top[live] / inv1)
    out[live] = np.exp(_solve_log_lambda(phi, logf, ww, logw, lo, hi, iters))
    return out


def _solve_log_lambda(phi, logf, w, logw, lo, hi, iters, tol=1e-14):
    """Root of ``log avg Phi(f/lam) = 0`` in ``log lam`` inside ``[lo, hi]``.

    Vectorised Illinois false position; a bisection step replaces any
    iterate that stalls, so ``iters`` bounds the work like plain bisection.
    """
    g_lo = _log_mean_phi(phi, logf, w, lo, logw)
    g_hi = _log_mean_phi(phi, logf, w, hi, logw)
    # g decreases in log lam: g(lo) >= 0 >= g(hi) by Jensen when Phi is
    # convex; widen lo for the rows where it is not
    step = 1.0
    for _ in range(12):
        short = g_lo < 0
        if not short.any():
            break
        lo = np.where(short, lo - step, lo)
        g_lo = np.where(short, _log_mean_phi(phi, logf, w, lo, logw), g_lo)
        step *= 2
    done = (hi - lo <= tol * np.maximum(1.0, np.abs(hi))) | (g_lo <= 0) | (g_hi >= 0)
    root = np.where(g_lo <= 0, lo, hi)
    side = np.zeros(lo.shape, dtype=np.int8)
    for it in range(iters):
        act = ~done
        if not act.any():
            break
        denom = g_lo - g_hi
        with np.errstate(invalid="ignore", divide="ignore"):
            x = np.where(denom > 0, (lo * -g_hi + hi * g_lo) / denom, 0.5 * (lo + hi))
        bad = ~((x > lo) & (x < hi)) | (it % 8 == 7)
        x = np.where(bad, 0.5 * (lo + hi), x)
        gx = np.where(act, _log_mean_phi(phi, logf, w, np.where(act, x, lo), logw), 0.0)
        pos = act & (gx > 0)
        neg = act & (gx <= 0)
        # Illinois: halve the stale endpoint value when the same side repeats
        g_hi = np.where(pos & (side == 1), 0.5 * g_hi, g_hi)
        g_lo = np.where(neg & (side == -1), 0.5 * g_lo, g_lo)
        lo = np.where(pos, x, lo)
        g_lo = np.where(pos, gx, g_lo)
        hi = np.where(neg, x, hi)
        g_hi = np.where(neg, gx, g_hi)
        side = np.where(pos, 1, np.where(neg, -1, side)).astype(np.int8)
        root = np.where(act, x, root)
        conv = act & ((hi - lo <= tol * np.maximum(1.0, np.abs(hi))) | (gx == 0) | (np.abs(gx) < 1e-15))
        done = done | conv
    return np.where(done, root, hi)


def orlicz_norm_prime(f: GridFunction, q: Cube, phi: YoungFunction) -> float:
    """``inf_lam lam + lam * avg_q Phi(|f|/lam)``, minimised over ``log lam``."""
    vals, w = _cube_samples(f, q)
    return orlicz_norm_prime_samples(vals, w, phi)


def orlicz_norm_prime_samples(vals, w, phi: YoungFunction) -> float:
    lux = orlicz_norm_samples(vals, w, phi)
    if lux == 0:
        return 0.0
    vals = np.abs(np.asarray(vals, dtype=np.float64))
    w = np.asarray(w, dtype=np.float64)
    with np.errstate(divide="ignore"):
        logf = np.log(vals)

    def log_obj(ll):
        return ll + float(np.logaddexp(0.0, _log_mean_phi(phi, logf, w, ll)))

    base = math.log(lux)
    res = minimize_scalar(log_obj, bounds=(base - 12 * math.log(10), base + math.log(2)),
                          method="bounded", options={"xatol": 1e-11})
    return math.exp(min(res.fun, log_obj(base)))


# ---------------------------------------------------------------------------
# B_p integrability


@dataclass(frozen=True)
class BpResult:
    member: bool
    symbolic: Optional[bool]
    numeric: Optional[bool]
    certificate: dict = field(default_factory=dict)

    @property
    def agree(self) -> bool:
        return self.symbolic is None or self.numeric is None or self.symbolic == self.numeric


def bp_symbolic(phi: YoungFunction, p: float) -> Optional[bool]:
    """Closed-form membership rule, or None when the family is not covered."""
    if isinstance(phi, (ExpL, ExpLPow)):
        return False
    if isinstance(phi, Associate) and phi.growth() is None:
        return False if phi.base.growth() is not None else None
    g = phi.growth()
    if g is None:
        return None
    r, s = g
    if r < p:
        return True
    if r > p:
        return False
    return s < -1


def bp_numeric(phi: YoungFunction, p: float, kmax: int = 1000, tol: float = 1e-9) -> tuple[Optional[bool], dict]:
    """Decide ``int_1^inf Phi(t) t**(-p-1) dt < inf`` numerically.

    With ``t = exp(u)`` the integrand is ``exp(log Phi(e^u) - p u)``; it is
    integrated over ``[0, 1]`` and the doubling blocks ``[2**k, 2**(k+1)]`` of
    ``u`` by Gauss-Legendre.  Convergence is declared when the increments
    contract and the geometric tail estimate drops below ``tol``; divergence
    when increments stop contracting or the partial sum overflows.
    """
    nodes, wts = np.polynomial.legendre.leggauss(48)

    def block(a, b):
        u = 0.5 * (b - a) * (nodes + 1.0) + a
        with np.errstate(over="ignore"):
            vals = np.exp(phi.log_value(u) - p * u)
        return float(0.5 * (b - a) * np.dot(wts, vals))

    total = block(0.0, 1.0)
    prev = None
    flat = 0
    for k in range(kmax):
        inc = block(2.0**k, 2.0 ** (k + 1))
        total += inc
        if not math.isfinite(total) or total > 1e300:
            return False, {"u_max": 2.0 ** (k + 1), "partial": total, "reason": "overflow"}
        if prev is not None and prev > 0:
            ratio = inc / prev
            if ratio >= 1 - 1e-6:
                flat += 1
                if flat >= 4:
                    return False, {"u_max": 2.0 ** (k + 1), "partial": total, "ratio": ratio,
                                   "reason": "increments do not contract"}
            else:
                flat = 0
                tail = inc * ratio / (1 - ratio)
                if tail < tol * max(1.0, total) and k >= 3:
                    return True, {"u_max": 2.0 ** (k + 1), "integral": total, "tail": tail, "ratio": ratio}
        elif prev == 0 and inc == 0 and k >= 3:
            return True, {"u_max": 2.0 ** (k + 1), "integral": total, "tail": 0.0}
        prev = inc
    return None, {"u_max": 2.0**kmax, "partial": total, "reason": "budget exhausted"}


def bp_check(phi: YoungFunction, p: float) -> BpResult:
    if not p > 1:
        raise ConfigError(f"B_p needs p > 1, got {p}")
    sym = bp_symbolic(phi, p)
    num, cert = bp_numeric(phi, p)
    if sym is None and num is None:
        raise IndeterminateError(f"cannot decide whether {phi.spec()} is in B_{p:g}")
    member = sym if sym is not None else num
    return BpResult(bool(member), sym, num, cert)


# ---------------------------------------------------------------------------
# generalized Hölder


def holder_pair_check(f: GridFunction, g: GridFunction, q: Cube, psi: YoungFunction) -> tuple[float, float]:
    """``(avg_q |f g|, 2 ||f||_psi ||g||_psi_bar)``."""
    from .signal import average

    lhs = average(abs(f * g), q)
    rhs = 2.0 * orlicz_norm(f, q, psi) * orlicz_norm(g, q, psi.associate())
    return lhs, rhs
