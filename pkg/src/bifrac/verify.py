"""Theorem harness: condition constants against observed inequality ratios.

A truncated computation cannot decide "finite" or "infinite", so every
verdict is a trend over a ladder of meshes or scales: drift of at most 10%
between consecutive rungs reads as stable, growth by at least 1.5x at every
rung reads as divergent, anything else is indeterminate.  Absolute
constants are reported, never asserted.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .dyadic import Cube
from .errors import ConfigError
from .operators import (CommutatorSpec, bi_alpha, bm, commutator_kernel, default_scan,
                        m_orlicz_alpha)
from .signal import (ExponentConfig, GridFunction, PowerWeight, lp_norm, make_test_family,
                     weight_power, weight_product, weight_values)
from .weights import (CubeScan, WeightTriple, ainfty_reverse_holder, ap_constant, bmo_norm,
                      bump_scan, default_bumps)
from .young import Associate, LogBump, Power, bp_check

SCHEMA_VERSION = 1

THEOREM_IDS = (
    "thmD", "thmE", "thmA", "thmB", "thmF", "thmC", "thmG-weak", "thmG-necessity", "thmH",
    "thmI", "BMtw", "BM-onevec", "steinweiss", "section10-example",
)

CSV_COLUMNS = ("theorem", "n", "alpha", "p1", "p2", "q", "r", "s", "scale", "constant", "ratio", "drift")

STABLE_DRIFT = 0.10
DIVERGENT_GROWTH = 1.5


# ---------------------------------------------------------------------------
# trends


def drift(values: Sequence[float]) -> float:
    """Largest relative change between consecutive entries."""
    vals = [float(v) for v in values]
    if len(vals) < 2:
        return 0.0
    out = 0.0
    for a, b in zip(vals, vals[1:]):
        if not (math.isfinite(a) and math.isfinite(b)) or a <= 0:
            return math.inf
        out = max(out, abs(b / a - 1.0))
    return out


def growth_factors(values: Sequence[float]) -> list[float]:
    vals = [float(v) for v in values]
    return [b / a if a > 0 else math.inf for a, b in zip(vals, vals[1:])]


def classify(values: Sequence[float]) -> str:
    """``stable``, ``divergent`` (monotone geometric in either direction) or ``indeterminate``."""
    if len(values) < 2:
        return "indeterminate"
    if any(not math.isfinite(v) for v in values):
        return "divergent"
    if drift(values) <= STABLE_DRIFT:
        return "stable"
    g = growth_factors(values)
    if all(x >= DIVERGENT_GROWTH for x in g) or all(x <= 1.0 / DIVERGENT_GROWTH for x in g):
        return "divergent"
    return "indeterminate"


# ---------------------------------------------------------------------------
# families


PAIR_MEMBERS = ("unit", "split", "small", "offset", "tent", "random")
# mesh-scale members: one factor is a four-cell indicator at the origin, so
# they probe weight singularities that fixed-size data cannot see
MESH_MEMBERS = ("cell-f", "cell-g")


@dataclass(frozen=True)
class FamilySpec:
    """A fixed, seeded corpus of ``(f, g)`` pairs rebuilt on any mesh."""

    members: tuple = PAIR_MEMBERS
    seed: int = 0
    dilation: float = 1.0

    def __post_init__(self):
        bad = [m for m in self.members if m not in PAIR_MEMBERS + MESH_MEMBERS]
        if bad:
            raise ConfigError(f"unknown family member(s) {bad}; expected some of {PAIR_MEMBERS + MESH_MEMBERS}")
        if not self.members:
            raise ConfigError("a test family needs at least one member")

    def manifest(self) -> dict:
        return {"members": list(self.members), "seed": self.seed, "dilation": self.dilation,
                "version": SCHEMA_VERSION}

    def digest(self) -> str:
        blob = json.dumps(self.manifest(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def build(self, n: int, L0: int, L: int) -> list[tuple[GridFunction, GridFunction]]:
        t = self.dilation
        kw = dict(n=n, L0=L0, L=L)

        def ind(corner, side):
            return make_test_family("indicator", {"cube": (corner * t, side * t)}, self.seed, **kw)[0]

        out = []
        for m in self.members:
            if m == "unit":
                out.append((ind(0.0, 1.0), ind(0.0, 1.0)))
            elif m == "split":
                out.append((ind(-1.0, 1.0), ind(0.0, 1.0)))
            elif m == "small":
                out.append((ind(0.0, 0.25), ind(0.0, 0.5)))
            elif m == "offset":
                out.append((ind(0.5, 0.5), ind(0.25, 0.5)))
            elif m in MESH_MEMBERS:
                tiny = make_test_family("indicator", {"cube": (0.0, 4 * 2.0**-L)}, self.seed, **kw)[0]
                out.append((tiny, ind(0.0, 1.0)) if m == "cell-f" else (ind(0.0, 1.0), tiny))
            elif m == "tent":
                f = make_test_family("tent", {"center": (0.0,) * n, "radius": t}, self.seed, **kw)[0]
                g = make_test_family("tent", {"center": (0.25 * t,) * n, "radius": 0.5 * t}, self.seed, **kw)[0]
                out.append((f, g))
            else:
                f, g = make_test_family("random-nonnegative",
                                        {"count": 2, "cube": (-t, 2 * t), "block": 3},
                                        self.seed, **kw)
                out.append((f, g))
        return out


def _on_mesh(w, like: GridFunction):
    """Bring a weight onto the mesh of ``like`` (power weights are re-meshed)."""
    if isinstance(w, PowerWeight):
        return w.on(like.L0, like.L) if (w.n, w.L0, w.L) != (like.n, like.L0, like.L) else w
    if isinstance(w, GridFunction):
        if not w.compatible(like):
            raise ConfigError("fixture weight does not live on the requested mesh")
        return w
    raise ConfigError(f"unsupported weight object {type(w).__name__}")


def triple_on(weights: WeightTriple, n: int, L0: int, L: int) -> WeightTriple:
    like = GridFunction.zeros(n, L0, L)
    return WeightTriple(_on_mesh(weights.u, like), _on_mesh(weights.v1, like), _on_mesh(weights.v2, like))


def _map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# ratios


@dataclass
class RatioResult:
    value: float
    per_pair: list
    notes: list = field(default_factory=list)


def _finish(per_pair, notes, what) -> RatioResult:
    vals = [v for v in per_pair if v is not None]
    if not vals:
        raise ConfigError(f"{what}: every pair in the family has a zero denominator")
    return RatioResult(float(max(vals)), per_pair, notes)


def strong_ratio_details(op: Callable, cfg: ExponentConfig, weights: WeightTriple, family,
                         threads: int = 1, q: Optional[float] = None) -> RatioResult:
    """``max ||op(f, g)||_{L^q(u)} / (||f||_{L^p1(v1)} ||g||_{L^p2(v2)})`` over the family."""
    if not family:
        raise ConfigError("strong_ratio needs a nonempty family")
    q = cfg.q if q is None else q
    f0 = family[0][0]
    w = triple_on(weights, f0.n, f0.L0, f0.L)
    notes = []

    def one(pair):
        f, g = pair
        den = lp_norm(f, cfg.p1, w.v1) * lp_norm(g, cfg.p2, w.v2)
        if not den > 0:
            return None
        return lp_norm(op(f, g), q, w.u) / den

    per = _map(one, list(family), threads)
    for i, v in enumerate(per):
        if v is None:
            notes.append(f"pair {i} skipped: zero denominator")
    return _finish(per, notes, "strong_ratio")


def strong_ratio(op: Callable, cfg: ExponentConfig, weights: WeightTriple, family, **kw) -> float:
    return strong_ratio_details(op, cfg, weights, family, **kw).value


def weak_level_sup(M: np.ndarray, u: np.ndarray, q: float, cell_volume: float) -> float:
    """``sup_lam lam * u({M > lam})**(1/q)`` for a cell field ``M``.

    The sup is approached as ``lam`` rises to each distinct value ``v`` of
    ``M``, where the superlevel set is ``{M >= v}``.
    """
    m = M.reshape(-1)
    uu = u.reshape(-1) * cell_volume
    order = np.argsort(-m, kind="stable")
    ms, us = m[order], np.cumsum(uu[order])
    # last index of each run of equal values
    last = np.r_[np.nonzero(np.diff(ms))[0], len(ms) - 1]
    vals = ms[last] * us[last] ** (1.0 / q)
    vals = vals[ms[last] > 0]
    return float(vals.max()) if vals.size else 0.0


def weak_ratio_details(cfg: ExponentConfig, weights: WeightTriple, family, scan: Optional[CubeScan] = None,
                       threads: int = 1) -> RatioResult:
    """``max sup_lam lam u({M^{r,s}_alpha(f,g) > lam})^{1/q} / (||f|| ||g||)``."""
    cfg.require_holder(False, "thmG")
    if not family:
        raise ConfigError("weak_ratio needs a nonempty family")
    f0 = family[0][0]
    w = triple_on(weights, f0.n, f0.L0, f0.L)
    uvals = weight_values(w.u)

    def one(pair):
        f, g = pair
        den = lp_norm(f, cfg.p1, w.v1) * lp_norm(g, cfg.p2, w.v2)
        if not den > 0:
            return None
        M = m_orlicz_alpha(f, g, Power(cfg.r), Power(cfg.s), cfg.alpha, scan=scan)
        return weak_level_sup(M.values, uvals, cfg.q, f.h**f.n) / den

    per = _map(one, list(family), threads)
    notes = [f"pair {i} skipped: zero denominator" for i, v in enumerate(per) if v is None]
    return _finish(per, notes, "weak_ratio")


def weak_ratio(cfg: ExponentConfig, weights: WeightTriple, family, **kw) -> float:
    return weak_ratio_details(cfg, weights, family, **kw).value


def control_ratio_details(num: Callable, den: Callable, q: float, w, family,
                          scan: Optional[CubeScan] = None, threads: int = 1,
                          check_ainfty: bool = True) -> RatioResult:
    """``max int |num(f,g)|^q w / int den(f,g)^q w`` over the family.

    ``w`` must pass the reverse Hölder test; otherwise :class:`NoReverseHolder`
    propagates.
    """
    if not family:
        raise ConfigError("control_ratio needs a nonempty family")
    if not q > 0:
        raise ConfigError("control_ratio needs q > 0")
    f0 = family[0][0]
    ww = _on_mesh(w, f0)
    if check_ainfty:
        ainfty_reverse_holder(ww, scan or CubeScan(f0.n, f0.L0, f0.L))
    wv = weight_values(ww)

    def one(pair):
        f, g = pair
        d = float(np.sum(np.abs(den(f, g).values) ** q * wv))
        if not d > 0:
            return None
        return float(np.sum(np.abs(num(f, g).values) ** q * wv)) / d

    per = _map(one, list(family), threads)
    notes = [f"pair {i} skipped: zero denominator" for i, v in enumerate(per) if v is None]
    return _finish(per, notes, "control_ratio")


def control_ratio(num: Callable, den: Callable, q: float, w, family, **kw) -> float:
    return control_ratio_details(num, den, q, w, family, **kw).value


# ---------------------------------------------------------------------------
# reports


@dataclass
class TheoremReport:
    theorem: str
    cfg: Optional[ExponentConfig]
    condition: dict = field(default_factory=dict)
    ladder: list = field(default_factory=list)
    max_ratio: Optional[float] = None
    trend: dict = field(default_factory=dict)
    passed: Optional[bool] = None
    provenance: dict = field(default_factory=dict)
    sections: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if self.theorem not in THEOREM_IDS:
            raise ConfigError(f"unknown theorem id {self.theorem!r}; expected one of {THEOREM_IDS}")

    def to_dict(self) -> dict:
        return _clean({
            "schema": SCHEMA_VERSION,
            "theorem": self.theorem,
            "cfg": self.cfg.to_dict() if self.cfg is not None else None,
            "condition": self.condition,
            "ladder": self.ladder,
            "max_ratio": self.max_ratio,
            "trend": self.trend,
            "passed": self.passed,
            "provenance": self.provenance,
            "sections": self.sections,
            "notes": self.notes,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True, allow_nan=True)

    def csv_rows(self) -> list[dict]:
        c = self.cfg.to_dict() if self.cfg is not None else {}
        d = self.trend.get("ratio_drift", "")
        rows = []
        for rung in self.ladder:
            rows.append({
                "theorem": self.theorem, "n": c.get("n", ""), "alpha": c.get("alpha", ""),
                "p1": c.get("p1", ""), "p2": c.get("p2", ""), "q": c.get("q", ""),
                "r": c.get("r", ""), "s": c.get("s", ""), "scale": rung.get("scale", ""),
                "constant": rung.get("constant", ""), "ratio": rung.get("ratio", ""), "drift": d,
            })
        return rows

    def to_csv(self) -> str:
        return reports_to_csv([self])


def reports_to_csv(reports: Sequence[TheoremReport]) -> str:
    buf = io.StringIO()
    wr = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    wr.writeheader()
    for r in reports:
        for row in r.csv_rows():
            wr.writerow({k: _fmt(v) for k, v in row.items()})
    return buf.getvalue()


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _weights_provenance(weights: WeightTriple) -> dict:
    return weights.describe()


# ---------------------------------------------------------------------------
# theorem drivers

_CONDITION_KIND = {
    "thmD": "thmD", "thmE": "thmE", "thmA": "thmA", "thmB": "thmB", "thmG-weak": "eq21",
    "thmH": "eq22", "thmI": "onevec", "BMtw": "BMtw", "BM-onevec": "onevecwp",
}


def default_symbols(n: int, L0: int, L: int, N: int) -> list[GridFunction]:
    """BMO symbols for commutator checks: ``log|x|`` style, capped at the mesh scale."""
    base = make_test_family("log-weight", {"R": 2.0 ** L0}, 0, n=n, L0=L0, L=L)[0]
    out = []
    for i in range(N):
        c = base.centers()
        shift = 0.25 * i
        r = np.abs(c - shift) if n == 1 else np.linalg.norm(c - shift, axis=-1)
        out.append(base.like(np.log(np.maximum(r, base.h / 2))))
    return out


def one_weight_triple(w1, w2, cfg: ExponentConfig, q: Optional[float] = None) -> WeightTriple:
    """``(w1^{q/p1} w2^{q/p2}, w1, w2)``; symbolic when both are power weights."""
    q = cfg.q if q is None else q
    if isinstance(w1, PowerWeight) and isinstance(w2, PowerWeight):
        u = PowerWeight(w1.a * q / cfg.p1 + w2.a * q / cfg.p2, w1.n, w1.L0, w1.L)
    else:
        u = weight_product((w1, q / cfg.p1), (w2, q / cfg.p2))
    return WeightTriple(u, w1, w2)


def _operator(theorem: str, cfg: ExponentConfig, symbols):
    a = cfg.alpha
    if theorem in ("thmD", "thmE"):
        return lambda f, g: bi_alpha(f, g, a)
    if theorem in ("thmA", "thmB"):
        slots = [1] * cfg.m + [2] * (cfg.N - cfg.m)
        return lambda f, g: commutator_kernel(CommutatorSpec(symbols(f), slots), f, g, a)
    if theorem in ("thmH", "thmI"):
        return lambda f, g: m_orlicz_alpha(f, g, Power(cfg.r), Power(cfg.s), a)
    if theorem in ("BMtw", "BM-onevec"):
        return lambda f, g: bm(f, g)
    raise ConfigError(f"no strong-type operator for {theorem}")


def bp_hypotheses(cfg: ExponentConfig, kind: str = "eq22") -> dict:
    """B_p checks on the associates of the default bumps (``psi-bar in B_{q'}`` etc.)."""
    b = default_bumps(kind, cfg)
    qq = cfg.p if kind == "BMtw" else cfg.q
    targets = {"psi": qq / (qq - 1.0), "phi1": cfg.p1 / cfg.r, "phi2": cfg.p2 / cfg.s}
    out = {}
    for name, target in targets.items():
        res = bp_check(Associate(b[name]), target)
        out[name] = {"young": b[name].spec(), "target_p": target, "member": res.member,
                     "symbolic": res.symbolic, "numeric": res.numeric}
    return out


def verify_theorem(theorem: str, cfg: ExponentConfig, weights: Optional[WeightTriple] = None, *,
                   L0: int = 2, ladder: Sequence[int] = (6, 7), family: Optional[FamilySpec] = None,
                   scan_kw: Optional[dict] = None, threads: int = 1, w=None,
                   q_values: Optional[Sequence[float]] = None, exploratory: bool = False) -> TheoremReport:
    """Run one theorem over a refinement ladder of meshes.

    Strong and weak theorems record the condition constant and the observed
    ratio at each rung; control theorems (``thmF``, ``thmC``) record the
    control ratio for every ``q`` in ``q_values``.
    """
    if theorem not in THEOREM_IDS:
        raise ConfigError(f"unknown theorem id {theorem!r}; expected one of {THEOREM_IDS}")
    if theorem == "thmG-necessity":
        return thmg_necessity(cfg, weights, L0=L0, L=ladder[-1], scan_kw=scan_kw)
    if len(ladder) < 2:
        raise ConfigError("a verification ladder needs at least two resolutions")
    family = family or FamilySpec()
    open_case = cfg.p <= 1 <= cfg.q and not (cfg.p <= cfg.q <= 1)
    if open_case and not exploratory:
        raise ConfigError("the case p <= 1 <= q is open; rerun in exploratory mode")
    rep = TheoremReport(theorem, cfg)
    rep.provenance = {"family": family.manifest(), "family_digest": family.digest(),
                      "L0": L0, "ladder": list(ladder)}
    if weights is not None:
        rep.provenance["weights"] = _weights_provenance(weights)
    scan_kw = dict(scan_kw or {})

    if theorem in ("thmF", "thmC"):
        return _control_report(rep, theorem, cfg, w, L0, ladder, family, q_values or (cfg.q,), threads)

    if weights is None:
        raise ConfigError(f"{theorem} needs a weight triple")
    kind = _CONDITION_KIND[theorem]
    if theorem == "thmH":
        rep.sections["bp"] = bp_hypotheses(cfg, "eq22")
    if theorem == "BMtw":
        rep.sections["bp"] = bp_hypotheses(cfg, "BMtw")
    constants, ratios = [], []
    for L in ladder:
        wt = triple_on(weights, cfg.n, L0, L)
        fam = family.build(cfg.n, L0, L)
        scan = CubeScan(cfg.n, L0, L, **scan_kw)
        if exploratory:
            const = float("nan")
        else:
            const = bump_scan(kind, wt, cfg, scan=scan).constant
        bnorm = 1.0
        if theorem in ("thmA", "thmB"):
            syms = default_symbols(cfg.n, L0, L, cfg.N)
            bnorm = math.prod(bmo_norm(b, scan) for b in syms)
            symbols = lambda f, syms=syms: syms  # noqa: E731
        else:
            symbols = None
        if theorem == "thmG-weak":
            res = weak_ratio_details(cfg, wt, fam, threads=threads)
        else:
            q = cfg.p if theorem in ("BMtw", "BM-onevec") else cfg.q
            res = strong_ratio_details(_operator(theorem, cfg, symbols), cfg, wt, fam, threads=threads, q=q)
        ratio = res.value / bnorm
        constants.append(const)
        ratios.append(ratio)
        rep.ladder.append({"scale": L, "constant": const, "ratio": ratio, "per_pair": res.per_pair})
        rep.notes.extend(res.notes)
    rep.max_ratio = max(ratios)
    rep.trend = {"constant_drift": drift(constants) if not exploratory else None,
                 "constant_class": classify(constants) if not exploratory else None,
                 "ratio_drift": drift(ratios), "ratio_class": classify(ratios)}
    rep.condition = {"kind": kind, "values": constants}
    if exploratory:
        rep.notes.append("exploratory: open exponent range, trend data only")
        rep.passed = None
    elif rep.trend["constant_class"] == "stable":
        rep.passed = rep.trend["ratio_drift"] < STABLE_DRIFT
    else:
        rep.notes.append("condition constant not stable on this ladder; ratio recorded without a verdict")
    return rep


def _control_report(rep, theorem, cfg, w, L0, ladder, family, q_values, threads):
    if w is None:
        raise ConfigError(f"{theorem} needs an A_infinity weight w")
    r, s = cfg.r, cfg.s
    if r is None:
        raise ConfigError(f"requires a Hölder pair (r, s) ({theorem})")
    a = cfg.alpha
    if theorem == "thmF":
        num = lambda f, g: bi_alpha(f, g, a)  # noqa: E731
        phi, psi = Power(r), Power(s)
    else:
        phi = LogBump(r, cfg.m * r) if cfg.m else Power(r)
        psi = LogBump(s, (cfg.N - cfg.m) * s) if cfg.N - cfg.m else Power(s)
    rep.provenance["w"] = w.describe() if isinstance(w, PowerWeight) else "grid"
    rep.condition = {"phi": phi.spec(), "psi": psi.spec()}
    by_q = {}
    for L in ladder:
        fam = family.build(cfg.n, L0, L)
        scan = default_scan(fam[0][0])
        if theorem == "thmC":
            syms = default_symbols(cfg.n, L0, L, cfg.N)
            bq = math.prod(bmo_norm(b, CubeScan(cfg.n, L0, L)) for b in syms)
            slots = [1] * cfg.m + [2] * (cfg.N - cfg.m)
            num = lambda f, g, syms=syms: commutator_kernel(CommutatorSpec(syms, slots), f, g, a)  # noqa: E731
        else:
            bq = 1.0
        cache = {}

        def den(f, g):
            key = id(f)
            if key not in cache:
                cache[key] = m_orlicz_alpha(f, g, phi, psi, a, scan=scan)
            return cache[key]

        numcache = {}

        def num_c(f, g):
            key = id(f)
            if key not in numcache:
                numcache[key] = num(f, g)
            return numcache[key]

        for i, q in enumerate(q_values):
            res = control_ratio_details(num_c, den, q, w, fam, scan=CubeScan(cfg.n, L0, L),
                                        threads=1, check_ainfty=(i == 0))
            by_q.setdefault(q, []).append(res.value / bq**q)
            rep.ladder.append({"scale": L, "q": q, "ratio": res.value / bq**q, "constant": None})
    rep.trend = {f"q={q:g}": {"ratio_drift": drift(v), "ratio_class": classify(v)} for q, v in by_q.items()}
    rep.trend["ratio_drift"] = max(drift(v) for v in by_q.values())
    rep.max_ratio = max(max(v) for v in by_q.values())
    rep.passed = all(math.isfinite(x) for v in by_q.values() for x in v) and rep.trend["ratio_drift"] < STABLE_DRIFT
    return rep


# ---------------------------------------------------------------------------
# the weak-type characterization, both directions


def necessity_pair(weights: WeightTriple, cfg: ExponentConfig, cube: Cube, like: GridFunction):
    """``f = v1^{-1/(p1-r)} chi_Q``, ``g = v2^{-1/(p2-s)} chi_Q`` on the mesh of ``like``."""
    w = triple_on(weights, like.n, like.L0, like.L)
    chi = make_test_family("indicator", {"cube": (cube.corner, cube.side)}, 0,
                           n=like.n, L0=like.L0, L=like.L)[0]
    f = chi * weight_power(w.v1, -1.0 / (cfg.p1 - cfg.r))
    g = chi * weight_power(w.v2, -1.0 / (cfg.p2 - cfg.s))
    return f, g


def necessity_cubes(n: int, L0: int, L: int, per_size: int = 3, max_cells: Optional[int] = None) -> list[Cube]:
    """Aligned test cubes: at each power-of-two size, one touching the origin and two away."""
    N = 2 ** (L0 + L + 1)
    h = 2.0**-L
    W = 2.0**L0
    out = []
    k = 1
    while k <= (max_cells or N // 2):
        side = k * h
        cands = [0.0, -side, 0.5 * W - side, -W]
        seen = set()
        for c in cands:
            c = max(-W, min(W - side, math.floor(c / h) * h))
            if c in seen:
                continue
            seen.add(c)
            out.append(Cube((c,) * n, side))
            if len(seen) == per_size:
                break
        k *= 2
    return out


def thmg_necessity(cfg: ExponentConfig, weights: WeightTriple, *, L0: int = 2, L: int = 6,
                   scan_kw: Optional[dict] = None, slack: float = 0.05,
                   cubes: Optional[Sequence[Cube]] = None) -> TheoremReport:
    """Per-cube check of ``condition(Q) <= 2 * weak ratio estimate * (1 + slack)``.

    The condition value uses exact cell averages of the power weights; the
    weak ratio comes from the discrete maximal field of the test pair at
    ``lam = (1/2) |Q|^{alpha/n} (avg f^r)^{1/r} (avg g^s)^{1/s}``.
    """
    cfg.require_holder(False, "thmG")
    if weights is None:
        raise ConfigError("thmG-necessity needs a weight triple")
    like = GridFunction.zeros(cfg.n, L0, L)
    wt = triple_on(weights, cfg.n, L0, L)
    scan = CubeScan(cfg.n, L0, L, odd=True, **(scan_kw or {}))
    rep = TheoremReport("thmG-necessity", cfg)
    rep.provenance = {"weights": _weights_provenance(weights), "L0": L0, "L": L}
    r, s, p1, p2, q = cfg.r, cfg.s, cfg.p1, cfg.p2, cfg.q
    uvals = weight_values(wt.u)
    a1 = weight_power(wt.v1, -r / (p1 - r)) if p1 > r else None
    a2 = weight_power(wt.v2, -s / (p2 - s)) if p2 > s else None
    rows, worst = [], 0.0
    for Q in cubes or necessity_cubes(cfg.n, L0, L):
        corner, side = np.array([Q.corner]), np.array([Q.side])
        A1 = a1.average_many(corner, side)[0] if a1 is not None else None
        A2 = a2.average_many(corner, side)[0] if a2 is not None else None
        Uq = wt.u.pow(1.0).average_many(corner, side)[0] if isinstance(wt.u, PowerWeight) else \
            wt.u.average_many(corner, side)[0]
        if A1 is None or A2 is None:
            raise ConfigError("the necessity test functions need p1 > r and p2 > s")
        cond = (Q.volume ** cfg.scale_exponent * Uq ** (1 / q)
                * A1 ** ((p1 - r) / (p1 * r)) * A2 ** ((p2 - s) / (p2 * s)))
        f, g = necessity_pair(wt, cfg, Q, like)
        den = lp_norm(f, p1, wt.v1) * lp_norm(g, p2, wt.v2)
        M = m_orlicz_alpha(f, g, Power(r), Power(s), cfg.alpha, scan=scan)
        fr = (f.pow(r) if r != 1 else f).average_many(corner, side)[0] ** (1 / r)
        gs = (g.pow(s) if s != 1 else g).average_many(corner, side)[0] ** (1 / s)
        lam = 0.5 * Q.side ** cfg.alpha * fr * gs
        mass = float(np.sum(uvals[M.values > lam]) * like.h**like.n)
        at_lam = lam * mass ** (1 / q) / den
        weak = weak_level_sup(M.values, uvals, q, like.h**like.n) / den
        ok = cond <= 2.0 * max(at_lam, weak) * (1.0 + slack)
        worst = max(worst, cond / (2.0 * max(at_lam, weak)))
        rows.append({"cube": Q.to_dict(), "condition": cond, "ratio_at_lambda": at_lam,
                     "weak_ratio": weak, "ok": bool(ok)})
    rep.sections["necessity"] = {"cubes": rows, "worst_condition_over_2ratio": worst, "slack": slack}
    rep.condition = {"kind": "eq21", "max_over_cubes": max(r_["condition"] for r_ in rows)}
    rep.max_ratio = max(r_["weak_ratio"] for r_ in rows)
    rep.passed = all(r_["ok"] for r_ in rows)
    return rep


def thmg_report(cfg: ExponentConfig, weights: WeightTriple, *, L0: int = 2, ladder: Sequence[int] = (6, 7),
                family: Optional[FamilySpec] = None, threads: int = 1) -> TheoremReport:
    """Both directions of the weak-type characterization in one report."""
    suff = verify_theorem("thmG-weak", cfg, weights, L0=L0, ladder=ladder, family=family, threads=threads)
    nec = thmg_necessity(cfg, weights, L0=L0, L=ladder[0])
    rep = TheoremReport("thmG-weak", cfg)
    rep.condition = suff.condition
    rep.ladder = suff.ladder
    rep.max_ratio = suff.max_ratio
    rep.trend = suff.trend
    rep.provenance = suff.provenance
    rep.sections = {"sufficiency": {"passed": suff.passed, "trend": suff.trend},
                    "necessity": dict(nec.sections["necessity"], passed=nec.passed)}
    rep.passed = bool(suff.passed) and bool(nec.passed)
    rep.notes = suff.notes + nec.notes
    return rep


# ---------------------------------------------------------------------------
# Stein-Weiss


@dataclass(frozen=True)
class SteinWeissTuple:
    alpha: float
    beta: float
    gamma1: float
    gamma2: float
    p1: float
    p2: float
    q: float
    n: int = 1

    @property
    def p(self) -> float:
        return 1.0 / (1.0 / self.p1 + 1.0 / self.p2)

    def flags(self) -> dict:
        n, p, q = self.n, self.p, self.q
        balance = self.alpha + self.beta + self.gamma1 + self.gamma2 - (n + n / q - n / p)
        return {
            "beta_lt_n_over_q": self.beta < n / q,
            "gamma1_bound": self.gamma1 < (p - 1) * n / self.p1,
            "gamma2_bound": self.gamma2 < (p - 1) * n / self.p2,
            "balance": abs(balance) < 1e-12,
            "balance_defect": balance,
            "nonnegative_sum": self.beta + self.gamma1 + self.gamma2 >= 0,
            "p_le_q": 1 < p <= q,
        }

    def config(self) -> ExponentConfig:
        p = self.p
        return ExponentConfig(n=self.n, alpha=self.n - self.alpha, p1=self.p1, p2=self.p2, q=self.q,
                              r=self.p1 / p, s=self.p2 / p)

    def weights(self, L0: int, L: int) -> WeightTriple:
        return WeightTriple(PowerWeight(-self.beta * self.q, self.n, L0, L),
                            PowerWeight(self.p1 * self.gamma1, self.n, L0, L),
                            PowerWeight(self.p2 * self.gamma2, self.n, L0, L))


def dilation_sizes(n_cells: int, scales: int = 4, spacing: int = 16) -> list[int]:
    """``scales`` cube sizes (in cells) spaced by ``spacing``, largest at most half the box.

    The smallest size is at least ``spacing`` cells: a one-cell cube cannot
    straddle the origin, so it sees a smaller sup than its dilates do.
    """
    top = n_cells // 2
    sizes = [top // spacing**j for j in range(scales)][::-1]
    if sizes[0] < spacing:
        raise ConfigError("mesh too coarse for the requested dilation ladder")
    return sizes


def trilinear_ratio(t: SteinWeissTuple, L0: int, L: int, sides: Sequence[float] = (0.25, 0.5, 1.0)) -> dict:
    """The double-integral form over ``||f||_p1 ||g||_p2 ||h||_q'`` for indicator data.

    Uses the identity ``form = int BI_{n-alpha}(f |x|^-g1, g |x|^-g2) h |x|^-beta``.
    """
    n = t.n
    out = {}
    cfg_alpha = n - t.alpha
    if not 0 < cfg_alpha < n:
        return {"skipped": "alpha outside (0, n)"}
    w1 = PowerWeight(-t.gamma1, n, L0, L).pow(1.0)
    w2 = PowerWeight(-t.gamma2, n, L0, L).pow(1.0)
    wb = PowerWeight(-t.beta, n, L0, L).pow(1.0)
    qc = t.q / (t.q - 1.0) if t.q > 1 else math.inf
    for side in sides:
        for label, corner in (("origin", 0.0), ("offset", side)):
            chi = make_test_family("indicator", {"cube": (corner, side)}, 0, n=n, L0=L0, L=L)[0]
            B = bi_alpha(chi * w1, chi * w2, cfg_alpha)
            form = float(np.sum(B.values * chi.values * wb.values) * chi.h**n)
            hn = lp_norm(chi, qc) if math.isfinite(qc) else 1.0
            den = lp_norm(chi, t.p1) * lp_norm(chi, t.p2) * hn
            out[f"{label}:{side:g}"] = form / den
    return out


def steinweiss_check(exponents, *, L0: int = 2, L: int = 14, scales: int = 4, spacing: int = 16,
                     trilinear: bool = True, tri_L: int = 7) -> TheoremReport:
    """Flag the exponent conditions and measure the Eq.-10.5 constant per dilation scale."""
    t = exponents if isinstance(exponents, SteinWeissTuple) else SteinWeissTuple(*exponents)
    flags = t.flags()
    rep = TheoremReport("steinweiss", None)
    rep.sections["flags"] = flags
    rep.provenance = {"tuple": {k: getattr(t, k) for k in ("alpha", "beta", "gamma1", "gamma2", "p1", "p2", "q", "n")},
                      "L0": L0, "L": L, "spacing": spacing}
    try:
        cfg = t.config()
    except ConfigError as exc:
        rep.notes.append(f"condition not computed: {exc}")
        rep.passed = False
        return rep
    rep.cfg = cfg
    N = 2 ** (L0 + L + 1)
    sizes = dilation_sizes(N, scales, spacing)
    scan = CubeScan(t.n, L0, L, sizes=tuple(sizes))
    res = bump_scan("eq105", t.weights(L0, L), cfg, scan=scan)
    h = 2.0**-L
    per = [res.per_scale[k * h] for k in sizes]
    cls = classify(per)
    rep.ladder = [{"scale": k * h, "constant": v, "ratio": None} for k, v in zip(sizes, per)]
    rep.condition = {"kind": "eq105", "constant": res.constant, "per_scale": per, "class": cls}
    rep.trend = {"constant_drift": drift(per), "constant_class": cls,
                 "growth": growth_factors(per)}
    if trilinear:
        rep.sections["trilinear"] = trilinear_ratio(t, L0, tri_L)
    admissible = all(flags[k] for k in ("beta_lt_n_over_q", "gamma1_bound", "gamma2_bound",
                                        "balance", "nonnegative_sum", "p_le_q"))
    rep.sections["admissible"] = admissible
    # the gate passes when admissibility and the measured trend agree
    rep.passed = (cls == "stable") if admissible else (cls == "divergent")
    return rep


# ---------------------------------------------------------------------------
# the power-weight example for BM


def section10_example(alpha: float, beta: float, p1: float, p2: float, *, n: int = 1,
                      L0s: Sequence[int] = (1, 2, 3, 4), depth: int = 3) -> TheoremReport:
    """``K`` for ``(|x|^alpha, |x|^beta)`` next to the separate ``A_p`` constants, over ``W = 2^L0``.

    Each rung doubles ``W`` and halves ``h`` together (``L = L0 + depth``).
    """
    p = 1.0 / (1.0 / p1 + 1.0 / p2)
    cfg = ExponentConfig(n=n, alpha=0.0, p1=p1, p2=p2, q=p, r=p1 / p, s=p2 / p)
    rep = TheoremReport("section10-example", cfg)
    window = {
        "alpha_lt_n(p-1)": alpha < n * (p - 1),
        "beta_lt_n(p-1)": beta < n * (p - 1),
        "weighted_sum_gt_-n": -n < p * alpha / p1 + p * beta / p2,
    }
    rep.sections["window"] = window
    Ks, A1, A2 = [], [], []
    for L0 in L0s:
        L = L0 + depth
        w1, w2 = PowerWeight(alpha, n, L0, L), PowerWeight(beta, n, L0, L)
        scan = CubeScan(n, L0, L)
        Ks.append(bump_scan("onevecwp", WeightTriple(w1, w1, w2), cfg, scan=scan).constant)
        A1.append(ap_constant(w1, p, scan))
        A2.append(ap_constant(w2, p, scan))
        rep.ladder.append({"scale": 2.0**L0, "constant": Ks[-1], "ratio": None,
                           "ap_w1": A1[-1], "ap_w2": A2[-1]})
    rep.condition = {"kind": "onevecwp", "K": Ks, "ap_w1": A1, "ap_w2": A2}
    rep.trend = {"K_drift": drift(Ks), "K_class": classify(Ks),
                 "ap_w1_growth": growth_factors(A1), "ap_w1_class": classify(A1),
                 "ap_w2_growth": growth_factors(A2), "ap_w2_class": classify(A2)}
    k_ok = rep.trend["K_drift"] <= STABLE_DRIFT
    rep.sections["headline"] = {
        "K_stable": k_ok,
        "ap_w1_diverges": all(g >= DIVERGENT_GROWTH for g in rep.trend["ap_w1_growth"]),
        "ap_w2_diverges": all(g >= DIVERGENT_GROWTH for g in rep.trend["ap_w2_growth"]),
    }
    rep.passed = k_ok and all(window.values())
    rep.provenance = {"w1": f"|x|^{alpha:g}", "w2": f"|x|^{beta:g}", "L0s": list(L0s), "depth": depth}
    return rep


__all__ = [
    "THEOREM_IDS", "CSV_COLUMNS", "PAIR_MEMBERS", "MESH_MEMBERS", "FamilySpec", "TheoremReport", "RatioResult", "SteinWeissTuple",
    "classify", "drift", "growth_factors", "strong_ratio", "strong_ratio_details", "weak_ratio",
    "weak_ratio_details", "weak_level_sup", "control_ratio", "control_ratio_details",
    "verify_theorem", "thmg_necessity", "thmg_report", "steinweiss_check", "section10_example",
    "trilinear_ratio", "one_weight_triple", "default_symbols", "bp_hypotheses", "reports_to_csv",
    "necessity_cubes", "necessity_pair", "dilation_sizes",
]
