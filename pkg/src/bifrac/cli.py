"""``bifrac`` command line.

Exit status: 0 on success, 2 when an input or hypothesis is invalid, 3 when
a numeric precondition fails (for example no reverse Hölder exponent).
Artifacts go to ``--out`` when given, otherwise to stdout; the one-line
summary goes to stdout, or to stderr when the artifact occupies stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from . import config as cfgmod
from .dyadic import Cube, DyadicGrid
from .errors import ConfigError
from .operators import CommutatorSpec, bi_alpha, bi_alpha_at, commutator_direct, commutator_kernel, m_orlicz_alpha
from .signal import ExponentConfig, GridFunction, lp_norm
from .sparse import check_invariants, cz_select
from .verify import (SteinWeissTuple, TheoremReport, default_symbols, reports_to_csv, section10_example,
                     steinweiss_check, thmg_report, verify_theorem)
from .weights import CubeScan, ainfty_reverse_holder, ap_constant, bump_scan
from .young import LLogL, orlicz_norm, orlicz_norm_prime, orlicz_norm_samples, parse_young

SUBCOMMANDS = ("orlicz", "bi-alpha", "maximal", "commutator", "weights", "sparse", "verify", "sweep")
DEFAULT_DATA = "indicator.csv"


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="experiment config file")
    p.add_argument("--out", help="artifact path (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=1, help="cap on worker threads")
    p.add_argument("--refine", type=int, default=None, metavar="K", help="run the ladder L, ..., L+K-1")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bifrac", description="Weighted bilinear fractional integral experiments.")
    sub = ap.add_subparsers(dest="cmd", required=True, metavar="{" + ",".join(SUBCOMMANDS) + "}")

    p = sub.add_parser("orlicz", help="Orlicz average of an indicator or a fixture on a cube")
    _common(p)
    p.add_argument("--phi", required=True)
    p.add_argument("--indicator", type=float, help="|E|/|Q| for f = chi_E on Q")
    p.add_argument("--fixture")
    p.add_argument("--cube", help="corner,side (default 0,1)")
    p.add_argument("--prime", action="store_true", help="also report the Orlicz (prime) norm")

    p = sub.add_parser("bi-alpha", help="bilinear fractional integral of two fixtures")
    _common(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--f", default=DEFAULT_DATA)
    p.add_argument("--g", default=DEFAULT_DATA)
    p.add_argument("--x", type=float, help="evaluate exactly at one point (n = 1, piecewise-constant data)")

    p = sub.add_parser("maximal", help="M^{Phi,Psi}_alpha of two fixtures")
    _common(p)
    p.add_argument("--phi", default="power(1)")
    p.add_argument("--psi", default="power(1)")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--f", default=DEFAULT_DATA)
    p.add_argument("--g", default=DEFAULT_DATA)

    p = sub.add_parser("commutator", help="iterated commutator, both routes")
    _common(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--N", type=int, default=1)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--f", default=DEFAULT_DATA)
    p.add_argument("--g", default=DEFAULT_DATA)

    p = sub.add_parser("weights", help="weight characteristics of the configured weights")
    _common(p)
    p.add_argument("--kind", required=True, help="a bump kind, or ap / ainfty")
    p.add_argument("--p", type=float, default=2.0, help="exponent for --kind ap")
    p.add_argument("--weight", default="u", help="which weight for ap / ainfty")

    p = sub.add_parser("sparse", help="CZ-selected sparse family of a fixture pair")
    _common(p)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--grid", default="t0", help="t0 / t3 per axis, e.g. t0t3")
    p.add_argument("--f", default=DEFAULT_DATA)
    p.add_argument("--g", default=None)
    p.add_argument("--route", choices=("product", "holder"), default="product")

    p = sub.add_parser("verify", help="run a theorem harness")
    _common(p)
    p.add_argument("--theorem")
    p.add_argument("--tuple", help="steinweiss: alpha,beta,gamma1,gamma2,p1,p2,q")
    p.add_argument("--powers", help="section10-example: alpha,beta")

    p = sub.add_parser("sweep", help="verify over a list of values of one exponent")
    _common(p)
    p.add_argument("--theorem")
    p.add_argument("--param", required=True)
    p.add_argument("--values", required=True)
    return ap


# ---------------------------------------------------------------------------


def _load_config(args) -> Optional[cfgmod.ExperimentConfig]:
    if not args.config:
        return None
    c = cfgmod.load(args.config)
    if args.seed is not None:
        c = replace(c, seed=args.seed, family=replace(c.family, seed=args.seed))
    if args.refine is not None:
        if args.refine < 1:
            raise ConfigError("--refine needs K >= 1")
        c = replace(c, refine=args.refine)
    return c


def _data(name: str, c: Optional[cfgmod.ExperimentConfig]) -> GridFunction:
    return cfgmod.load_grid_function(cfgmod.find_fixture(name, c.source_dir if c else None))


def _fmt(args, c) -> str:
    return args.format or (c.format if c else "json")


def _emit(args, c, payload: dict, summary: str, csv_text: Optional[str] = None) -> None:
    fmt = _fmt(args, c)
    if fmt == "csv":
        if csv_text is None:
            raise ConfigError(f"{args.cmd} has no CSV form; use --format json")
        text = csv_text
    else:
        text = json.dumps(payload, indent=1, sort_keys=True) + "\n"
    out = args.out or (c.out if c else None)
    if out:
        Path(out).write_text(text)
        print(summary)
    else:
        sys.stdout.write(text)
        print(summary, file=sys.stderr)


def _cmd_orlicz(args, c):
    phi = parse_young(args.phi)
    if args.indicator is not None:
        t = args.indicator
        if not 0 <= t <= 1:
            raise ConfigError("--indicator is a fraction |E|/|Q| in [0, 1]")
        norm = orlicz_norm_samples(np.array([1.0, 0.0]), np.array([t, 1.0 - t]), phi)
        payload = {"phi": phi.spec(), "fraction": t, "norm": norm}
        if args.prime:
            from .young import orlicz_norm_prime_samples
            payload["prime"] = orlicz_norm_prime_samples(np.array([1.0, 0.0]), np.array([t, 1.0 - t]), phi)
    else:
        if not args.fixture:
            raise ConfigError("orlicz needs --indicator or --fixture")
        f = _data(args.fixture, c)
        corner, side = _floats(args.cube or "0,1")
        Q = Cube((corner,) * f.n, side)
        norm = orlicz_norm(f, Q, phi)
        payload = {"phi": phi.spec(), "fixture": args.fixture, "cube": Q.to_dict(), "norm": norm}
        if args.prime:
            payload["prime"] = orlicz_norm_prime(f, Q, phi)
    if args.out:
        _emit(args, c, payload, f"{norm!r}")
    else:
        print(repr(norm))


def _field_csv(F: GridFunction) -> str:
    return F.to_csv()


def _cmd_bi_alpha(args, c):
    f, g = _data(args.f, c), _data(args.g, c)
    B = bi_alpha(f, g, args.alpha)
    payload = {"alpha": args.alpha, "f": args.f, "g": args.g, "max": float(B.values.max()),
               "integral": B.integral()}
    summary = f"bi-alpha alpha={args.alpha:g} max={payload['max']:.6g}"
    if args.x is not None:
        payload["x"] = args.x
        payload["value"] = bi_alpha_at(f, g, args.alpha, args.x)
        summary += f" value({args.x:g})={payload['value']:.10g}"
    _emit(args, c, payload, summary, _field_csv(B))


def _cmd_maximal(args, c):
    f, g = _data(args.f, c), _data(args.g, c)
    M = m_orlicz_alpha(f, g, parse_young(args.phi), parse_young(args.psi), args.alpha)
    i = int(np.argmax(M.values))
    payload = {"phi": args.phi, "psi": args.psi, "alpha": args.alpha, "max": float(M.values.max()),
               "argmax_cell": [int(j) for j in np.unravel_index(i, M.shape)], "l2": lp_norm(M, 2.0)}
    _emit(args, c, payload, f"maximal max={payload['max']:.6g}", _field_csv(M))


def _cmd_commutator(args, c):
    f, g = _data(args.f, c), _data(args.g, c)
    if not 0 <= args.m <= args.N:
        raise ConfigError("requires 0 <= m <= N")
    syms = default_symbols(f.n, f.L0, f.L, args.N)
    spec = CommutatorSpec(syms, [1] * args.m + [2] * (args.N - args.m))
    K = commutator_kernel(spec, f, g, args.alpha)
    payload = {"alpha": args.alpha, "N": args.N, "m": args.m, "kernel_l2": lp_norm(K, 2.0)}
    summary = f"commutator N={args.N} m={args.m} l2={payload['kernel_l2']:.6g}"
    if args.N <= 4:
        D = commutator_direct(spec, f, g, args.alpha)
        scale = float(np.max(np.abs(K.values))) or 1.0
        payload["route_gap"] = float(np.max(np.abs(D.values - K.values))) / scale
        summary += f" route_gap={payload['route_gap']:.2e}"
    _emit(args, c, payload, summary, _field_csv(K))


def _cmd_weights(args, c):
    if c is None:
        raise ConfigError("weights needs --config")
    scan = CubeScan(c.n, c.L0, c.L)
    if args.kind == "ap":
        val = ap_constant(c.weight(args.weight), args.p, scan)
        payload = {"kind": "ap", "p": args.p, "weight": c.weight_spec(args.weight), "constant": val}
    elif args.kind == "ainfty":
        m, C = ainfty_reverse_holder(c.weight(args.weight), scan)
        payload = {"kind": "ainfty", "weight": c.weight_spec(args.weight), "m": m, "constant": C}
        val = C
    else:
        res = bump_scan(args.kind, c.triple(), c.exponents, scan=scan)
        val = res.constant
        payload = {"kind": args.kind, "weights": dict(c.weights), **res.to_dict()}
    _emit(args, c, payload, f"weights {args.kind} constant={val:.6g}")


def _parse_grid(name: str, n: int) -> DyadicGrid:
    parts = [name[i:i + 2] for i in range(0, len(name), 2)]
    if len(parts) == 1:
        parts = parts * n
    if len(parts) != n or any(p not in ("t0", "t3") for p in parts):
        raise ConfigError(f"grid {name!r} must be t0 or t3 per axis")
    return DyadicGrid(n, tuple(Fraction(0) if p == "t0" else Fraction(1, 3) for p in parts))


def _cmd_sparse(args, c):
    f = _data(args.f, c)
    g = _data(args.g, c) if args.g else f
    grid = _parse_grid(args.grid, f.n)
    ex = c.exponents if c else ExponentConfig(n=f.n)
    if args.route == "product":
        fam = cz_select(f, g, LLogL(ex.m), LLogL(ex.N - ex.m), args.a, grid)
    else:
        if ex.r is None:
            raise ConfigError("the Hölder route needs r and s in the config")
        fam = cz_select(f, g, LLogL(ex.m * ex.r), LLogL((ex.N - ex.m) * ex.s), args.a, grid,
                        f_power=ex.r, g_power=ex.s)
    inv = check_invariants(fam)
    payload = json.loads(fam.to_json())
    payload["invariant_violations"] = inv
    bad = sum(v for v in inv.values())
    _emit(args, c, payload, f"sparse a={args.a:g} grid={grid.name} cubes={len(fam)} violations={bad}")


def _theorem(args, c) -> str:
    t = args.theorem or (c.theorem if c else None)
    if t is None:
        raise ConfigError("no theorem given (--theorem or [run] theorem)")
    return t


def _run_verify(theorem: str, c, args) -> TheoremReport:
    if theorem == "steinweiss":
        vals = _floats(args.tuple) if getattr(args, "tuple", None) else None
        if vals is None or len(vals) != 7:
            raise ConfigError("steinweiss needs --tuple alpha,beta,gamma1,gamma2,p1,p2,q")
        return steinweiss_check(SteinWeissTuple(*vals, n=c.n if c else 1))
    if theorem == "section10-example":
        vals = _floats(args.powers) if getattr(args, "powers", None) else None
        if vals is None or len(vals) != 2:
            raise ConfigError("section10-example needs --powers alpha,beta")
        p1, p2 = (c.exponents.p1, c.exponents.p2) if c else (4.0, 4.0)
        return section10_example(vals[0], vals[1], p1, p2, n=c.n if c else 1)
    if c is None:
        raise ConfigError(f"{theorem} needs --config")
    if theorem == "thmG":
        return thmg_report(c.exponents, c.triple(), L0=c.L0, ladder=c.ladder, family=c.family,
                           threads=args.threads)
    w = c.weight("w") if theorem in ("thmF", "thmC") else None
    return verify_theorem(theorem, c.exponents, c.triple(), L0=c.L0, ladder=c.ladder, family=c.family,
                          threads=args.threads, w=w, exploratory=c.exploratory)


def _summary(rep: TheoremReport) -> str:
    verdict = {True: "pass", False: "fail", None: "no-verdict"}[rep.passed]
    mr = f"{rep.max_ratio:.6g}" if rep.max_ratio is not None else "-"
    return f"verify {rep.theorem}: {verdict} max_ratio={mr}"


def _cmd_verify(args, c):
    rep = _run_verify(_theorem(args, c), c, args)
    _emit(args, c, rep.to_dict(), _summary(rep), rep.to_csv())


def _cmd_sweep(args, c):
    if c is None:
        raise ConfigError("sweep needs --config")
    theorem = _theorem(args, c)
    names = {f for f in ExponentConfig.__dataclass_fields__}
    if args.param not in names:
        raise ConfigError(f"unknown exponent {args.param!r}; expected one of {sorted(names)}")
    reports = []
    for v in _floats(args.values):
        kind = type(getattr(c.exponents, args.param))
        val = int(v) if kind is int else v
        cc = replace(c, exponents=replace(c.exponents, **{args.param: val}))
        reports.append(_run_verify(theorem, cc, args))
    payload = {"param": args.param, "reports": [r.to_dict() for r in reports]}
    n_pass = sum(r.passed is True for r in reports)
    _emit(args, c, payload, f"sweep {theorem} over {args.param}: {n_pass}/{len(reports)} pass",
          reports_to_csv(reports))


_DISPATCH = {
    "orlicz": _cmd_orlicz, "bi-alpha": _cmd_bi_alpha, "maximal": _cmd_maximal,
    "commutator": _cmd_commutator, "weights": _cmd_weights, "sparse": _cmd_sparse,
    "verify": _cmd_verify, "sweep": _cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        c = _load_config(args)
        _DISPATCH[args.cmd](args, c)
    except ValueError as exc:
        print(f"bifrac: error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, ArithmeticError) as exc:
        print(f"bifrac: numeric failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
