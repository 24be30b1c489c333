"""Experiment configuration files.

The format is line oriented::

    # comment
    [section]
    key = value

Sections and keys are fixed (see ``SCHEMA``).  Lists are comma separated.
Weights are ``power(a)`` (the weight ``|x|^a`` with exact cell averages),
``fixture(name)`` (a grid-function file found on the fixture search path)
or ``const``.  Young functions use the grammar of :func:`bifrac.young.parse_young`.
Every error names the file and line.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .signal import ExponentConfig, GridFunction, PowerWeight
from .verify import PAIR_MEMBERS, THEOREM_IDS, FamilySpec
from .weights import WeightTriple
from .young import parse_young

FIXTURE_ENV = "BIFRAC_FIXTURES"
PACKAGE_FIXTURES = Path(__file__).with_name("fixtures")

# section -> key -> type tag
SCHEMA = {
    "run": {"theorem": "str", "seed": "int", "exploratory": "bool"},
    "exponents": {"n": "int", "alpha": "float", "p1": "float", "p2": "float", "q": "float",
                  "r": "float?", "s": "float?", "N": "int", "m": "int", "delta": "float", "sobolev": "bool"},
    "weights": {"u": "weight", "v1": "weight", "v2": "weight", "w": "weight"},
    "young": {"phi": "young?", "psi": "young?"},
    "mesh": {"L0": "int", "L": "int", "refine": "int"},
    "family": {"members": "list", "seed": "int", "dilation": "float"},
    "output": {"out": "str?", "format": "str"},
}

_WEIGHT_RE = re.compile(r"^(power)\(\s*([-+0-9.eE]+)\s*\)$|^(fixture)\(\s*([^()\s]+)\s*\)$|^(const)$")


@dataclass(frozen=True)
class ExperimentConfig:
    theorem: str = "thmG-weak"
    seed: int = 0
    exploratory: bool = False
    exponents: ExponentConfig = field(default_factory=ExponentConfig)
    weights: tuple = (("u", "const"), ("v1", "const"), ("v2", "const"), ("w", "const"))
    phi: Optional[str] = None
    psi: Optional[str] = None
    L0: int = 2
    L: int = 6
    refine: int = 2
    family: FamilySpec = field(default_factory=FamilySpec)
    out: Optional[str] = None
    format: str = "json"
    source_dir: Optional[str] = field(default=None, compare=False)

    @property
    def n(self) -> int:
        return self.exponents.n

    @property
    def ladder(self) -> tuple[int, ...]:
        return tuple(range(self.L, self.L + self.refine))

    def weight_spec(self, name: str) -> str:
        return dict(self.weights)[name]

    def weight(self, name: str, L0: Optional[int] = None, L: Optional[int] = None):
        """Materialize one weight on the mesh ``(n, L0, L)``."""
        L0 = self.L0 if L0 is None else L0
        L = self.L if L is None else L
        spec = self.weight_spec(name)
        m = _WEIGHT_RE.match(spec)
        if m.group(1):
            return PowerWeight(float(m.group(2)), self.n, L0, L)
        if m.group(5):
            return PowerWeight(0.0, self.n, L0, L)
        path = find_fixture(m.group(4), self.source_dir)
        g = load_grid_function(path)
        if (g.n, g.L0, g.L) != (self.n, L0, L):
            raise ConfigError(f"fixture {m.group(4)} lives on mesh (n={g.n}, L0={g.L0}, L={g.L}), "
                              f"not (n={self.n}, L0={L0}, L={L})")
        return g

    def triple(self, L0: Optional[int] = None, L: Optional[int] = None) -> WeightTriple:
        return WeightTriple(self.weight("u", L0, L), self.weight("v1", L0, L), self.weight("v2", L0, L))

    def young(self, name: str):
        spec = getattr(self, name)
        return parse_young(spec) if spec is not None else None


# ---------------------------------------------------------------------------
# fixtures


def fixture_path() -> list[Path]:
    """Search order: ``$BIFRAC_FIXTURES`` entries (which replace the default), else the shipped fixtures."""
    env = os.environ.get(FIXTURE_ENV)
    if env:
        return [Path(p) for p in env.split(os.pathsep) if p]
    return [PACKAGE_FIXTURES]


def find_fixture(name: str, extra_dir: Optional[str] = None) -> Path:
    p = Path(name)
    if p.is_absolute():
        if p.exists():
            return p
        raise ConfigError(f"fixture {name} not found")
    dirs = fixture_path() + ([Path(extra_dir)] if extra_dir else [])
    for d in dirs:
        if (d / name).exists():
            return d / name
    raise ConfigError(f"fixture {name!r} not found in {[str(d) for d in dirs]}")


def load_grid_function(path) -> GridFunction:
    path = Path(path)
    if path.suffix == ".csv":
        return GridFunction.from_csv(path.read_text())
    return GridFunction.from_bytes(path.read_bytes())


def save_grid_function(f: GridFunction, path) -> None:
    path = Path(path)
    if path.suffix == ".csv":
        path.write_text(f.to_csv())
    else:
        path.write_bytes(f.to_bytes())


# ---------------------------------------------------------------------------
# parse / emit


def _convert(tag: str, raw: str, where: str):
    optional = tag.endswith("?")
    tag = tag.rstrip("?")
    if optional and raw.lower() in ("", "none"):
        return None
    try:
        if tag == "int":
            return int(raw)
        if tag == "float":
            return float(raw)
        if tag == "bool":
            low = raw.lower()
            if low in ("true", "yes", "1"):
                return True
            if low in ("false", "no", "0"):
                return False
            raise ValueError(raw)
        if tag == "list":
            return tuple(x.strip() for x in raw.split(",") if x.strip())
        if tag == "weight":
            spec = re.sub(r"\s+", "", raw)
            if not _WEIGHT_RE.match(spec):
                raise ValueError(raw)
            return spec
        if tag == "young":
            parse_young(raw)
            return raw
        return raw
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    except ValueError:
        raise ConfigError(f"{where}: cannot read {raw!r} as {tag}") from None


def parse(text: str, source: str = "<config>", source_dir: Optional[str] = None) -> ExperimentConfig:
    values: dict = {}
    lines: dict = {}
    section, section_line = None, {}
    for no, line in enumerate(text.splitlines(), 1):
        where = f"{source}:{no}"
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if s.startswith("["):
            if not s.endswith("]"):
                raise ConfigError(f"{where}: malformed section header {line.strip()!r}")
            section = s[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"{where}: unknown section [{section}]; expected one of {sorted(SCHEMA)}")
            if section in section_line:
                raise ConfigError(f"{where}: section [{section}] repeated (first at line {section_line[section]})")
            section_line[section] = no
            continue
        if "=" not in s:
            raise ConfigError(f"{where}: expected 'key = value', got {line.strip()!r}")
        if section is None:
            raise ConfigError(f"{where}: key outside any section")
        key, raw = (x.strip() for x in s.split("=", 1))
        if key not in SCHEMA[section]:
            raise ConfigError(f"{where}: unknown key {key!r} in [{section}]; expected one of {sorted(SCHEMA[section])}")
        if (section, key) in values:
            raise ConfigError(f"{where}: key {key!r} repeated in [{section}]")
        values[(section, key)] = _convert(SCHEMA[section][key], raw, where)
        lines[(section, key)] = no

    def get(sec, key, default):
        return values.get((sec, key), default)

    def anchor(sec, keys=()):
        for k in keys:
            if (sec, k) in lines:
                return f"{source}:{lines[(sec, k)]}"
        return f"{source}:{section_line.get(sec, 1)}"

    theorem = get("run", "theorem", "thmG-weak")
    if theorem not in THEOREM_IDS + ("thmG",):
        raise ConfigError(f"{anchor('run', ['theorem'])}: unknown theorem {theorem!r}")
    ex = {k: values[("exponents", k)] for k in SCHEMA["exponents"] if ("exponents", k) in values}
    try:
        exponents = ExponentConfig(**ex)
    except ConfigError as exc:
        raise ConfigError(f"{anchor('exponents')}: {exc}") from None
    members = get("family", "members", PAIR_MEMBERS)
    try:
        family = FamilySpec(members=tuple(members), seed=get("family", "seed", 0),
                            dilation=get("family", "dilation", 1.0))
    except ConfigError as exc:
        raise ConfigError(f"{anchor('family', ['members'])}: {exc}") from None
    fmt = get("output", "format", "json")
    if fmt not in ("json", "csv"):
        raise ConfigError(f"{anchor('output', ['format'])}: format must be json or csv")
    refine = get("mesh", "refine", 2)
    if refine < 1:
        raise ConfigError(f"{anchor('mesh', ['refine'])}: refine must be at least 1")
    weights = tuple((k, get("weights", k, "const")) for k in SCHEMA["weights"])
    return ExperimentConfig(
        theorem=theorem, seed=get("run", "seed", 0), exploratory=get("run", "exploratory", False),
        exponents=exponents, weights=weights, phi=get("young", "phi", None), psi=get("young", "psi", None),
        L0=get("mesh", "L0", 2), L=get("mesh", "L", 6), refine=refine, family=family,
        out=get("output", "out", None), format=fmt, source_dir=source_dir,
    )


def load(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    return parse(path.read_text(), str(path), str(path.parent))


def _emit_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(v)
    return str(v)


def emit(cfg: ExperimentConfig) -> str:
    ex = cfg.exponents
    body = {
        "run": {"theorem": cfg.theorem, "seed": cfg.seed, "exploratory": cfg.exploratory},
        "exponents": {f.name: getattr(ex, f.name) for f in fields(ex)},
        "weights": dict(cfg.weights),
        "young": {"phi": cfg.phi, "psi": cfg.psi},
        "mesh": {"L0": cfg.L0, "L": cfg.L, "refine": cfg.refine},
        "family": {"members": tuple(cfg.family.members), "seed": cfg.family.seed,
                   "dilation": float(cfg.family.dilation)},
        "output": {"out": cfg.out, "format": cfg.format},
    }
    out = []
    for sec, kv in body.items():
        out.append(f"[{sec}]")
        for k, v in kv.items():
            if sec == "exponents" and isinstance(v, int) and not isinstance(v, bool) and SCHEMA[sec][k].startswith("float"):
                v = float(v)
            out.append(f"{k} = {_emit_value(v)}")
        out.append("")
    return "\n".join(out)
