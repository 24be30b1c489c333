"""Weighted inequalities for bilinear fractional integrals, computed on dyadic meshes."""

from .dyadic import Cube, DyadicGrid
from .errors import ConfigError, GridMembershipError, IndeterminateError, NoReverseHolder, NumericError
from .signal import ExponentConfig, GridFunction, PowerWeight, make_test_family
from .sparse import SparseFamily, check_invariants, cz_select
from .verify import FamilySpec, TheoremReport, verify_theorem
from .weights import CubeScan, WeightTriple, bump_constant
from .young import LLogL, LogBump, Power, orlicz_norm, parse_young

__version__ = "0.1.0"

__all__ = [
    "Cube", "DyadicGrid", "ConfigError", "GridMembershipError", "IndeterminateError", "NoReverseHolder",
    "NumericError", "ExponentConfig", "GridFunction", "PowerWeight", "make_test_family", "SparseFamily",
    "check_invariants", "cz_select", "FamilySpec", "TheoremReport", "verify_theorem", "CubeScan",
    "WeightTriple", "bump_constant", "LLogL", "LogBump", "Power", "orlicz_norm", "parse_young",
]
