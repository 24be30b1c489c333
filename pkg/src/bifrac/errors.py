"""Exception hierarchy shared by all modules.

Validation problems (bad exponents, malformed configs, wrong grid membership)
derive from ``ValueError``; numerical failures (no reverse Hölder exponent,
undecidable integrability) derive from ``RuntimeError``.  The CLI maps the
two branches to exit codes 2 and 3.
"""


class ConfigError(ValueError):
    """An exponent or configuration hypothesis is violated."""


class GridMembershipError(ValueError):
    """The operation needs a cube that belongs to a dyadic grid."""


class NumericError(RuntimeError):
    """A numerical procedure could not reach a decision."""


class NoReverseHolder(NumericError):
    """No tested exponent gives a reverse Hölder constant under threshold."""


class IndeterminateError(NumericError):
    """Integrability could not be decided within the evaluation budget."""


class ResourceLimitError(ValueError):
    """A requested computation exceeds a documented size limit."""
