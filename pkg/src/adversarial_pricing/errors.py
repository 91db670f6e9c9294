"""Exception hierarchy shared by all engines.

Two families matter to callers: ``ValidationError`` for malformed inputs and
``EngineError`` for well-formed requests the numerics refuse (size caps,
infeasible measures, unstable grids). The CLI maps them to distinct exit codes.
"""


class PricingError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(PricingError, ValueError):
    """Input violates a documented precondition."""


class DomainError(ValidationError):
    """Argument outside the function's domain (negative price, bad grid, ...)."""


class ShapeMismatch(ValidationError):
    """Payoff shape is not the one the requested fast path requires."""


class EngineError(PricingError):
    """Numerical or configuration failure inside an engine."""


class NoRiskNeutralMeasure(EngineError):
    """Support does not straddle zero, so no zero-mean measure exists."""


class SizeLimit(EngineError):
    """Exact computation requested beyond its hard size cap."""


class JumpFeasibility(EngineError):
    """Jump parameters leave no risk-neutral weights inside (0, 1)."""


class ConfigurationError(EngineError):
    """Grid or solver configuration is unusable (e.g. CFL violation)."""
