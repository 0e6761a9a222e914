"""Exception types shared across the package."""


class EntroweightError(Exception):
    """Base class for all package errors."""


class ConfigError(EntroweightError, ValueError):
    """Invalid configuration or violated precondition."""


class GeometryError(ConfigError):
    """No admissible cube exists (usually: the window is too small)."""


class DegenerateWeightError(EntroweightError, ValueError):
    """A weight has zero (or non-positive) mass where positivity is required."""


class IntegrabilityError(ConfigError):
    """An epsilon function fails the integrability predicate of a constant."""


class ConstructionError(EntroweightError, RuntimeError):
    """Sparse family construction did not converge within the retry budget."""


class ExponentError(ConfigError):
    """Exponents outside the admissible domain."""
