"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operands have incompatible shapes."""


class StateError(RuntimeError):
    """An operation was invoked on insufficient state (e.g. uninitialized
    class statistics or an empty centroid queue)."""


class NumericError(ArithmeticError):
    """A numeric precondition failed (e.g. a covariance that is not PSD)."""


class ConfigError(ValueError):
    """A configuration file or override is invalid."""
