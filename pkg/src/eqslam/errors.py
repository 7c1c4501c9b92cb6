"""Exception types shared across the package."""


class DegenerateConfigurationError(ValueError):
    """A landmark coincides (within tolerance) with the camera centre."""


class CountMismatchError(ValueError):
    """Two per-landmark containers have different landmark counts."""


class TangencyError(ValueError):
    """A flow vector is too far from the tangent plane of its bearing."""


class LifecycleError(RuntimeError):
    """An operation was applied to a landmark in the wrong lifecycle state."""


class InsufficientDataError(ValueError):
    """Not enough data points for the requested fit or statistic."""
