"""Exception types shared across the package."""


class InvalidThresholdError(ValueError):
    """A play threshold r <= 0 was requested."""


class GridError(ValueError):
    """A quadrature or memory grid is degenerate or inconsistent."""


class ConfigurationError(ValueError):
    """A scenario or operator configuration is invalid or incomplete."""


class DensityValidationError(ValueError):
    """The density fails the positivity/convexity admissibility conditions.

    When the failure is a too-large convexity radius, ``suggested_R`` carries
    the largest feasible radius found by bisection.
    """

    def __init__(self, message, suggested_R=None):
        super().__init__(message)
        self.suggested_R = suggested_R


class MemoryConvergenceError(RuntimeError):
    """The hysteresis memory failed to reach a periodic regime."""
