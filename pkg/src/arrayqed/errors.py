"""Exception hierarchy.

Physics/numerics failures map to CLI exit status 1, configuration and usage
errors to exit status 2.
"""


class ArrayQEDError(Exception):
    """Base class for physics and numerics failures."""


class GeometryError(ArrayQEDError, ValueError):
    pass


class SingularityError(ArrayQEDError, ValueError):
    """Green's tensor requested at zero separation."""


class ConditioningError(ArrayQEDError):
    """Bath matrix too ill-conditioned for the elimination solve."""

    def __init__(self, message, cond=None):
        super().__init__(message)
        self.cond = cond


class UnphysicalError(ArrayQEDError, ValueError):
    """Parameter set violates the physicality envelope."""


class IntegrationError(ArrayQEDError):
    """Adaptive ODE integration failed."""


class OptimizationError(ArrayQEDError):
    pass


class ConfigError(Exception):
    """Malformed configuration or command-line usage (exit status 2)."""
