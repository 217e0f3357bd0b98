"""Exception types shared across the toolkit."""


class StripctlError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(StripctlError, ValueError):
    """Raised for non-finite or dimensionally inconsistent inputs."""


class DegenerateGeometryError(StripctlError):
    """Raised when an edge collapses below the degeneracy threshold."""


class EquilibriumSolveError(StripctlError):
    """Raised when an equilibrium solve fails hard (not mere non-convergence)."""


class SensitivityUnavailableError(StripctlError):
    """Raised when the equilibrium Hessian is singular or indefinite.

    Signals proximity to a stability loss (bifurcation); sensitivity
    products are not defined there.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class RolloutError(StripctlError):
    """Raised when a forward rollout fails at some continuation step.

    Attributes
    ----------
    step : int
        Index of the failing continuation step.
    """

    def __init__(self, message, step):
        super().__init__(message)
        self.step = step


class NonFiniteGradientError(StripctlError):
    """Raised when an optimizer update receives a non-finite gradient."""


class ConfigError(StripctlError, ValueError):
    """Raised for invalid experiment configuration documents."""
