"""Exception types raised across the package."""


class NSGalerkinError(Exception):
    """Base class for all package errors."""


class DomainError(NSGalerkinError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(NSGalerkinError, ValueError):
    """A configuration value is inconsistent or unsupported."""


class ResourceError(NSGalerkinError):
    """A request exceeds the enumeration budget."""


class PreconditionError(NSGalerkinError, ValueError):
    """A target lies outside the validity range of a splitting scheme."""


class IntegrationError(NSGalerkinError, FloatingPointError):
    """Time stepping produced non-finite coefficients.

    The partially built trajectory (if any) is attached as ``trajectory``.
    """

    def __init__(self, message, step_index=None, trajectory=None):
        super().__init__(message)
        self.step_index = step_index
        self.trajectory = trajectory
