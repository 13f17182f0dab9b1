"""Exception types raised by qwalk."""


class QWalkError(Exception):
    """Base class for library errors."""


class ResourceBudgetError(QWalkError):
    """A requested model would exceed the configured node or memory budget."""


class IntegrationError(QWalkError):
    """The time integrator failed (e.g. step-size underflow).

    Attributes:
        time: simulation time at which the failure happened.
    """

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class QuadratureError(QWalkError):
    """A quadrature did not converge within its point budget."""


class FitError(QWalkError):
    """Data cannot be fitted (non-positive values, too few points, ...)."""


class ConfigError(QWalkError):
    """Invalid experiment configuration.

    Attributes:
        field: dotted path of the offending field, e.g. ``decoherence.gamma``.
    """

    def __init__(self, field, reason):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason
