"""Exception hierarchy shared by all modules."""


class DPError(Exception):
    """Base class for every error raised by dpconv."""


class ConfigurationError(DPError, ValueError):
    """Invalid input, parameter or configuration."""


class DomainError(DPError, ValueError):
    """A quantity is undefined for the given parameters (e.g. p* for p >= N)."""


class NumericalError(DPError, RuntimeError):
    """An iterative method failed to converge or stagnated."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class SingularityError(NumericalError):
    """Flux derivative or Jacobian is singular."""


class EvaluationError(DPError, ArithmeticError):
    """A user-supplied nonlinearity returned a non-finite value."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class InvariantViolationError(DPError, AssertionError):
    """A property guaranteed by theory failed to hold numerically."""

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload
