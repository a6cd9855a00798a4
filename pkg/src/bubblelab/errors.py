"""Exception hierarchy shared by every module."""


class BubbleLabError(Exception):
    """Base class for all library errors."""


class DomainError(BubbleLabError):
    """A point lies outside the domain or the domain is malformed."""


class DegeneracyError(BubbleLabError):
    """A geometric quantity is not uniquely defined (e.g. normal at a ball center)."""


class AccuracyError(BubbleLabError):
    """A numerical tolerance could not be met; carries the best estimate."""

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class DivergenceError(BubbleLabError):
    """An improper integral does not converge."""


class ContractError(BubbleLabError):
    """A documented precondition or regime hypothesis is violated."""


class SingularityError(BubbleLabError):
    """Coincident points in a pairwise singular potential."""


class BracketError(BubbleLabError):
    """A shooting bracket does not contain a sign change."""


class IVPBlowUpError(BubbleLabError):
    """The initial value problem escaped to infinity."""

    def __init__(self, message, radius=None):
        super().__init__(message)
        self.radius = radius


class ModelMismatchError(BubbleLabError):
    """A least-squares decomposition left too large a residual."""


class ConvergenceError(BubbleLabError):
    """An iterative solver failed; carries the last iterate."""

    def __init__(self, message, last=None, residual=None):
        super().__init__(message)
        self.last = last
        self.residual = residual


class ConfigError(BubbleLabError):
    """Run configuration failed validation; the message names the key path."""
