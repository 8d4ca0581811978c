"""Exception hierarchy shared by all ltlab modules."""


class LtlabError(Exception):
    """Base class; ``exit_code`` is what the command line returns."""

    exit_code = 1


class InvalidScenario(LtlabError, ValueError):
    exit_code = 2


class DimensionMismatch(LtlabError, ValueError):
    exit_code = 2


class DomainError(LtlabError, ValueError):
    exit_code = 2


class BudgetExceeded(LtlabError, RuntimeError):
    exit_code = 3

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class NotPSD(LtlabError, ArithmeticError):
    exit_code = 4


class ConsistencyError(LtlabError, ArithmeticError):
    """Round-off larger than the clamp window (a broken kernel)."""

    exit_code = 4


class InsufficientSamples(LtlabError, ValueError):
    exit_code = 2


class NotConverged(LtlabError, ArithmeticError):
    exit_code = 5


class SingularDomain(LtlabError, ArithmeticError):
    exit_code = 5


class RegimeMismatch(LtlabError, ValueError):
    exit_code = 6


class SingularPoint(LtlabError, ArithmeticError):
    """Integrand evaluated where the pair covariance is degenerate."""

    exit_code = 1
