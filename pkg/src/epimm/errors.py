"""Exception types raised across the package."""


class EpimmError(Exception):
    """Base class for all package errors."""


class ValidationError(EpimmError, ValueError):
    pass


class NonPositiveBeta(ValidationError):
    pass


class NegativeGamma(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class MalformedGenerator(ValidationError):
    pass


class NotIrreducible(ValidationError):
    pass


class IrreducibilityLost(EpimmError):
    pass


class SingularResidenceMatrix(EpimmError, ArithmeticError):
    pass


class AllRecoveryZero(EpimmError, ArithmeticError):
    pass


class ZeroRecoveryGroup(EpimmError, ValueError):
    pass


class ConditionViolated(EpimmError, ValueError):
    pass


class DegenerateGroup(EpimmError, ValueError):
    pass


class StepSizeUnderflow(EpimmError, RuntimeError):
    pass


class NoConvergence(EpimmError, RuntimeError):
    """An iterative method ran out of budget.

    ``last`` holds the final iterate, which for monotone schemes is a
    certified bound on the true answer.
    """

    def __init__(self, message, last=None, iterations=None):
        super().__init__(message)
        self.last = last
        self.iterations = iterations


class OneWayEdge(UserWarning):
    """A migration edge has no reverse rate, so detailed balance forces it shut."""
