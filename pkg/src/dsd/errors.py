"""Exception hierarchy.

Two families: :class:`DesignValidationError` for bad inputs (CLI exit code 2)
and :class:`NumericalFailure` for breakdowns during computation (exit code 3).
"""


class DSDError(Exception):
    """Base class for all errors raised by the package."""


class DesignValidationError(DSDError, ValueError):
    """Input does not satisfy a precondition."""


class NumericalFailure(DSDError, ArithmeticError):
    """A computation lost too much precision to be trusted."""


class NotHermitian(DesignValidationError):
    pass


class NotContracting(DesignValidationError):
    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class EmptyDomain(DesignValidationError):
    pass


class OutOfRange(DesignValidationError):
    pass


class NotCoprime(DesignValidationError):
    pass


class SumNotInteger(DesignValidationError):
    pass


class SumExceedsOne(DesignValidationError):
    pass


class NotProjection(DesignValidationError):
    pass


class NotFixedSize(DesignValidationError):
    pass


class TooLarge(DesignValidationError):
    pass


class ZeroInclusion(DesignValidationError):
    pass


class ZeroJointInclusion(DesignValidationError):
    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class NoRealRoot(DesignValidationError):
    pass


class ConstructionFailed(NumericalFailure):
    pass


class NumericalBreakdown(NumericalFailure):
    pass


class NegativeProbability(NumericalFailure):
    pass
