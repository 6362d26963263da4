"""Exception and warning types raised by condwalk."""


class CondWalkError(Exception):
    """Base class for all library errors."""


class NonNormalized(CondWalkError, ValueError):
    pass


class DegenerateSupport(CondWalkError, ValueError):
    pass


class MonotoneDriftWarning(UserWarning):
    """Step law has a clearly nonzero mean and no (alpha, rho) tags."""


class NonAperiodicWarning(UserWarning):
    pass


class TruncationFailure(CondWalkError, RuntimeError):
    """An exact table could not be closed within its error budget."""


class StateOverflow(CondWalkError, RuntimeError):
    pass


class DegenerateConditioning(CondWalkError, ZeroDivisionError):
    pass


class ZeroHarmonic(CondWalkError, ValueError):
    """The excessive function vanishes at the requested start point."""


class RowSumViolation(CondWalkError, RuntimeError):
    pass


class RejectionBudgetExceeded(CondWalkError, RuntimeError):
    pass


class MaxStepsExceeded(CondWalkError, RuntimeError):
    pass


class InsufficientSurvivors(CondWalkError, RuntimeError):
    pass


class UncalibratedLaw(CondWalkError, ValueError):
    pass


class DegenerateBins(CondWalkError, ValueError):
    pass
