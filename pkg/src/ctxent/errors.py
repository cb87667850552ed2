"""Exception types raised across the package."""


class CtxEntError(Exception):
    """Base class for every error raised by ctxent."""


class InvalidInput(CtxEntError, ValueError):
    """An argument violates a documented precondition."""


# --- matrices -------------------------------------------------------------

class NotSquare(InvalidInput):
    pass


class NotHermitian(InvalidInput):
    pass


class NotUnitTrace(InvalidInput):
    pass


class NotPositive(InvalidInput):
    pass


class NotUnitary(InvalidInput):
    pass


class NotProjection(InvalidInput):
    pass


class DimensionMismatch(InvalidInput):
    pass


class BadRank(InvalidInput):
    pass


class NonFinite(InvalidInput):
    pass


# --- contexts -------------------------------------------------------------

class NotOrthogonal(InvalidInput):
    pass


class NotComplete(InvalidInput):
    pass


class ZeroProjection(InvalidInput):
    pass


class TrivialContext(InvalidInput):
    pass


# --- entropies ------------------------------------------------------------

class NotAProbabilityVector(InvalidInput):
    pass


class BadPartition(InvalidInput):
    pass


class NotARefinement(InvalidInput):
    pass


class TargetNegative(InvalidInput):
    pass


class TargetOutOfRange(InvalidInput):
    """Two-outcome entropy target lies above the two-outcome maximum."""


class UnsupportedKind(InvalidInput):
    pass


# --- runtime --------------------------------------------------------------

class NumericalBreakdown(CtxEntError, ArithmeticError):
    """A computed quantity left its admissible range by more than tolerance."""


class BudgetExhausted(CtxEntError):
    """An oracle refused a query because its budget was spent."""


class OracleMiss(CtxEntError, LookupError):
    """A replay oracle was asked about a context it has no record of."""


class NoZeroContext(CtxEntError):
    pass


class MultipleZeroContexts(CtxEntError):
    pass
