"""Exception types raised across the package."""


class SOTError(ValueError):
    """Base class for all solver errors."""


class NonProbability(SOTError):
    pass


class EmptySupport(SOTError):
    pass


class DimensionMismatch(SOTError):
    pass


class ZeroColumn(SOTError):
    pass


class NumericalBreakdown(SOTError):
    """Pivot element too small to trust in floating point; retry with ``solve_exact``."""


class TooLarge(SOTError):
    pass


class InternalInfeasible(SOTError):
    """An LP that is feasible by construction came back infeasible (assembly bug)."""


class BarycenterIdentityViolated(SOTError):
    pass


class EnumerationCapExceeded(SOTError):
    pass


class NoCandidate(SOTError):
    pass


class NotOnUnitInterval(SOTError):
    pass


class BadRange(SOTError):
    pass


class ResolutionTooCoarse(SOTError):
    pass


class GreedyStall(SOTError):
    pass


class GreedyStallWarning(UserWarning):
    pass


class ParseError(SOTError):
    pass
