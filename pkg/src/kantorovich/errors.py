"""Exception hierarchy.

Errors fall in two groups that the command line maps to different exit
codes: malformed input (``InputError``) and solver trouble
(``NumericalFailure``).  An infinite transfer value is never an error.
"""


class KantorovichError(Exception):
    """Base class for every error raised by this package."""


class InputError(KantorovichError, ValueError):
    """Input data violates a documented precondition."""


class Malformed(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class SpaceMismatch(InputError):
    pass


class SpaceChainMismatch(SpaceMismatch):
    pass


class NotAProbability(InputError):
    pass


class NegativeMass(InputError):
    pass


class NegativeFunction(InputError):
    pass


class NoEmbedding(InputError):
    pass


class ExtendedRealError(InputError, ArithmeticError):
    """Raised for the undefined sum of +inf and -inf."""


class NonPositiveLambda(InputError):
    pass


class BadEpsilon(InputError):
    pass


class NonStandard(InputError):
    """Some point has an empty cost domain."""


class NotStandard(InputError):
    """A black-box operator's conjugate diverges inside the probe box."""


class EmptyRow(InputError):
    pass


class NotCommon(InputError):
    pass


class NotCompactlyStandard(InputError):
    pass


class SizeCap(InputError):
    pass


class OrderFails(KantorovichError):
    pass


class NumericalFailure(KantorovichError):
    pass


class FwNoConverge(NumericalFailure):
    pass


class DivergentDual(NumericalFailure):
    pass


class NotAttained(NumericalFailure):
    pass


class CandidateSetTooSmall(NumericalFailure):
    pass


class IterationDiverges(NumericalFailure):
    pass
