"""Exception hierarchy shared by all redci modules."""


class RedciError(Exception):
    """Base class for errors raised by redci."""


class OverlapError(RedciError, ValueError):
    pass


class EmptySideError(RedciError, ValueError):
    pass


class UnknownVariableError(RedciError, KeyError):
    pass


class UnknownStatusError(RedciError, ValueError):
    def __init__(self, triple):
        self.triple = triple
        super().__init__(f"status of {triple} is unknown")


class CapExceededError(RedciError, ValueError):
    pass


class CycleError(RedciError, ValueError):
    pass


class EdgeAbsentError(RedciError, KeyError):
    pass


class PreconditionError(RedciError, ValueError):
    pass


class SingularityError(RedciError, ArithmeticError):
    pass


class SampleSizeError(RedciError, ValueError):
    pass


class DegenerateStratumError(RedciError, ValueError):
    pass


class EmptySampleError(RedciError, ValueError):
    pass


class TableShapeError(RedciError, ValueError):
    pass
