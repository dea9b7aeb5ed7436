"""Exception types shared across the package."""


class KtraceError(Exception):
    """Base class for all ktrace errors."""


class DimensionMismatchError(KtraceError):
    """A block had the wrong number of rows for the operator."""


class CapacityError(KtraceError):
    """A requested size exceeds what the implementation supports."""


class DegenerateInputError(KtraceError):
    """An input (e.g. a zero start block) cannot seed the computation."""


class DomainError(KtraceError):
    """A spectral function was evaluated outside its domain."""


class UnsupportedFunctionError(KtraceError):
    """The requested spectral function cannot be used in this context."""


class FilterDegreeError(KtraceError):
    """A filter polynomial exceeds the degree the recurrence supports."""


class ParseError(KtraceError):
    """A file could not be parsed; the message carries the line number."""
