"""Exception types raised by mltrace."""


class MltraceError(Exception):
    """Base class for all library errors."""


class MatrixMarketError(MltraceError, ValueError):
    """Malformed Matrix Market input. ``line`` is 1-based (0 if unknown)."""

    def __init__(self, message, line=0):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


class DimensionError(MltraceError, ValueError):
    pass


class DomainError(MltraceError, ValueError):
    """A function was evaluated outside the set where it is finite."""


class IntervalViolationError(MltraceError, ArithmeticError):
    """The operator spectrum escaped the interval of the Chebyshev model."""


class AdjacencyError(MltraceError, ValueError):
    """Matrix is not a simple-graph adjacency matrix."""


class OracleSizeError(MltraceError, ValueError):
    """Problem too large for a dense or brute-force oracle."""
