"""Exception types shared across the package.

Everything user-facing raises one of these so callers (and the CLI) can
distinguish "you configured it wrong" from "the data broke an assumption"
from "an iterative routine gave up".
"""


class StreamsirError(Exception):
    """Base class for all package errors."""


class ConfigurationError(StreamsirError, ValueError):
    """A parameter combination that can never be valid (H < 1, d > min(p, H), ...)."""


class DataError(StreamsirError, ValueError):
    """Input data violates a precondition: wrong shape, non-finite values, ..."""


class DegenerateDataError(DataError):
    """Data is formally valid but carries no usable signal.

    Examples: constant warmup responses collapsing the slice grid, or a
    zero kernel matrix that leaves the eigen basis undefined.
    """


class EmptyStateError(StreamsirError, RuntimeError):
    """An aggregate was requested from a tracker that has seen no data."""


class ConvergenceError(StreamsirError, RuntimeError):
    """An iterative solver exhausted its iteration budget before reaching tolerance."""
