"""Exception hierarchy shared across the package."""


class LeafgraphError(Exception):
    """Base class for all leafgraph errors."""


class ShapeError(LeafgraphError):
    """Tensor shapes do not agree for the requested operation."""


class FormatError(LeafgraphError):
    """A byte stream or text file violates one of the on-disk formats."""


class DataError(LeafgraphError):
    """Input values are out of range, inconsistent, or missing."""


class DegenerateInputError(DataError):
    """Input is mathematically degenerate (zero vector, zero matrix, ...)."""


class EvaluationError(LeafgraphError):
    """A user-supplied function produced a non-finite value."""


class DivergenceError(LeafgraphError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, epoch: int, batch: int):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch


class UsageError(LeafgraphError):
    """Bad command line or configuration input."""
