"""Exception taxonomy shared across the pipeline stages."""


class RiverfluctError(Exception):
    """Base class for all library errors."""


class SchemaError(RiverfluctError):
    """Input file structure is unusable (e.g. no timestamp column)."""


class EmptyInputError(RiverfluctError):
    """No parseable rows or samples at all."""


class DataError(RiverfluctError):
    """Values violate an operation's data precondition (non-finite, empty, mismatched)."""


class InsufficientDataError(DataError):
    """Too few samples for the requested operation."""


class ParameterError(RiverfluctError):
    """A parameter or config violates its invariants."""


class InvalidWindowError(ParameterError):
    """A smoothing/filter window does not fit the sampling grid."""


class DomainError(RiverfluctError):
    """A value lies outside the mathematical domain of the operation.

    Carries the first offending index when known.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class GapError(DataError):
    """Operation requires a contiguous series but gaps are present."""


class DegenerateRegressionError(DataError):
    """Regression inputs carry no usable spread (e.g. all distances equal)."""


class NumericalError(RiverfluctError):
    """A numerical solve failed (rank deficiency, non-finite result)."""
