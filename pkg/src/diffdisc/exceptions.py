"""Exception hierarchy.

Data problems (bad files, invalid panels) and estimation problems (too few
points, singular designs) are kept apart so callers such as the CLI can map
them onto distinct exit codes.
"""


class DiffDiscError(Exception):
    """Base class for all package errors."""


class DataError(DiffDiscError, ValueError):
    """Input data cannot be used as given."""


class SchemaError(DataError):
    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"missing column: {column!r}")


class ParseError(DataError):
    def __init__(self, row, message):
        self.row = row
        super().__init__(f"row {row}: {message}")


class DomainError(DataError):
    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class PreconditionError(DataError):
    """Raised when an operation requires a valid panel and did not get one."""

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)


class EstimationError(DiffDiscError, RuntimeError):
    """The estimator cannot be computed on the supplied data."""


class InsufficientDataError(EstimationError):
    def __init__(self, side, n_effective, needed, detail=""):
        self.side = side
        self.n_effective = n_effective
        self.needed = needed
        msg = (f"insufficient data on the {side} side: {n_effective} "
               f"effective point(s), need at least {needed}")
        if detail:
            msg = f"{msg} ({detail})"
        super().__init__(msg)


class SingularDesignError(EstimationError):
    pass


class NoFeasibleBandwidthError(EstimationError):
    pass


class InferenceError(EstimationError):
    """Standard errors are unavailable (no residual degrees of freedom)."""


class HarnessError(DiffDiscError):
    def __init__(self, message, first_failure=None):
        self.first_failure = first_failure
        super().__init__(message)
