"""Exception hierarchy.

Everything raised on purpose derives from :class:`DogrError`, so callers
(the CLI in particular) can separate data/numeric failures from bugs.
"""


class DogrError(Exception):
    """Base class for data and numerical errors."""


class FactorizationError(DogrError):
    """A covariance matrix could not be Cholesky-factorized."""

    def __init__(self, message, context=""):
        super().__init__(message)
        self.context = context


class SingularDesignError(DogrError):
    """The (weighted) regression design matrix is rank deficient."""


class DegenerateWeightsError(DogrError):
    """Regression weights are all zero, negative or non-finite."""


class DataError(DogrError):
    """Invalid dataset contents or shape."""


class CsvError(DataError):
    """Problem reading a CSV file."""


class MissingColumnError(CsvError):
    pass


class NonNumericCellError(CsvError):
    def __init__(self, row, column, value):
        super().__init__(f"non-numeric cell {value!r} at row {row}, column {column!r}")
        self.row = row
        self.column = column
        self.value = value


class EmptyFileError(CsvError):
    pass


class InsufficientDataError(DogrError):
    """Too few observations for the requested number of components."""


class DegenerateComponentError(DogrError):
    """A component collapsed during EM and could not be recovered."""

    def __init__(self, message, iteration=None, diagnostics=None):
        super().__init__(message)
        self.iteration = iteration
        self.diagnostics = list(diagnostics or [])


class AllFitsFailedError(DogrError):
    """Every candidate fit in a sweep or CV fold failed."""
