"""Exception hierarchy shared by the library and the CLI."""


class QuadsparseError(Exception):
    """Base class for all errors raised by quadsparse."""


class GridArgumentError(QuadsparseError, ValueError):
    """A tile, cell, rectangle or grid parameter is out of range."""


class EmptyDataError(QuadsparseError):
    """No observations fell inside the grid."""


class ContractError(QuadsparseError, ValueError):
    """An input violates a documented precondition (e.g. not normalized)."""


class PointsFormatError(QuadsparseError):
    """A point CSV file could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DocumentParseError(QuadsparseError):
    """A density document is malformed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SolverError(QuadsparseError):
    """An iterative solver failed to converge."""

    def __init__(self, message, lam=None):
        self.lam = lam
        if lam is not None:
            message = f"{message} (lambda={lam:.6g})"
        super().__init__(message)


class DegenerateDensityError(QuadsparseError):
    """A coefficient vector has no usable mass (empty, zero or negative total)."""
