"""Exception types shared across the library.

All errors subclass ValueError so callers that do not care about the
distinction can catch one type; the CLI maps them to exit code 1.
"""


class CoherenceAuditError(ValueError):
    """Base class for cohaudit errors."""


class DimensionError(CoherenceAuditError):
    """Shapes or sizes are incompatible."""


class DegenerateColumnError(CoherenceAuditError):
    """A matrix column has zero norm and cannot be normalized."""

    def __init__(self, column):
        self.column = int(column)
        super().__init__(f"column {self.column} has zero norm")


class UnnormalizedMatrixError(CoherenceAuditError):
    """Operation requires unit-norm columns."""


class InsufficientDataError(CoherenceAuditError):
    """Not enough samples for the requested statistic."""


class DomainError(CoherenceAuditError):
    """Scalar argument outside the mathematical domain of a formula."""


class MatrixFormatError(CoherenceAuditError):
    """Matrix file is malformed or inconsistent."""
