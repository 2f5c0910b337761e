"""Exception hierarchy shared by every module.

The CLI maps ``DataError`` to exit code 3 and ``NumericalError`` to exit
code 4; everything else that escapes is a bug.
"""


class BMVSError(Exception):
    """Base class for all package errors."""


class DataError(BMVSError, ValueError):
    """Invalid input data or parameters."""


class ParameterError(DataError):
    """A parameter violates its documented domain."""


class ZeroVarianceError(DataError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"response column {column!r} has zero sample variance")


class CollinearityError(DataError):
    def __init__(self, dependent):
        self.dependent = list(dependent)
        super().__init__(f"design is rank deficient; dependent columns: {self.dependent}")


class NumericalError(BMVSError, ArithmeticError):
    """A numerical routine failed (non-finite value, lost definiteness)."""


class DecompositionError(NumericalError):
    """Cholesky factorisation hit a non-positive pivot."""

    def __init__(self, pivot, message=None):
        self.pivot = pivot
        super().__init__(message or f"matrix is not positive definite (pivot {pivot} failed)")


class ChainError(NumericalError):
    """Numerical failure inside a Gibbs sweep."""

    def __init__(self, sweep, predictor, cause):
        self.sweep = sweep
        self.predictor = predictor
        super().__init__(f"sweep {sweep}, predictor {predictor}: {cause}")
