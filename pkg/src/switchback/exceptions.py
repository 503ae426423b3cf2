"""Exception hierarchy shared across the package."""


class SwitchbackError(Exception):
    """Base class for all package errors."""


class DesignError(SwitchbackError, ValueError):
    """Invalid assignment design, treatment path, or exposure specification."""


class DataError(SwitchbackError, ValueError):
    """Malformed input data (datasets, outcome series, configs)."""


class NumericalError(SwitchbackError, ArithmeticError):
    """A numerical routine could not produce a trustworthy answer."""


class SingularDesignError(NumericalError):
    """Regressor matrix (or covariance block) is numerically rank deficient.

    Attributes
    ----------
    column : int or None
        Index of the column judged responsible for the rank loss.
    """

    def __init__(self, message: str, column: int | None = None):
        super().__init__(message)
        self.column = column
