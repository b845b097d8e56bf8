"""Exception hierarchy.

Errors split into two families so the command line can map them onto exit
codes: input/configuration problems (exit 2) and numerical failures (exit 3).
"""


class LoadcastError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ValidationError(LoadcastError, ValueError):
    """Input data or configuration is invalid."""

    exit_code = 2


class ConfigurationError(ValidationError):
    pass


class DateRangeError(ValidationError):
    pass


class EasterUnknownError(ValidationError):
    """Easter window requested for a year the table does not cover."""

    def __init__(self, year):
        self.year = year
        super().__init__(
            f"easter unknown: no Easter window for year {year}; "
            "extend the Easter table or disable Easter exclusion"
        )


class ParseError(ValidationError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConflictError(ValidationError):
    pass


class CoverageError(ValidationError):
    pass


class AlignmentError(ValidationError):
    pass


class NoTrainingPairsError(ValidationError):
    pass


class NumericalError(LoadcastError, ArithmeticError):
    """A numerical computation could not be carried out reliably."""

    exit_code = 3


class SingularSystemError(NumericalError):
    """Penalized normal equations are (numerically) singular.

    Attributes
    ----------
    deficiency : int
        Estimated number of missing ranks.
    mode : int or None
        Eigenmode index for the Kronecker-structured solver.
    """

    def __init__(self, message, deficiency=None, mode=None):
        self.deficiency = deficiency
        self.mode = mode
        super().__init__(message)


class RankDeficientError(SingularSystemError):
    pass


class OverflowRangeError(NumericalError):
    pass
