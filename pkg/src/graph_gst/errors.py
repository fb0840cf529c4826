"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class GraphGstError(Exception):
    exit_code = 1


class ValidationError(GraphGstError, ValueError):
    exit_code = 2


class ConvergenceError(GraphGstError, ArithmeticError):
    """Raised when an iterative solver fails to meet its tolerance.

    ``bracket`` holds the last ``(lo, hi)`` interval when one exists.
    """

    exit_code = 3

    def __init__(self, message, bracket=None, iterations=None):
        super().__init__(message)
        self.bracket = bracket
        self.iterations = iterations


class NFunctionRangeError(GraphGstError, OverflowError):
    """Argument of an exponential N-function exceeds the safe range."""

    exit_code = 3


class DataIOError(GraphGstError, OSError):
    exit_code = 4
