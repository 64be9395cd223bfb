"""Exception hierarchy.  The CLI maps each class to an exit status."""


class GdpError(Exception):
    """Base class for package errors."""

    exit_code = 1


class UsageError(GdpError, ValueError):
    exit_code = 1


class DataError(GdpError, ValueError):
    """Input data cannot be used (non-finite, constant column, bad CSV...)."""

    exit_code = 2


class NumericError(GdpError, ArithmeticError):
    """A numerical routine failed (factorization, series, underflow)."""

    exit_code = 3


class ConvergenceError(NumericError):
    pass
