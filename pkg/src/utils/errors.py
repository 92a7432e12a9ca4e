"""Exception hierarchy shared by the library and the command line"""
from typing import Any, Optional


class FastQMError(Exception):
    """Base class for all errors raised by this package"""

    exit_code = 1


class InputError(FastQMError, ValueError):
    """Invalid arguments, shapes or configuration values"""

    exit_code = 1


class StorageError(FastQMError, OSError):
    """Unreadable, unwritable or corrupt files"""

    exit_code = 2


class NumericalError(FastQMError, ArithmeticError):
    """
    Numerical breakdown (SVD failure, singular normal matrix, non-finite cost)

    Args:
        message: Human readable description
        report: Partial FitReport of the optimization that failed, if any
    """

    exit_code = 3

    def __init__(self, message: str, report: Optional[Any] = None):
        super().__init__(message)
        self.report = report
