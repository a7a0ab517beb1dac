"""Exception types shared across the package.

The CLI maps these onto its exit codes: ``UsageError`` -> 1,
``DataError`` -> 2, ``NumericalError`` -> 3.
"""


class MoodwaveError(Exception):
    pass


class UsageError(MoodwaveError, ValueError):
    """Bad configuration or command-line input."""


class DataError(MoodwaveError, ValueError):
    """Unreadable, malformed or missing input data."""


class NumericalError(MoodwaveError, ArithmeticError):
    """A NaN or infinity appeared where finite values are required."""
