"""Exception hierarchy with stable CLI exit codes.

Exit-code contract for scripting: 0 success, 2 validation error,
3 I/O error, 4 numeric check failure.
"""

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


class VcrError(Exception):
    """Base class for every error raised by this package."""

    exit_code = EXIT_VALIDATION


class ValidationError(VcrError, ValueError):
    """Bad shapes, out-of-range values, or invalid configuration."""

    exit_code = EXIT_VALIDATION


class FileFormatError(VcrError, IOError):
    """Missing, unreadable, or malformed data files."""

    exit_code = EXIT_IO


class NumericCheckError(VcrError):
    """A numeric invariant or self-check did not hold."""

    exit_code = EXIT_NUMERIC
