"""Exception hierarchy shared by the library and the CLI.

Each class carries the process exit code the CLI maps it to.
"""


class CnnpredError(Exception):
    exit_code = 2


class DimensionError(CnnpredError, ValueError):
    """Array shape does not match what an operation requires."""


class DataError(CnnpredError, ValueError):
    """Malformed, missing, or inconsistent input data."""


class IngestionError(DataError):
    """A required source series is absent or cannot be parsed."""


class CorruptFileError(DataError):
    """A binary artifact is truncated, has a bad magic, or an unknown version."""


class NumericalError(CnnpredError, ArithmeticError):
    exit_code = 3
