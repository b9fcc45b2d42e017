"""Exception types shared across the package.

The CLI maps each family onto an exit code: usage errors exit 1,
:class:`DataError` exits 2 and :class:`NumericalError` exits 3.
"""


class SimGCFError(Exception):
    """Base class for all package errors."""


class DataError(SimGCFError):
    """Bad, missing or inconsistent input data."""


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class EmptyDatasetError(DataError):
    pass


class NumericalError(SimGCFError):
    """Non-finite values, rank deficiency or a failed numerical check."""


class RankDeficientError(NumericalError):
    pass


class StaleCacheError(NumericalError):
    """Propagated embeddings are out of date with respect to E0."""
