"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: UsageError -> 1,
DataError -> 2, DivergenceError -> 3.
"""


class RevgenError(Exception):
    """Base class for all package errors."""


class UsageError(RevgenError):
    """Bad arguments, inconsistent configuration, malformed requests."""


class DataError(RevgenError):
    """Unusable input data: unreadable files, empty corpora, bad records."""


class DivergenceError(RevgenError):
    """Training produced a non-finite loss."""

    def __init__(self, message, checkpoint_path=None):
        super().__init__(message)
        self.checkpoint_path = checkpoint_path
