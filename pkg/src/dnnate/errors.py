"""Exception types shared across the package."""


class DnnateError(Exception):
    """Base class for all package errors."""


class InvalidInputError(DnnateError, ValueError):
    """A caller-supplied value violates an operation's precondition."""


class SchemaError(InvalidInputError):
    """A CSV schema is malformed or does not match the file header."""


class DataValidationError(InvalidInputError):
    """Rows of an input file failed validation.

    `rows` holds the offending 1-based data-row numbers.
    """

    def __init__(self, message, rows=()):
        super().__init__(message)
        self.rows = tuple(rows)
        self.args = (message, tuple(rows))


class TrainingDivergedError(DnnateError, RuntimeError):
    """Training produced a non-finite loss; `epoch` is the 0-based epoch index."""

    def __init__(self, epoch, message=None):
        super().__init__(message or f"non-finite training loss in epoch {epoch}")
        self.epoch = epoch
        self.args = (epoch, message)


class ReplicationError(DnnateError, RuntimeError):
    """A replication failed; `replication` is the 0-based replication index."""

    def __init__(self, replication, message=None):
        super().__init__(message or f"replication {replication} failed")
        self.replication = replication
        self.args = (replication, message)
