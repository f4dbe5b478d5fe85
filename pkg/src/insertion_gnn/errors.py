"""Exception taxonomy shared across the package.

Validation-type errors (bad values, bad config, bad shapes) map to CLI
exit code 1; file-content and I/O errors map to exit code 2.
"""


class InsertionGnnError(Exception):
    """Base class for all package errors."""


class ShapeError(InsertionGnnError):
    """Operands have incompatible dimensions."""


class DomainError(InsertionGnnError):
    """A value is outside the operation's domain."""


class NumericError(InsertionGnnError):
    """A computation produced NaN/Inf or otherwise left the finite domain."""


class ConfigError(InsertionGnnError):
    """Invalid or inconsistent configuration."""


class DataError(InsertionGnnError):
    """Dataset-level inconsistency, e.g. a problem id with no embedding."""


class ValidationError(InsertionGnnError):
    """A record violates a field-level constraint."""


class IntegrityError(InsertionGnnError):
    """A file-level integrity constraint is violated, e.g. duplicate ids."""


class ParseError(InsertionGnnError):
    """A text record could not be parsed."""


class FormatError(InsertionGnnError):
    """A binary file does not carry the expected format markers."""


class TruncationError(InsertionGnnError):
    """A binary file is shorter or longer than its header implies."""


VALIDATION_ERRORS = (ShapeError, DomainError, ConfigError, DataError, ValidationError)
IO_ERRORS = (ParseError, FormatError, TruncationError, IntegrityError, OSError)
