"""Exception hierarchy shared by all pgkit modules."""


class PgkitError(Exception):
    """Base class for all pgkit errors."""


class DomainError(PgkitError):
    """An argument is outside the operation's domain."""


class GraphParseError(DomainError):
    """A graph string failed to parse; carries the offending position."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class EncodingError(DomainError):
    """A graph cannot be serialized (e.g. multiplicity > 9)."""


class ValidationError(DomainError):
    """Structured data failed an internal consistency check."""


class NumericError(PgkitError):
    """A numeric routine failed to converge; carries the residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class PrecisionError(PgkitError):
    """A tolerance was too loose to give a unique answer."""


class ResourceError(PgkitError):
    """A configured budget was exceeded; may carry a partial result."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class StuckTrainError(PgkitError):
    """Closed-train reduction reached an irreducible state."""

    def __init__(self, message, snapshot=None):
        if snapshot is not None:
            message = f"{message}\nstuck state: {snapshot}"
        super().__init__(message)
        self.snapshot = snapshot


class UnsupportedInputError(PgkitError):
    """The generator system lacks a relation needed by this input."""
