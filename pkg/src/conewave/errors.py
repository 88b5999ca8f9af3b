"""Exception types raised by conewave."""


class ConewaveError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(ConewaveError, ValueError):
    pass


class DomainError(ConewaveError, ValueError):
    """Input lies outside the domain where an operation is defined."""


class DegenerateAxisError(DomainError):
    pass


class UnsupportedDimensionError(ConewaveError, ValueError):
    pass


class ValidationError(ConewaveError):
    """Imported data violates a stored-format invariant (e.g. unit norms)."""
