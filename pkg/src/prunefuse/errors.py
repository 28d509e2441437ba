"""Exception hierarchy shared across the package."""


class PruneFuseError(Exception):
    """Base class for all errors raised by prunefuse."""


class ValidationError(PruneFuseError, ValueError):
    """An argument or input violates a documented precondition."""


class ShapeError(ValidationError):
    """Array shapes do not line up."""


class PreconditionError(PruneFuseError, ValueError):
    """An operation was called on empty or otherwise unusable inputs."""


class FormatError(PruneFuseError, ValueError):
    """A file could not be parsed (bad magic, version, truncation, bad values)."""
