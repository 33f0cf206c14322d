"""Exception hierarchy shared across the package."""


class FtinError(Exception):
    """Base class for all errors raised by :mod:`ftin`."""


class SchemaError(FtinError, ValueError):
    """A file is missing a required column or key."""

    def __init__(self, name: str, message: str | None = None):
        self.name = name
        super().__init__(message or f"missing required column {name!r}")


class IntegrityError(FtinError, ValueError):
    """Data violates an ordering or sampling-rate invariant."""

    def __init__(self, message: str, index: int | None = None):
        self.index = index
        super().__init__(message)


class PreconditionError(FtinError, ValueError):
    pass


class SizeError(FtinError, ValueError):
    pass


class ShapeError(FtinError, ValueError):
    pass


class NumericError(FtinError, ArithmeticError):
    """Non-finite values or a broken numerical invariant."""
