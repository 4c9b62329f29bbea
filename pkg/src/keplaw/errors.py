"""Exception hierarchy shared by every stage.

The CLI maps :class:`DataError` to exit code 2 and :class:`NumericError`
to exit code 3.
"""


class KeplawError(Exception):
    """Base class for all package errors."""


class DataError(KeplawError):
    """Input data is malformed or unusable."""


class ParseError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedEraError(DataError):
    """Date lies outside the window where old style = Gregorian - 10 days."""


class DegenerateRangeError(DataError):
    pass


class ExpressionSyntaxError(DataError):
    def __init__(self, message, position):
        self.position = position
        super().__init__(f"{message} at position {position}")


class UnboundVariableError(DataError):
    pass


class NotAConicError(DataError):
    pass


class NotAnEllipseError(DataError):
    pass


class NumericError(KeplawError):
    """A numerical procedure failed to produce a usable result."""


class DivergenceError(NumericError):
    def __init__(self, epoch):
        self.epoch = epoch
        super().__init__(f"training diverged (non-finite loss) at epoch {epoch}")


class ConvergenceError(NumericError):
    pass


class DomainError(NumericError):
    """A finite-difference stencil or similar left its valid domain."""
