"""Exception hierarchy shared by the library and the command line."""


class LindbladRiemannError(Exception):
    """Base class for all package errors."""


class ConfigError(LindbladRiemannError, ValueError):
    """Invalid configuration value; carries the offending field name."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class NumericError(LindbladRiemannError, ArithmeticError):
    """Numerical failure such as a degenerate objective or rank deficiency."""


class DegenerateObjectiveError(NumericError):
    """The Frobenius-norm objective is (numerically) zero, so it has no gradient."""


class ChannelError(LindbladRiemannError, ValueError):
    """A matrix does not represent a valid channel in the expected shape."""


class MemoryCapError(LindbladRiemannError, MemoryError):
    """A requested dense object exceeds the configured size cap."""
