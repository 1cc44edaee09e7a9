"""Exception hierarchy shared by the library and the CLI."""


class RobvolError(Exception):
    """Base class for all library errors."""


class DomainError(RobvolError, ValueError):
    """An argument lies outside the domain of the operation."""


class DataError(RobvolError, ValueError):
    """Input data are malformed, too short or contain non-finite values."""


class ConfigError(RobvolError, ValueError):
    """A run configuration is invalid."""


class NumericError(RobvolError, ArithmeticError):
    """A numerical routine failed to produce a usable result."""
