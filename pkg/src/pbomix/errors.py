"""Exception types shared across the package."""


class PboError(Exception):
    """Base class for all package errors."""


class ConfigurationError(PboError, ValueError):
    pass


class DimensionError(PboError, ValueError):
    pass


class DomainError(PboError, ValueError):
    pass


class UsageError(PboError, RuntimeError):
    """An operation was called in the wrong state (e.g. backward before forward)."""


class NumericalFault(PboError, FloatingPointError):
    pass


class ParseError(ConfigurationError):
    pass
