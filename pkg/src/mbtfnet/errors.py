"""Exception hierarchy shared across the package."""


class MbtfnetError(Exception):
    """Base class for package errors."""


class ValidationError(MbtfnetError, ValueError):
    """Invalid argument values or mismatched shapes/metadata."""


class DataError(MbtfnetError):
    """Unreadable, malformed, or inconsistent external data."""


class ConfigError(MbtfnetError):
    """Inconsistent or incomplete configuration."""
