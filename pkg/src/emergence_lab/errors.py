"""Exception types shared across the package."""


class EmergenceLabError(Exception):
    """Base class for all package errors."""


class DomainError(EmergenceLabError, ValueError):
    """An argument lies outside the domain where an operation is defined."""


class CapacityError(EmergenceLabError, RuntimeError):
    """A configured size cap would be exceeded.

    The offending cap is available as ``cap`` so callers (the CLI in
    particular) can name it.
    """

    def __init__(self, message, cap=None):
        super().__init__(message)
        self.cap = cap


class PreconditionError(EmergenceLabError, ValueError):
    """Inputs violate a documented precondition."""


class CertificateError(EmergenceLabError, RuntimeError):
    """A geometric certificate could not be established."""


class ConfigError(EmergenceLabError, ValueError):
    """An experiment configuration failed validation; ``field`` names the culprit."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
