class TlsnetError(Exception):
    """Base class for errors raised by tlsnet."""


class DomainError(TlsnetError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NumericalDiagnostic(TlsnetError, ArithmeticError):
    """A numerical safeguard tripped (normalization, step size, underflow)."""


class ConfigError(TlsnetError, ValueError):
    """An experiment configuration is malformed or inconsistent."""
