"""Exception types shared across the package."""


class CloodError(Exception):
    """Base class for all package errors."""


class ConfigError(CloodError):
    """Invalid configuration value or combination (CLI exit code 2)."""


class ContractError(CloodError):
    """A caller violated a documented precondition."""


class ShapeError(CloodError):
    """Operand shapes do not conform."""


class DomainError(CloodError):
    """Numerically invalid input (log of non-positive, zero-norm vector, ...)."""


class NumericError(CloodError):
    """Non-finite value produced during training (CLI exit code 3)."""
