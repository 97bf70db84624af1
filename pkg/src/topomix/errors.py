class TopomixError(Exception):
    """Base class for all package errors."""


class InputError(TopomixError, ValueError):
    """Malformed or out-of-contract input data."""


class ConfigError(TopomixError, ValueError):
    """Invalid or unknown configuration value."""


class ComplexityError(TopomixError):
    """A simplicial complex would be too large to build."""


class NumericalError(TopomixError, ArithmeticError):
    """A linear-algebra step failed (e.g. Gram matrix not positive definite)."""


class StageError(TopomixError):
    """A pipeline stage could not find the artifact it depends on."""
