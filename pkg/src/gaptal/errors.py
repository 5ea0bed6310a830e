"""Exception types shared across the package."""


class GaptalError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(GaptalError, ValueError):
    """Operand shapes are incompatible with the requested operation."""


class ContractError(GaptalError, ValueError):
    """An operation was called outside its contract (e.g. non-scalar loss)."""


class NumericError(GaptalError, ArithmeticError):
    """A non-finite value appeared where a finite one is required."""


class FormatError(GaptalError, ValueError):
    """A file does not conform to its binary or JSON layout."""


class ValidationError(GaptalError, ValueError):
    """Input data violates a declared invariant (labels, times, splits)."""


class GenerationError(GaptalError, RuntimeError):
    """Synthetic data generation could not satisfy its constraints."""


class ConfigError(GaptalError, ValueError):
    """A run configuration is missing or inconsistent."""
