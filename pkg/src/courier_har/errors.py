"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: usage errors -> 1, DataError -> 2,
NumericError -> 3.
"""


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class ContractError(ValueError):
    """A caller violated an API precondition (non-scalar loss, empty mask, ...)."""


class ConfigError(ValueError):
    """A configuration value is invalid or inconsistent with the data."""


class DataError(ValueError):
    """Input data violates the schema or physical constraints."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values."""


class CheckpointError(IOError):
    """Base class for checkpoint load failures."""


class CheckpointVersionError(CheckpointError):
    """Unsupported or mismatched checkpoint format version."""


class CheckpointCorruptError(CheckpointError):
    """Truncated file, bad magic, or inconsistent payload."""


class CheckpointConfigError(CheckpointError):
    """Stored parameters do not match the requested model configuration."""
