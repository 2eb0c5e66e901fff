"""Exception taxonomy shared across the package."""


class ShapeError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class ParameterError(ValueError):
    """An argument is outside its valid range."""


class ContractError(RuntimeError):
    """A caller-side precondition was violated (wrong mode, NaN input, ...)."""


class ConfigError(ValueError):
    """A configuration is internally inconsistent or fails validation."""


class DegenerateBatchError(ValueError):
    """Batch statistics were requested on a batch too small to define them."""
