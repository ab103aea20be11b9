"""Exception types shared across the package."""


class InputError(ValueError):
    """Malformed or unusable caller input (empty corpus, bad token id, ...)."""


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class ContractError(RuntimeError):
    """An internal precondition or usage contract was violated."""


class FormatError(ValueError):
    """A serialized artifact is corrupt, truncated, or mismatched."""
