"""Cross-lingual document vectors from a shared self-attentive translation bottleneck."""

from .errors import ContractError, DimensionError, FormatError, InputError
from .tensor import Tensor, backward, no_grad

__all__ = [
    "ContractError",
    "DimensionError",
    "FormatError",
    "InputError",
    "Tensor",
    "backward",
    "no_grad",
]

__version__ = "0.1.0"
