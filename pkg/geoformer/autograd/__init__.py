"""
Minimal reverse-mode automatic differentiation over NumPy arrays.
"""

from geoformer.autograd import ops
from geoformer.autograd.gradcheck import grad_check, grad_check_params
from geoformer.autograd.ops import IGNORE_INDEX, EmptyLossError
from geoformer.autograd.tensor import (
    GradientError,
    Tape,
    Tensor,
    TensorShapeError,
    backward,
)

__all__ = [
    "EmptyLossError",
    "GradientError",
    "IGNORE_INDEX",
    "Tape",
    "Tensor",
    "TensorShapeError",
    "backward",
    "grad_check",
    "grad_check_params",
    "ops",
]
