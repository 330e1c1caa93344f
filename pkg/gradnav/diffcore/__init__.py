"""
Reverse-mode automatic differentiation over dense float64 tensors.
"""
from gradnav.diffcore import ops
from gradnav.diffcore.gradcheck import analytic_gradient, check_gradient, numerical_gradient
from gradnav.diffcore.optim import Adam, clip_grad_norm
from gradnav.diffcore.tensor import (
    ShapeMismatchError,
    TapeNode,
    Tensor,
    as_tensor,
    is_grad_enabled,
    no_grad,
)

__all__ = [
    "ops",
    "Tensor",
    "TapeNode",
    "ShapeMismatchError",
    "as_tensor",
    "no_grad",
    "is_grad_enabled",
    "check_gradient",
    "numerical_gradient",
    "analytic_gradient",
    "Adam",
    "clip_grad_norm",
]
