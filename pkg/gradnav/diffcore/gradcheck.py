"""
Finite-difference oracle for analytic adjoints.
"""
from typing import Callable, Union

import numpy as np

from gradnav.diffcore.tensor import Tensor

ScalarFn = Callable[[Tensor], Tensor]


def numerical_gradient(f: ScalarFn, x: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central differences of a scalar tensor function, one coordinate at a time."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    grad_flat = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + step
        upper = f(Tensor(x.copy())).item()
        flat[i] = original - step
        lower = f(Tensor(x.copy())).item()
        flat[i] = original
        grad_flat[i] = (upper - lower) / (2.0 * step)
    return grad


def analytic_gradient(f: ScalarFn, x: np.ndarray) -> np.ndarray:
    leaf = Tensor(np.array(x, dtype=np.float64), requires_grad=True)
    out = f(leaf)
    if out.requires_grad:
        out.backward()
    if leaf.grad is None:
        return np.zeros_like(leaf.data)
    return leaf.grad


def check_gradient(
    f: ScalarFn,
    x: Union[np.ndarray, Tensor],
    step: float = 1e-6,
    floor: float = 1e-12,
) -> float:
    """
    Compare the tape gradient of ``f`` at ``x`` with central differences.

    Args:
        f: scalar-valued tensor function, smooth at ``x``
        x: evaluation point
        step: finite-difference step
        floor: added to |central difference| in the denominator

    Returns:
        max over coordinates of |analytic - numeric| / (|numeric| + floor)
    """
    point = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    analytic = analytic_gradient(f, point)
    numeric = numerical_gradient(f, point, step)
    if analytic.size == 0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric) / (np.abs(numeric) + floor)))
