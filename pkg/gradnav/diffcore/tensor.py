"""
Dense tensors and the reverse-mode tape.

A Tensor wraps a float64 numpy buffer. Operations on tensors that require a
gradient record a TapeNode on the result; ``Tensor.backward`` walks the
resulting DAG once in reverse topological order and accumulates adjoints into
every tensor on it.
"""
from __future__ import annotations

import contextlib
from dataclasses import dataclass
from typing import Any, Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np


class ShapeMismatchError(ValueError):
    """Raised when operand shapes cannot be combined by an operation."""


_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Disable tape recording inside the block."""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


def is_grad_enabled() -> bool:
    return _GRAD_ENABLED


VjpFn = Callable[..., Sequence[Optional[np.ndarray]]]


@dataclass(eq=False)
class TapeNode:
    """
    One recorded operation.

    ``vjp(grad_out, *saved)`` returns one adjoint (or None) per input, each
    already reduced to that input's shape.
    """

    op: str
    inputs: Tuple["Tensor", ...]
    saved: Tuple[Any, ...]
    vjp: VjpFn


class Tensor:
    """Dense float64 array participating in reverse-mode differentiation."""

    __slots__ = ("data", "requires_grad", "grad", "node", "name")
    __array_priority__ = 1000

    def __init__(self, data: Any, requires_grad: bool = False, name: Optional[str] = None):
        if isinstance(data, Tensor):
            data = data.data
        self.data: np.ndarray = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.node: Optional[TapeNode] = None
        self.name = name

    # ------------------------------------------------------------------ basics
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def is_leaf(self) -> bool:
        return self.node is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __len__(self) -> int:
        return self.data.shape[0]

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # ---------------------------------------------------------------- backward
    def backward(self) -> None:
        """
        Populate ``grad`` of every reachable tensor that requires a gradient.

        Leaves and interior tensors both accumulate across calls.

        Raises:
            ValueError: if the tensor is not a scalar or not on the tape
        """
        if self.data.size != 1:
            raise ValueError(f"backward() requires a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            raise ValueError("loss is not connected to the tape (no input requires grad)")

        order = _topological_order(self)
        pending = {id(self): np.ones_like(self.data)}
        for tensor in reversed(order):
            grad = pending.pop(id(tensor), None)
            if grad is None:
                continue
            tensor.grad = grad.copy() if tensor.grad is None else tensor.grad + grad
            if tensor.node is None:
                continue
            node = tensor.node
            input_grads = node.vjp(grad, *node.saved)
            for parent, parent_grad in zip(node.inputs, input_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in pending:
                    pending[key] = pending[key] + parent_grad
                else:
                    pending[key] = parent_grad

    # --------------------------------------------------------------- operators
    def __add__(self, other):
        from gradnav.diffcore import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from gradnav.diffcore import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from gradnav.diffcore import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from gradnav.diffcore import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from gradnav.diffcore import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from gradnav.diffcore import ops
        return ops.mul(other, self)

    def __truediv__(self, other):
        from gradnav.diffcore import ops
        return ops.div(self, other)

    def __rtruediv__(self, other):
        from gradnav.diffcore import ops
        return ops.div(other, self)

    def __neg__(self):
        from gradnav.diffcore import ops
        return ops.neg(self)

    def __pow__(self, exponent: float):
        from gradnav.diffcore import ops
        return ops.power(self, exponent)

    def __matmul__(self, other):
        from gradnav.diffcore import ops
        return ops.matmul(self, other)

    def __rmatmul__(self, other):
        from gradnav.diffcore import ops
        return ops.matmul(other, self)

    def __getitem__(self, index):
        from gradnav.diffcore import ops
        return ops.index(self, index)

    # ------------------------------------------------------------ method forms
    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        from gradnav.diffcore import ops
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        from gradnav.diffcore import ops
        return ops.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> "Tensor":
        from gradnav.diffcore import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes) -> "Tensor":
        from gradnav.diffcore import ops
        return ops.transpose(self, axes or None)

    def tanh(self) -> "Tensor":
        from gradnav.diffcore import ops
        return ops.tanh(self)

    def exp(self) -> "Tensor":
        from gradnav.diffcore import ops
        return ops.exp(self)

    def log(self) -> "Tensor":
        from gradnav.diffcore import ops
        return ops.log(self)

    def sqrt(self) -> "Tensor":
        from gradnav.diffcore import ops
        return ops.sqrt(self)

    def square(self) -> "Tensor":
        from gradnav.diffcore import ops
        return ops.square(self)

    def relu(self) -> "Tensor":
        from gradnav.diffcore import ops
        return ops.relu(self)


def as_tensor(value: Any) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _topological_order(root: Tensor) -> List[Tensor]:
    """Iterative post-order DFS; inputs always precede the tensors built from them."""
    order: List[Tensor] = []
    visited = set()
    stack: List[Tuple[Tensor, bool]] = [(root, False)]
    while stack:
        tensor, expanded = stack.pop()
        if expanded:
            order.append(tensor)
            continue
        if id(tensor) in visited:
            continue
        visited.add(id(tensor))
        stack.append((tensor, True))
        if tensor.node is not None:
            for parent in tensor.node.inputs:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
    return order
