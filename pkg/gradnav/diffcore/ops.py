"""
Differentiable operations over dense tensors.

Every op computes its forward value with numpy and, when any input requires a
gradient and recording is enabled, attaches a TapeNode whose vector-Jacobian
product maps the output adjoint back onto each input. Binary elementwise ops
broadcast with numpy rules; adjoints are summed back over broadcast axes.
"""
from __future__ import annotations

import builtins
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from gradnav.diffcore.tensor import (
    ShapeMismatchError,
    TapeNode,
    Tensor,
    as_tensor,
    is_grad_enabled,
)

TensorLike = Union[Tensor, np.ndarray, float, int]


def _record(op: str, value: np.ndarray, inputs: Sequence[Tensor], vjp, saved: Tuple = ()) -> Tensor:
    out = Tensor(value)
    if is_grad_enabled() and builtins.any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.node = TapeNode(op=op, inputs=tuple(inputs), saved=tuple(saved), vjp=vjp)
    return out


def _broadcast(op: str, a: Tensor, b: Tensor) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatchError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ----------------------------------------------------------------- elementwise
def add(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast("add", a, b)

    def vjp(g):
        return unbroadcast(g, a.shape), unbroadcast(g, b.shape)

    return _record("add", a.data + b.data, (a, b), vjp)


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast("sub", a, b)

    def vjp(g):
        return unbroadcast(g, a.shape), unbroadcast(-g, b.shape)

    return _record("sub", a.data - b.data, (a, b), vjp)


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast("mul", a, b)

    def vjp(g, x, y):
        return unbroadcast(g * y, a.shape), unbroadcast(g * x, b.shape)

    return _record("mul", a.data * b.data, (a, b), vjp, (a.data, b.data))


def div(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast("div", a, b)
    value = a.data / b.data

    def vjp(g, y, out):
        return unbroadcast(g / y, a.shape), unbroadcast(-g * out / y, b.shape)

    return _record("div", value, (a, b), vjp, (b.data, value))


def neg(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    return _record("neg", -a.data, (a,), lambda g: (-g,))


def power(a: TensorLike, exponent: float) -> Tensor:
    a = as_tensor(a)
    exponent = float(exponent)

    def vjp(g, x):
        return (g * exponent * x ** (exponent - 1.0),)

    return _record("power", a.data ** exponent, (a,), vjp, (a.data,))


def square(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    return _record("square", a.data * a.data, (a,), lambda g, x: (2.0 * g * x,), (a.data,))


def sqrt(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    value = np.sqrt(a.data)

    def vjp(g, out):
        with np.errstate(divide="ignore", invalid="ignore"):
            grad = np.where(out > 0.0, 0.5 * g / np.where(out > 0.0, out, 1.0), 0.0)
        return (grad,)

    return _record("sqrt", value, (a,), vjp, (value,))


def exp(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    value = np.exp(a.data)
    return _record("exp", value, (a,), lambda g, out: (g * out,), (value,))


def log(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    return _record("log", np.log(a.data), (a,), lambda g, x: (g / x,), (a.data,))


def tanh(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    value = np.tanh(a.data)
    return _record("tanh", value, (a,), lambda g, out: (g * (1.0 - out * out),), (value,))


def sigmoid(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    x = a.data
    value = np.empty_like(x)
    positive = x >= 0
    value[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
    ex = np.exp(x[~positive])
    value[~positive] = ex / (1.0 + ex)
    return _record("sigmoid", value, (a,), lambda g, out: (g * out * (1.0 - out),), (value,))


def relu(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0.0
    return _record("relu", np.where(mask, a.data, 0.0), (a,), lambda g, m: (g * m,), (mask,))


def maximum(a: TensorLike, b: TensorLike) -> Tensor:
    """Elementwise maximum; ties send the adjoint to the first operand."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast("maximum", a, b)
    pick_a = a.data >= b.data

    def vjp(g, mask):
        return unbroadcast(g * mask, a.shape), unbroadcast(g * ~mask, b.shape)

    return _record("maximum", np.where(pick_a, a.data, b.data), (a, b), vjp, (pick_a,))


def minimum(a: TensorLike, b: TensorLike) -> Tensor:
    """Elementwise minimum; ties send the adjoint to the first operand."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast("minimum", a, b)
    pick_a = a.data <= b.data

    def vjp(g, mask):
        return unbroadcast(g * mask, a.shape), unbroadcast(g * ~mask, b.shape)

    return _record("minimum", np.where(pick_a, a.data, b.data), (a, b), vjp, (pick_a,))


def clamp(a: TensorLike, low: Optional[float] = None, high: Optional[float] = None) -> Tensor:
    a = as_tensor(a)
    lo = -np.inf if low is None else low
    hi = np.inf if high is None else high
    inside = (a.data >= lo) & (a.data <= hi)
    return _record("clamp", np.clip(a.data, lo, hi), (a,), lambda g, m: (g * m,), (inside,))


def where(condition: np.ndarray, a: TensorLike, b: TensorLike) -> Tensor:
    """Select from ``a`` where ``condition`` holds, else from ``b`` (condition is constant)."""
    a, b = as_tensor(a), as_tensor(b)
    cond = np.asarray(condition, dtype=bool)
    try:
        np.broadcast_shapes(cond.shape, a.shape, b.shape)
    except ValueError:
        raise ShapeMismatchError(
            f"where: incompatible shapes {cond.shape}, {a.shape} and {b.shape}"
        ) from None

    def vjp(g, c):
        return unbroadcast(np.where(c, g, 0.0), a.shape), unbroadcast(np.where(c, 0.0, g), b.shape)

    return _record("where", np.where(cond, a.data, b.data), (a, b), vjp, (cond,))


# ------------------------------------------------------------------ reductions
def sum(a: TensorLike, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    shape = a.shape

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _record("sum", np.sum(a.data, axis=axis, keepdims=keepdims), (a,), vjp)


def mean(a: TensorLike, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    if axis is None:
        count = a.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        count = int(np.prod([a.shape[ax] for ax in axes]))
    return sum(a, axis=axis, keepdims=keepdims) * (1.0 / count)


def norm(a: TensorLike, axis: int = -1, keepdims: bool = False) -> Tensor:
    """Euclidean norm along ``axis``; the adjoint at a zero vector is zero."""
    a = as_tensor(a)
    value = np.sqrt(np.sum(a.data * a.data, axis=axis, keepdims=True))

    def vjp(g, x, n):
        if not keepdims:
            g = np.expand_dims(g, axis)
        safe = np.where(n > 0.0, n, 1.0)
        return (np.where(n > 0.0, g * x / safe, 0.0),)

    out = value if keepdims else np.squeeze(value, axis=axis)
    return _record("norm", out, (a,), vjp, (a.data, value))


# ---------------------------------------------------------------- linear algebra
def matmul(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 1 or b.ndim < 1:
        raise ShapeMismatchError(f"matmul: scalar operands not supported ({a.shape}, {b.shape})")
    try:
        value = np.matmul(a.data, b.data)
    except ValueError:
        raise ShapeMismatchError(f"matmul: incompatible shapes {a.shape} and {b.shape}") from None

    def vjp(g, x, y):
        x2 = x[None, :] if x.ndim == 1 else x
        y2 = y[:, None] if y.ndim == 1 else y
        g2 = g
        if x.ndim == 1:
            g2 = np.expand_dims(g2, -2)
        if y.ndim == 1:
            g2 = np.expand_dims(g2, -1)
        ga = np.matmul(g2, np.swapaxes(y2, -1, -2))
        gb = np.matmul(np.swapaxes(x2, -1, -2), g2)
        if x.ndim == 1:
            ga = ga.reshape(ga.shape[:-2] + (ga.shape[-1],))
        if y.ndim == 1:
            gb = gb.reshape(gb.shape[:-2] + (gb.shape[-2],))
        return unbroadcast(ga, x.shape), unbroadcast(gb, y.shape)

    return _record("matmul", value, (a, b), vjp, (a.data, b.data))


def cross(a: TensorLike, b: TensorLike) -> Tensor:
    """Cross product along the last axis (extent 3)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1:] != (3,) or b.shape[-1:] != (3,):
        raise ShapeMismatchError(f"cross: last axis must be 3, got {a.shape} and {b.shape}")
    _broadcast("cross", a, b)

    def vjp(g, x, y):
        return unbroadcast(np.cross(y, g), a.shape), unbroadcast(np.cross(g, x), b.shape)

    return _record("cross", np.cross(a.data, b.data), (a, b), vjp, (a.data, b.data))


def quat_mul(q: TensorLike, r: TensorLike) -> Tensor:
    """Batched Hamilton product of scalar-first quaternions (last axis 4)."""
    q, r = as_tensor(q), as_tensor(r)
    if q.shape[-1:] != (4,) or r.shape[-1:] != (4,):
        raise ShapeMismatchError(f"quat_mul: last axis must be 4, got {q.shape} and {r.shape}")
    _broadcast("quat_mul", q, r)
    q0, q1, q2, q3 = np.moveaxis(q.data, -1, 0)
    r0, r1, r2, r3 = np.moveaxis(r.data, -1, 0)
    value = np.stack(
        [
            q0 * r0 - q1 * r1 - q2 * r2 - q3 * r3,
            q0 * r1 + q1 * r0 + q2 * r3 - q3 * r2,
            q0 * r2 - q1 * r3 + q2 * r0 + q3 * r1,
            q0 * r3 + q1 * r2 - q2 * r1 + q3 * r0,
        ],
        axis=-1,
    )

    def vjp(g, qd, rd):
        g0, g1, g2, g3 = np.moveaxis(g, -1, 0)
        a0, a1, a2, a3 = np.moveaxis(qd, -1, 0)
        b0, b1, b2, b3 = np.moveaxis(rd, -1, 0)
        grad_q = np.stack(
            [
                g0 * b0 + g1 * b1 + g2 * b2 + g3 * b3,
                -g0 * b1 + g1 * b0 - g2 * b3 + g3 * b2,
                -g0 * b2 + g1 * b3 + g2 * b0 - g3 * b1,
                -g0 * b3 - g1 * b2 + g2 * b1 + g3 * b0,
            ],
            axis=-1,
        )
        grad_r = np.stack(
            [
                g0 * a0 + g1 * a1 + g2 * a2 + g3 * a3,
                -g0 * a1 + g1 * a0 + g2 * a3 - g3 * a2,
                -g0 * a2 - g1 * a3 + g2 * a0 + g3 * a1,
                -g0 * a3 + g1 * a2 - g2 * a1 + g3 * a0,
            ],
            axis=-1,
        )
        return unbroadcast(grad_q, q.shape), unbroadcast(grad_r, r.shape)

    return _record("quat_mul", value, (q, r), vjp, (q.data, r.data))


# ------------------------------------------------------------------ structural
def reshape(a: TensorLike, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    original = a.shape
    try:
        value = a.data.reshape(tuple(shape))
    except ValueError:
        raise ShapeMismatchError(f"reshape: cannot reshape {original} into {tuple(shape)}") from None
    return _record("reshape", value, (a,), lambda g: (g.reshape(original),))


def transpose(a: TensorLike, axes: Optional[Sequence[int]] = None) -> Tensor:
    a = as_tensor(a)
    perm = tuple(reversed(range(a.ndim))) if axes is None else tuple(axes)
    inverse = tuple(np.argsort(perm))
    return _record("transpose", np.transpose(a.data, perm), (a,), lambda g: (np.transpose(g, inverse),))


def index(a: TensorLike, key) -> Tensor:
    """Basic or advanced indexing (slicing); the adjoint scatters back with accumulation."""
    a = as_tensor(a)
    if isinstance(key, Tensor):
        key = key.data.astype(np.int64)
    if isinstance(key, np.ndarray) and key.dtype == bool:
        key = np.nonzero(key)
    try:
        value = a.data[key]
    except IndexError as exc:
        raise ShapeMismatchError(f"index: {exc} for shape {a.shape}") from None
    shape = a.shape

    def vjp(g):
        full = np.zeros(shape, dtype=np.float64)
        np.add.at(full, key, g)
        return (full,)

    return _record("index", np.array(value, dtype=np.float64), (a,), vjp)


def concat(tensors: Sequence[TensorLike], axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    try:
        value = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError:
        shapes = [p.shape for p in parts]
        raise ShapeMismatchError(f"concat: incompatible shapes {shapes} on axis {axis}") from None
    bounds = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def vjp(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _record("concat", value, parts, vjp)


def stack(tensors: Sequence[TensorLike], axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    try:
        value = np.stack([p.data for p in parts], axis=axis)
    except ValueError:
        shapes = [p.shape for p in parts]
        raise ShapeMismatchError(f"stack: incompatible shapes {shapes}") from None

    def vjp(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(parts)))

    return _record("stack", value, parts, vjp)


# ---------------------------------------------------------------- convolution
def _im2col(x: np.ndarray, kernel: int, stride: int, padding: int) -> np.ndarray:
    padded = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, (kernel, kernel), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride]
    # (N, C, oh, ow, k, k) -> (N, oh, ow, C*k*k)
    n, c, oh, ow = windows.shape[:4]
    return np.ascontiguousarray(windows.transpose(0, 2, 3, 1, 4, 5)).reshape(n, oh, ow, c * kernel * kernel)


def conv2d(x: TensorLike, weight: TensorLike, bias: TensorLike, stride: int = 1, padding: int = 0) -> Tensor:
    """2D cross-correlation, NCHW input, weight (out, in, k, k)."""
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[1]:
        raise ShapeMismatchError(f"conv2d: input {x.shape} incompatible with weight {weight.shape}")
    out_channels, in_channels, kernel, _ = weight.shape
    cols = _im2col(x.data, kernel, stride, padding)
    w_mat = weight.data.reshape(out_channels, -1)
    value = (cols @ w_mat.T + bias.data).transpose(0, 3, 1, 2)
    in_shape = x.shape

    def vjp(g, cols_saved, w_saved):
        g_nhwc = g.transpose(0, 2, 3, 1)
        grad_w = (g_nhwc.reshape(-1, out_channels).T @ cols_saved.reshape(-1, cols_saved.shape[-1]))
        grad_b = g_nhwc.reshape(-1, out_channels).sum(axis=0)
        grad_x = None
        if x.requires_grad:
            grad_cols = g_nhwc @ w_saved
            n, oh, ow, _ = grad_cols.shape
            grad_cols = grad_cols.reshape(n, oh, ow, in_channels, kernel, kernel)
            padded = np.zeros((n, in_channels, in_shape[2] + 2 * padding, in_shape[3] + 2 * padding))
            for ki in range(kernel):
                for kj in range(kernel):
                    padded[:, :, ki:ki + stride * oh:stride, kj:kj + stride * ow:stride] += (
                        grad_cols[:, :, :, :, ki, kj].transpose(0, 3, 1, 2)
                    )
            grad_x = padded[:, :, padding:padding + in_shape[2], padding:padding + in_shape[3]]
        return grad_x, grad_w.reshape(weight.shape), grad_b

    return _record("conv2d", value, (x, weight, bias), vjp, (cols, w_mat))


# ------------------------------------------------------------------- helpers
def normalize(a: TensorLike, axis: int = -1) -> Tensor:
    """Scale vectors along ``axis`` to unit length."""
    a = as_tensor(a)
    if np.any(np.sqrt(np.sum(a.data * a.data, axis=axis)) == 0.0):
        raise ValueError("normalize: zero-length vector")
    return a / norm(a, axis=axis, keepdims=True)
