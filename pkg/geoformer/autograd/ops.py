"""
Differentiable primitives.

Each primitive computes its forward value with NumPy and registers a backward
rule returning one gradient per input (None for non-differentiable inputs).
"""

from typing import Optional, Sequence, Tuple

import numpy as np

from geoformer.autograd import kernels
from geoformer.autograd.tensor import GradientError, Tensor, TensorShapeError, make_node
from geoformer.core.errors import GeoFormerError

IGNORE_INDEX = -100


class EmptyLossError(GeoFormerError):
    """Raised when every target position is ignored."""
    pass


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise TensorShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast")


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "add")

    def backward_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return make_node(a.data + b.data, (a, b), backward_fn, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "sub")

    def backward_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return make_node(a.data - b.data, (a, b), backward_fn, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "mul")

    def backward_fn(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return make_node(a.data * b.data, (a, b), backward_fn, "mul")


def scale(a: Tensor, c: float) -> Tensor:
    def backward_fn(g):
        return (g * c,)

    return make_node(a.data * c, (a,), backward_fn, "scale")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    Batched matrix product over the last two axes, broadcasting leading axes.

    Raises:
        TensorShapeError: If either operand has fewer than 2 axes or the inner
            dimensions differ
    """
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise TensorShapeError(f"matmul needs matrices, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise TensorShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")

    def backward_fn(g):
        grad_a = np.matmul(g, np.swapaxes(b.data, -1, -2))
        grad_b = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(grad_a, a.shape), _unbroadcast(grad_b, b.shape)

    return make_node(np.matmul(a.data, b.data), (a, b), backward_fn, "matmul")


def sum(a: Tensor) -> Tensor:  # noqa: A001 - mirrors numpy naming
    def backward_fn(g):
        return (np.broadcast_to(g.reshape(()), a.shape).astype(a.dtype),)

    return make_node(np.asarray(a.data.sum(), dtype=a.dtype), (a,), backward_fn, "sum")


def mean(a: Tensor) -> Tensor:
    n = a.data.size

    def backward_fn(g):
        return (np.full(a.shape, g.reshape(()) / n, dtype=a.dtype),)

    return make_node(np.asarray(a.data.mean(), dtype=a.dtype), (a,), backward_fn, "mean")


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    def backward_fn(g):
        return (g.reshape(a.shape),)

    return make_node(a.data.reshape(shape), (a,), backward_fn, "reshape")


def transpose(a: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(a.data.ndim)))
    inverse = tuple(np.argsort(axes))

    def backward_fn(g):
        return (g.transpose(inverse),)

    return make_node(a.data.transpose(axes), (a,), backward_fn, "transpose")


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    y = kernels.softmax(x.data, axis=axis)

    def backward_fn(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return make_node(y, (x,), backward_fn, "softmax")


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then apply gain and bias."""
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise TensorShapeError(
            f"layer_norm gain/bias must have shape ({d},), got {gain.shape} and {bias.shape}"
        )
    out, xhat, rstd = kernels.layer_norm(x.data, gain.data, bias.data, eps)

    def backward_fn(g):
        lead = tuple(range(g.ndim - 1))
        grad_gain = (g * xhat).sum(axis=lead)
        grad_bias = g.sum(axis=lead)
        dxhat = g * gain.data
        grad_x = rstd * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        return grad_x, grad_gain, grad_bias

    return make_node(out, (x, gain, bias), backward_fn, "layer_norm")


def gelu(x: Tensor) -> Tensor:
    def backward_fn(g):
        return (g * kernels.gelu_grad(x.data),)

    return make_node(kernels.gelu(x.data), (x,), backward_fn, "gelu")


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Gather rows of `table`; the backward pass scatter-adds into the rows."""
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise TensorShapeError(
            f"embedding ids must lie in [0, {table.shape[0]}), got [{ids.min()}, {ids.max()}]"
        )

    def backward_fn(g):
        grad = np.zeros_like(table.data)
        np.add.at(grad, ids.reshape(-1), g.reshape(-1, table.shape[1]))
        return (grad,)

    return make_node(table.data[ids], (table,), backward_fn, "embedding")


def dropout(
    x: Tensor, rate: float, rng: Optional[np.random.Generator], training: bool
) -> Tensor:
    """Inverted dropout in training mode; identity otherwise or at rate 0."""
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise GradientError("dropout in training mode needs a random generator")
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)

    def backward_fn(g):
        return (g * keep,)

    return make_node(x.data * keep, (x,), backward_fn, "dropout")


def causal_mask(scores: Tensor) -> Tensor:
    """Add -1e9 above the diagonal of the last two axes."""
    t_query, t_key = scores.shape[-2], scores.shape[-1]
    mask = kernels.causal_mask(t_query, t_key, scores.dtype)

    def backward_fn(g):
        return (g,)

    return make_node(scores.data + mask, (scores,), backward_fn, "causal_mask")


def cross_entropy(
    logits: Tensor, targets: np.ndarray, ignore_index: int = IGNORE_INDEX
) -> Tensor:
    """
    Mean cross-entropy over rows whose target is not `ignore_index`.

    Args:
        logits: Tensor of shape [N, V]
        targets: Integer array of shape [N]

    Raises:
        EmptyLossError: If every target is ignored
    """
    targets = np.asarray(targets).reshape(-1)
    if logits.data.ndim != 2 or logits.shape[0] != targets.shape[0]:
        raise TensorShapeError(
            f"cross_entropy expects [N, V] logits and [N] targets, got {logits.shape} "
            f"and {targets.shape}"
        )
    valid = targets != ignore_index
    count = int(valid.sum())
    if count == 0:
        raise EmptyLossError("all target positions are ignored")

    rows = np.flatnonzero(valid)
    picked = targets[rows]
    logp = kernels.log_softmax(logits.data[rows], axis=-1)
    loss = -logp[np.arange(count), picked].sum() / count

    def backward_fn(g):
        probs = np.exp(logp)
        probs[np.arange(count), picked] -= 1.0
        grad = np.zeros_like(logits.data)
        grad[rows] = probs * (g.reshape(()) / count)
        return (grad,)

    return make_node(np.asarray(loss, dtype=logits.dtype), (logits,), backward_fn, "cross_entropy")
