"""
Dense tensors and the reverse-mode tape.

A Tensor wraps a NumPy array. When a Tape is active (used as a context
manager), every primitive applied to a tensor that requires gradients appends
its output to the tape together with a backward rule. `backward` then walks
the tape in reverse creation order, which is a valid topological order.
"""

import threading
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from geoformer.core.errors import GeoFormerError

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class TensorShapeError(GeoFormerError):
    """Raised when operand shapes are incompatible."""
    pass


class GradientError(GeoFormerError):
    """Raised when gradients cannot be computed."""
    pass


class Tensor:
    """An n-dimensional array with an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward", "op")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        name: Optional[str] = None,
        dtype=None,
    ):
        array = np.asarray(data, dtype=dtype)
        if array.dtype.kind != "f":
            array = array.astype(np.float32)
        self.data: np.ndarray = array
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[BackwardFn] = None
        self.op = "leaf"

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def zero_grad(self) -> None:
        self.grad = None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, op={self.op}{label})"

    # Operator sugar; the primitives live in geoformer.autograd.ops.
    def __add__(self, other):
        from geoformer.autograd import ops
        return ops.add(self, other)

    def __sub__(self, other):
        from geoformer.autograd import ops
        return ops.sub(self, other)

    def __mul__(self, other):
        from geoformer.autograd import ops
        if isinstance(other, Tensor):
            return ops.mul(self, other)
        return ops.scale(self, float(other))

    def __matmul__(self, other):
        from geoformer.autograd import ops
        return ops.matmul(self, other)


class Tape:
    """Ordered record of primitive applications."""

    _local = threading.local()

    def __init__(self):
        self.nodes: List[Tensor] = []

    def record(self, node: Tensor) -> None:
        self.nodes.append(node)

    def __len__(self) -> int:
        return len(self.nodes)

    def __enter__(self) -> "Tape":
        stack = self._stack()
        stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        self._stack().pop()

    @classmethod
    def _stack(cls) -> List["Tape"]:
        stack = getattr(cls._local, "stack", None)
        if stack is None:
            stack = []
            cls._local.stack = stack
        return stack

    @classmethod
    def current(cls) -> Optional["Tape"]:
        stack = cls._stack()
        return stack[-1] if stack else None


def make_node(
    data: np.ndarray,
    parents: Sequence[Tensor],
    backward_fn: BackwardFn,
    op: str,
) -> Tensor:
    """Wrap a primitive's output, recording it when a tape is active."""
    out = Tensor(data)
    tape = Tape.current()
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
        out.op = op
        tape.record(out)
    else:
        out.op = op
    return out


def backward(
    tape: Tape, loss: Tensor, params: Optional[Iterable[Tensor]] = None
) -> None:
    """
    Populate gradients of everything the loss depends on.

    Leaf gradients accumulate across calls; intermediate gradients are reset
    on every call. Parameters passed in `params` that the loss does not reach
    receive a zero gradient.

    Raises:
        GradientError: If the loss is not a scalar or was not recorded
    """
    if loss.data.size != 1:
        raise GradientError(f"loss must be a scalar, got shape {loss.shape}")
    if not loss.requires_grad or loss.is_leaf:
        raise GradientError("loss was not produced by a recorded primitive")

    for node in tape.nodes:
        node.grad = None
    loss.grad = np.ones_like(loss.data)

    for node in reversed(tape.nodes):
        if node.grad is None:
            continue
        grads = node._backward(node.grad)
        for parent, g in zip(node._parents, grads):
            if g is None or not parent.requires_grad:
                continue
            if g.shape != parent.shape:
                raise GradientError(
                    f"{node.op} produced gradient of shape {g.shape} for input {parent.shape}"
                )
            parent.grad = g if parent.grad is None else parent.grad + g

    if params is not None:
        for p in params:
            if p.grad is None:
                p.grad = np.zeros_like(p.data)
