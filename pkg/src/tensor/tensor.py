"""
Dense 64-bit tensor with reverse-mode differentiation.

A ``Tensor`` wraps a float64 ``numpy`` array. Operations on tensors that require gradients
record a closure on the output (define-by-run); ``Tensor.backward`` walks the recorded graph
in reverse topological order. The tape is rebuilt on every forward pass.
"""

from __future__ import annotations

import contextlib
import threading
from typing import Any, Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.core.errors import DimensionError, GradientError, NonFiniteError

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence[float]]
BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

_grad_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_grad_state, "enabled", True)


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Disable tape recording on the current thread."""
    previous = is_grad_enabled()
    _grad_state.enabled = False
    try:
        yield
    finally:
        _grad_state.enabled = previous


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _normalize_axes(axis: Union[None, int, Sequence[int]], ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(a % ndim for a in axis))


class Tensor:
    """N-dimensional float64 array that can take part in the gradient tape."""

    __array_priority__ = 1000

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        name: Optional[str] = None,
        _parents: Tuple["Tensor", ...] = (),
        _backward: Optional[BackwardFn] = None,
        _op: str = "",
    ):
        self.data = np.array(data, dtype=np.float64) if not isinstance(data, np.ndarray) else data.astype(
            np.float64, copy=False
        )
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._parents = _parents
        self._backward = _backward
        self._op = _op
        self._is_leaf = _backward is None
        self._consumed = False

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
    def T(self) -> "Tensor":
        return self.transpose()

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def __len__(self) -> int:
        return self.data.shape[0]

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # ------------------------------------------------------------------ tape plumbing

    @staticmethod
    def make(data: np.ndarray, parents: Tuple["Tensor", ...], backward: BackwardFn, op: str) -> "Tensor":
        """Build an op output, checking finiteness and recording the tape edge when needed."""
        if not np.all(np.isfinite(data)):
            raise NonFiniteError(f"{op}: forward produced non-finite values")
        requires = is_grad_enabled() and any(p.requires_grad for p in parents)
        if not requires:
            return Tensor(data, _op=op)
        return Tensor(data, requires_grad=True, _parents=parents, _backward=backward, _op=op)

    def backward(self) -> None:
        """
        Back-propagate from this scalar, accumulating ``.grad`` on every leaf that requires it.

        A tape can be walked once; run a fresh forward pass before calling again.
        """
        if self.data.size != 1:
            raise GradientError(f"backward() needs a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            raise GradientError("loss is detached from the gradient tape")
        if self._consumed:
            raise GradientError("backward() already called on this tape; run a new forward pass")

        order = _topological_order(self)
        pending = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            grad = pending.pop(id(node), None)
            if grad is None:
                continue
            if node._is_leaf:
                node.grad = grad.copy() if node.grad is None else node.grad + grad
                continue
            parent_grads = node._backward(grad)
            for parent, parent_grad in zip(node._parents, parent_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                if not np.all(np.isfinite(parent_grad)):
                    label = parent.name or parent._op or "tensor"
                    raise GradientError(f"non-finite gradient flowing into {label} from {node._op}")
                key = id(parent)
                pending[key] = pending[key] + parent_grad if key in pending else parent_grad

        for node in order:
            if not node._is_leaf:
                node._parents = ()
                node._backward = None
                node._consumed = True
        self._consumed = True

    # ------------------------------------------------------------------ arithmetic

    def __add__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other)
        a_shape, b_shape = self.shape, other.shape

        def backward(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
            return _unbroadcast(g, a_shape), _unbroadcast(g, b_shape)

        return Tensor.make(self.data + other.data, (self, other), backward, "add")

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        return Tensor.make(-self.data, (self,), lambda g: (-g,), "neg")

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return self + (-as_tensor(other))

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return as_tensor(other) + (-self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other)
        a, b = self.data, other.data

        def backward(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
            return _unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)

        return Tensor.make(a * b, (self, other), backward, "mul")

    __rmul__ = __mul__

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other)
        a, b = self.data, other.data

        def backward(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
            return _unbroadcast(g / b, a.shape), _unbroadcast(-g * a / (b * b), b.shape)

        return Tensor.make(a / b, (self, other), backward, "div")

    def __rtruediv__(self, other: ArrayLike) -> "Tensor":
        return as_tensor(other) / self

    def __matmul__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other)
        a, b = self.data, other.data
        if a.ndim < 2 or b.ndim < 2:
            raise DimensionError(f"matmul needs operands with ndim >= 2, got {a.shape} and {b.shape}")
        if a.shape[-1] != b.shape[-2]:
            raise DimensionError(f"matmul inner extents differ: {a.shape} @ {b.shape}")

        def backward(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
            grad_a = g @ np.swapaxes(b, -1, -2)
            grad_b = np.swapaxes(a, -1, -2) @ g
            return _unbroadcast(grad_a, a.shape), _unbroadcast(grad_b, b.shape)

        return Tensor.make(a @ b, (self, other), backward, "matmul")

    def __rmatmul__(self, other: ArrayLike) -> "Tensor":
        return as_tensor(other) @ self

    # ------------------------------------------------------------------ reductions and shape

    def sum(self, axis: Union[None, int, Sequence[int]] = None, keepdims: bool = False) -> "Tensor":
        shape = self.shape
        axes = _normalize_axes(axis, self.ndim)

        def backward(g: np.ndarray) -> Tuple[np.ndarray]:
            if not keepdims:
                g = np.expand_dims(g, axes)
            return (np.broadcast_to(g, shape).copy(),)

        return Tensor.make(self.data.sum(axis=axes, keepdims=keepdims), (self,), backward, "sum")

    def mean(self, axis: Union[None, int, Sequence[int]] = None, keepdims: bool = False) -> "Tensor":
        axes = _normalize_axes(axis, self.ndim)
        count = int(np.prod([self.shape[a] for a in axes])) if axes else 1
        if count == 0:
            raise DimensionError("mean over an empty axis")
        return self.sum(axis=axes, keepdims=keepdims) * (1.0 / count)

    def reshape(self, *shape: Any) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        original = self.shape
        return Tensor.make(self.data.reshape(shape), (self,), lambda g: (g.reshape(original),), "reshape")

    def transpose(self, *axes: int) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        inverse = tuple(np.argsort(axes))
        return Tensor.make(
            np.transpose(self.data, axes), (self,), lambda g: (np.transpose(g, inverse),), "transpose"
        )

    def __getitem__(self, key: Any) -> "Tensor":
        shape = self.shape

        def backward(g: np.ndarray) -> Tuple[np.ndarray]:
            full = np.zeros(shape, dtype=np.float64)
            np.add.at(full, key, g)
            return (full,)

        return Tensor.make(self.data[key], (self,), backward, "index")

    # ------------------------------------------------------------------ elementwise

    def exp(self) -> "Tensor":
        out = np.exp(self.data)
        return Tensor.make(out, (self,), lambda g: (g * out,), "exp")

    def log(self) -> "Tensor":
        x = self.data
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.log(x)
        return Tensor.make(out, (self,), lambda g: (g / x,), "log")


def as_tensor(value: ArrayLike) -> Tensor:
    """Wrap constants; tensors pass through unchanged."""
    return value if isinstance(value, Tensor) else Tensor(np.asarray(value, dtype=np.float64))


def _topological_order(root: Tensor) -> List[Tensor]:
    """Inputs first, ``root`` last; only nodes that require gradients are visited."""
    order: List[Tensor] = []
    visited = set()
    stack: List[Tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order
