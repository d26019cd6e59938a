"""Dense tensors with reverse-mode automatic differentiation.

A ``Tensor`` wraps a numpy array. Every differentiable operation is a
``Function`` subclass with a ``forward`` over raw arrays and a ``backward``
returning one gradient per input. Calling ``Tensor.backward`` on a scalar
builds a ``ComputationTape`` (the operations reachable from the loss in
topological order) and replays it in reverse.

Training runs in 32-bit floats. Gradient checks switch to 64-bit with
``default_dtype(np.float64)``.
"""

from __future__ import annotations

import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ContractError, DimensionError

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, float, int, Sequence]

_default_dtype: np.dtype = np.dtype(np.float32)
_grad_enabled: bool = True


def get_default_dtype() -> np.dtype:
    return _default_dtype


@contextmanager
def default_dtype(dtype) -> Iterator[None]:
    """Temporarily change the float type of newly created tensors."""
    global _default_dtype
    previous = _default_dtype
    _default_dtype = np.dtype(dtype)
    try:
        yield
    finally:
        _default_dtype = previous


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording (inference and extraction)."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def is_grad_enabled() -> bool:
    return _grad_enabled


class Function:
    """Base class for differentiable operations."""

    def __init__(self, *inputs: "Tensor"):
        self.inputs = inputs

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError

    @classmethod
    def apply(cls, *inputs: "Tensor", **kwargs: Any) -> "Tensor":
        fn = cls(*inputs)
        out = fn.forward(*(t.data for t in inputs), **kwargs)
        requires_grad = _grad_enabled and any(t.requires_grad for t in inputs)
        return Tensor(out, requires_grad=requires_grad, dtype=out.dtype, _ctx=fn if requires_grad else None)

    @staticmethod
    def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
        """Sum a broadcast gradient back down to ``shape``."""
        if grad.shape == shape:
            return grad
        while grad.ndim > len(shape):
            grad = grad.sum(axis=0)
        for axis, size in enumerate(shape):
            if size == 1 and grad.shape[axis] != 1:
                grad = grad.sum(axis=axis, keepdims=True)
        return grad


class Tensor:
    """An n-dimensional float array that can record its own gradient."""

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        dtype=None,
        name: str = "",
        _ctx: Optional[Function] = None,
    ):
        self.data = np.asarray(data, dtype=dtype if dtype is not None else _default_dtype)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._ctx = _ctx

    # ── basic properties ──

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
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label}, requires_grad={self.requires_grad})"

    # ── arithmetic ──

    def __add__(self, other: Union["Tensor", float]) -> "Tensor":
        return Add.apply(self, _lift(other, self.dtype))

    __radd__ = __add__

    def __sub__(self, other: Union["Tensor", float]) -> "Tensor":
        return Add.apply(self, Neg.apply(_lift(other, self.dtype)))

    def __rsub__(self, other: Union["Tensor", float]) -> "Tensor":
        return Add.apply(_lift(other, self.dtype), Neg.apply(self))

    def __mul__(self, other: Union["Tensor", float]) -> "Tensor":
        return Mul.apply(self, _lift(other, self.dtype))

    __rmul__ = __mul__

    def __truediv__(self, other: float) -> "Tensor":
        if isinstance(other, Tensor):
            raise ContractError("division is only defined by a constant scalar")
        return Mul.apply(self, _lift(1.0 / float(other), self.dtype))

    def __neg__(self) -> "Tensor":
        return Neg.apply(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return MatMul.apply(self, other)

    def __getitem__(self, index: Any) -> "Tensor":
        return GetItem.apply(self, index=index)

    # ── shape ops and reductions ──

    def reshape(self, *shape: int) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Reshape.apply(self, shape=shape)

    def transpose(self, *axes: int) -> "Tensor":
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        return Permute.apply(self, axes=axes)

    def sum(self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> "Tensor":
        return Sum.apply(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        count = self.size if axis is None else self.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    # ── autodiff ──

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """Populate ``grad`` on every tensor reachable from this scalar.

        Gradients accumulate across calls; use ``zero_grad`` to reset.
        """
        if self.size != 1:
            raise ContractError(f"backward() needs a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            raise ContractError("loss does not depend on any tensor that requires a gradient")
        seed = np.ones_like(self.data) if grad is None else np.asarray(grad, dtype=self.dtype)
        ComputationTape.record(self).run_backward(self, seed)


@dataclass
class ComputationTape:
    """Operations reachable from an output, inputs always before consumers."""

    nodes: List[Tensor] = field(default_factory=list)

    @classmethod
    def record(cls, output: Tensor) -> "ComputationTape":
        order: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(output, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            if node._ctx is not None:
                for parent in node._ctx.inputs:
                    if parent.requires_grad and id(parent) not in visited:
                        stack.append((parent, False))
        return cls(nodes=order)

    def __len__(self) -> int:
        return len(self.nodes)

    def run_backward(self, output: Tensor, seed: np.ndarray) -> None:
        pending = {id(output): seed}
        for node in reversed(self.nodes):
            grad = pending.pop(id(node), None)
            if grad is None:
                continue
            grad = np.asarray(grad, dtype=node.dtype)
            node.grad = grad.copy() if node.grad is None else node.grad + grad
            if node._ctx is None:
                continue
            input_grads = node._ctx.backward(grad)
            for parent, parent_grad in zip(node._ctx.inputs, input_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                pending[key] = parent_grad if key not in pending else pending[key] + parent_grad


def _lift(value: Union[Tensor, float, np.ndarray], dtype: np.dtype) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value, requires_grad=False, dtype=dtype)


def tensor(data: ArrayLike, requires_grad: bool = False, name: str = "") -> Tensor:
    return Tensor(data, requires_grad=requires_grad, name=name)


def parameter(data: ArrayLike, name: str = "") -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


# ── primitive operations ──


class Add(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return a + b

    def backward(self, grad: np.ndarray):
        a, b = self.inputs
        return self.unbroadcast(grad, a.shape), self.unbroadcast(grad, b.shape)


class Neg(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        return -a

    def backward(self, grad: np.ndarray):
        return (-grad,)


class Mul(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return a * b

    def backward(self, grad: np.ndarray):
        a, b = self.inputs
        grad_a = self.unbroadcast(grad * b.data, a.shape) if a.requires_grad else None
        grad_b = self.unbroadcast(grad * a.data, b.shape) if b.requires_grad else None
        return grad_a, grad_b


class MatMul(Function):
    """Matrix product over the last two axes, leading axes broadcast."""

    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
            raise DimensionError(f"matmul shape mismatch: {a.shape} x {b.shape}")
        return np.matmul(a, b)

    def backward(self, grad: np.ndarray):
        a, b = self.inputs
        grad_a = grad_b = None
        if a.requires_grad:
            grad_a = self.unbroadcast(np.matmul(grad, np.swapaxes(b.data, -1, -2)), a.shape)
        if b.requires_grad:
            grad_b = self.unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), grad), b.shape)
        return grad_a, grad_b


class Reshape(Function):
    def forward(self, a: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
        return a.reshape(shape)

    def backward(self, grad: np.ndarray):
        return (grad.reshape(self.inputs[0].shape),)


class Permute(Function):
    def forward(self, a: np.ndarray, axes: Tuple[int, ...]) -> np.ndarray:
        self.axes = tuple(axes)
        return np.transpose(a, self.axes)

    def backward(self, grad: np.ndarray):
        return (np.transpose(grad, np.argsort(self.axes)),)


class Sum(Function):
    def forward(self, a: np.ndarray, axis=None, keepdims: bool = False) -> np.ndarray:
        self.axis = axis
        self.keepdims = keepdims
        return np.asarray(a.sum(axis=axis, keepdims=keepdims))

    def backward(self, grad: np.ndarray):
        shape = self.inputs[0].shape
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return (np.broadcast_to(grad, shape).copy(),)


class GetItem(Function):
    """Basic (non-fancy) indexing."""

    def forward(self, a: np.ndarray, index: Any) -> np.ndarray:
        self.index = index
        return np.array(a[index])

    def backward(self, grad: np.ndarray):
        out = np.zeros_like(self.inputs[0].data)
        out[self.index] = grad
        return (out,)
