"""Dense tensor arithmetic with reverse-mode automatic differentiation.

A ``Tensor`` wraps a float32/float64 numpy array and records the operations
that produced it. Calling :func:`backward` on a scalar result walks the
recorded graph in reverse topological order and accumulates gradients into
every reachable tensor that has ``requires_grad`` set. Gradients add up
across repeated uses of the same tensor, so parameters shared between
branches receive the sum of both contributions.

Every public operation validates that its result is finite. NaN or Inf is a
bug in the caller's numerics and raises :class:`NonFiniteError` immediately
instead of propagating silently.
"""

from __future__ import annotations

import math
from typing import Iterable, Mapping

import numpy as np

DEFAULT_DTYPE = np.float32


class ShapeError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class NonFiniteError(ArithmeticError):
    """An operation produced NaN or Inf."""


def _as_float_array(data, dtype=None) -> np.ndarray:
    arr = np.asarray(data, dtype=dtype)
    if arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(DEFAULT_DTYPE)
    return arr


def _check_finite(arr: np.ndarray, op: str) -> None:
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"{op} produced non-finite values")


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` over broadcast axes so it matches the operand ``shape``."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """Immutable dense array plus the bookkeeping needed for backward()."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = _as_float_array(data, dtype)
        _check_finite(self.data, "tensor construction")
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @classmethod
    def _from_op(cls, data: np.ndarray, parents: tuple["Tensor", ...], backward, op: str) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        _check_finite(data, op)
        out.grad = None
        out.requires_grad = any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = parents
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        return out

    # -- introspection -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        grad = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}{grad})"

    # -- gradient plumbing ----------------------------------------------

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    # -- arithmetic ------------------------------------------------------

    def _coerce(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.data.dtype))

    def __add__(self, other):
        other = self._coerce(other)
        out_data = self.data + other.data

        def bwd(grad, a=self, b=other):
            if a.requires_grad:
                a._accumulate(_unbroadcast(grad, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(grad, b.shape))

        return Tensor._from_op(out_data, (self, other), bwd, "add")

    __radd__ = __add__

    def __neg__(self):
        def bwd(grad, a=self):
            if a.requires_grad:
                a._accumulate(-grad)

        return Tensor._from_op(-self.data, (self,), bwd, "neg")

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        out_data = self.data * other.data

        def bwd(grad, a=self, b=other):
            if a.requires_grad:
                a._accumulate(_unbroadcast(grad * b.data, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(grad * a.data, b.shape))

        return Tensor._from_op(out_data, (self, other), bwd, "mul")

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("tensor/tensor division is not supported; multiply by a reciprocal")
        return self * (1.0 / float(other))

    def __pow__(self, exponent):
        p = float(exponent)
        out_data = self.data**p

        def bwd(grad, a=self, p=p):
            if a.requires_grad:
                a._accumulate(grad * p * a.data ** (p - 1.0))

        return Tensor._from_op(out_data, (self,), bwd, "pow")

    def __matmul__(self, other):
        return matmul(self, self._coerce(other))

    # -- shape manipulation ----------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old_shape = self.shape
        out_data = self.data.reshape(shape)

        def bwd(grad, a=self, old=old_shape):
            if a.requires_grad:
                a._accumulate(grad.reshape(old))

        return Tensor._from_op(out_data, (self,), bwd, "reshape")

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        inverse = tuple(np.argsort(axes))
        out_data = self.data.transpose(axes)

        def bwd(grad, a=self, inverse=inverse):
            if a.requires_grad:
                a._accumulate(grad.transpose(inverse))

        return Tensor._from_op(out_data, (self,), bwd, "transpose")

    def broadcast_to(self, shape):
        shape = tuple(shape)
        out_data = np.ascontiguousarray(np.broadcast_to(self.data, shape))

        def bwd(grad, a=self):
            if a.requires_grad:
                a._accumulate(_unbroadcast(grad, a.shape))

        return Tensor._from_op(out_data, (self,), bwd, "broadcast_to")

    def __getitem__(self, index):
        out_data = self.data[index]
        if np.isscalar(out_data) or out_data.ndim == 0:
            out_data = np.asarray(out_data)

        def bwd(grad, a=self, index=index):
            if a.requires_grad:
                full = np.zeros_like(a.data)
                np.add.at(full, index, grad)
                a._accumulate(full)

        return Tensor._from_op(out_data, (self,), bwd, "getitem")

    # -- reductions -------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        out_data = self.data.sum(axis=axis, keepdims=keepdims)
        out_data = np.asarray(out_data)

        def bwd(grad, a=self, axis=axis, keepdims=keepdims):
            if not a.requires_grad:
                return
            g = grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(g, a.shape).copy())

        return Tensor._from_op(out_data, (self,), bwd, "sum")

    def mean(self, axis=None, keepdims: bool = False):
        if axis is None:
            count = self.size
        else:
            count = self.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    # -- elementwise transcendental ----------------------------------------

    def exp(self):
        with np.errstate(over="ignore"):
            out_data = np.exp(self.data)

        def bwd(grad, a=self, out=out_data):
            if a.requires_grad:
                a._accumulate(grad * out)

        return Tensor._from_op(out_data, (self,), bwd, "exp")

    def log(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            out_data = np.log(self.data)

        def bwd(grad, a=self):
            if a.requires_grad:
                a._accumulate(grad / a.data)

        return Tensor._from_op(out_data, (self,), bwd, "log")

    def clamp_min(self, floor: float):
        out_data = np.maximum(self.data, floor)

        def bwd(grad, a=self, floor=floor):
            if a.requires_grad:
                a._accumulate(grad * (a.data > floor))

        return Tensor._from_op(out_data, (self,), bwd, "clamp_min")


# -- free-function operations -------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; leading dimensions broadcast as in numpy."""
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul requires >=2-d operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        out_data = np.matmul(a.data, b.data)

    def bwd(grad, a=a, b=b):
        if a.requires_grad:
            ga = np.matmul(grad, b.data.swapaxes(-1, -2))
            a._accumulate(_unbroadcast(ga, a.shape))
        if b.requires_grad:
            gb = np.matmul(a.data.swapaxes(-1, -2), grad)
            b._accumulate(_unbroadcast(gb, b.shape))

    return Tensor._from_op(out_data, (a, b), bwd, "matmul")


def concat(tensors: Iterable[Tensor], axis: int = 0) -> Tensor:
    tensors = tuple(tensors)
    if not tensors:
        raise ValueError("concat of no tensors")
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(grad, tensors=tensors, axis=axis, splits=splits):
        pieces = np.split(grad, splits, axis=axis)
        for t, piece in zip(tensors, pieces):
            if t.requires_grad:
                t._accumulate(piece)

    return Tensor._from_op(out_data, tensors, bwd, "concat")


def _validate_axis(x: Tensor, axis: int, op: str) -> int:
    if not -x.ndim <= axis < x.ndim:
        raise ValueError(f"{op}: axis {axis} out of range for shape {x.shape}")
    axis = axis % x.ndim
    if x.shape[axis] == 0:
        raise ValueError(f"{op}: axis {axis} of shape {x.shape} is empty")
    return axis


def softmax_array(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Plain-array softmax for inference outputs; no graph involved."""
    x = np.asarray(x)
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Exp-normalize along ``axis``; max-subtracted for overflow safety."""
    axis = _validate_axis(x, axis, "softmax")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def bwd(grad, x=x, out=out_data, axis=axis):
        if x.requires_grad:
            inner = (grad * out).sum(axis=axis, keepdims=True)
            x._accumulate(out * (grad - inner))

    return Tensor._from_op(out_data, (x,), bwd, "softmax")


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    axis = _validate_axis(x, axis, "log_softmax")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    out_data = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def bwd(grad, x=x, out=out_data, axis=axis):
        if x.requires_grad:
            x._accumulate(grad - np.exp(out) * grad.sum(axis=axis, keepdims=True))

    return Tensor._from_op(out_data, (x,), bwd, "log_softmax")


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Zero-mean unit-variance normalization over the last axis, then affine."""
    if eps <= 0:
        raise ValueError(f"layer_norm eps must be positive, got {eps}")
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(
            f"layer_norm gain/bias must have shape ({d},), got {gain.shape} and {bias.shape}"
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    out_data = xhat * gain.data + bias.data

    def bwd(grad, x=x, gain=gain, bias=bias, xhat=xhat, inv=inv):
        if gain.requires_grad:
            gain._accumulate((grad * xhat).reshape(-1, xhat.shape[-1]).sum(axis=0))
        if bias.requires_grad:
            bias._accumulate(grad.reshape(-1, xhat.shape[-1]).sum(axis=0))
        if x.requires_grad:
            dxhat = grad * gain.data
            m1 = dxhat.mean(axis=-1, keepdims=True)
            m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
            x._accumulate(inv * (dxhat - m1 - xhat * m2))

    return Tensor._from_op(out_data, (x, gain, bias), bwd, "layer_norm")


_GELU_K = math.sqrt(2.0 / math.pi)
_GELU_C = 0.044715


def gelu(x: Tensor) -> Tensor:
    """Gaussian error linear unit, tanh approximation."""
    inner = _GELU_K * (x.data + _GELU_C * x.data**3)
    t = np.tanh(inner)
    out_data = 0.5 * x.data * (1.0 + t)

    def bwd(grad, x=x, t=t):
        if x.requires_grad:
            d_inner = _GELU_K * (1.0 + 3.0 * _GELU_C * x.data**2)
            deriv = 0.5 * (1.0 + t) + 0.5 * x.data * (1.0 - t * t) * d_inner
            x._accumulate(grad * deriv)

    return Tensor._from_op(out_data, (x,), bwd, "gelu")


# -- graph traversal ------------------------------------------------------


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` on every tensor the scalar ``loss`` depends on."""
    if loss.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.shape}")
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def zero_grads(params: Iterable[Tensor]) -> None:
    for p in params:
        p.zero_grad()


def collect_grads(named: Mapping[str, Tensor]) -> dict[str, np.ndarray]:
    """Gradient per named parameter; zeros for parameters off the loss path."""
    grads = {}
    for name, p in named.items():
        grads[name] = np.zeros_like(p.data) if p.grad is None else p.grad
    return grads
