"""Dense float64 tensors with tape-based reverse-mode automatic differentiation.

The engine is deliberately small: a `Tensor` wraps a numpy array, and every
primitive op appends a backward closure to the innermost active `Tape`.
Replaying the tape in reverse order accumulates gradients into `.grad`
arrays. Without an active tape, ops run as plain numpy (inference mode).
"""

import threading

import numpy as np

from .errors import ContractError, ShapeError

_TLS = threading.local()


def _tape_stack():
    stack = getattr(_TLS, "stack", None)
    if stack is None:
        stack = []
        _TLS.stack = stack
    return stack


def _active_tape():
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tape:
    """Ordered log of primitive ops for one forward pass (one per thread).

    Usage::

        with Tape() as tape:
            loss = model_loss(...)
            tape.backward(loss)
    """

    def __init__(self):
        self._ops = []
        self._consumed = False

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()
        return False

    def record(self, backward_fn):
        self._ops.append(backward_fn)

    def backward(self, loss: "Tensor"):
        """Accumulate d(loss)/d(x) into every reachable tensor's .grad."""
        if self._consumed:
            raise ContractError("tape already consumed by a previous backward pass")
        if loss.data.size != 1:
            raise ContractError(f"backward requires a scalar loss, got shape {loss.data.shape}")
        loss.grad = np.ones_like(loss.data)
        for fn in reversed(self._ops):
            fn()
        self._ops.clear()
        self._consumed = True


def backward(loss: "Tensor"):
    """Run backward on the innermost active tape."""
    tape = _active_tape()
    if tape is None:
        raise ContractError("backward called with no active tape")
    tape.backward(loss)


class Tensor:
    """A dense multi-dimensional float64 array plus an accumulated gradient."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    # operator sugar
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __pow__(self, exponent):
        return power(self, exponent)

    def __neg__(self):
        return mul(self, Tensor(-1.0))

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])


class Parameter(Tensor):
    """A named trainable tensor; `.grad` accumulates across a backward pass."""

    __slots__ = ("name",)

    def __init__(self, data, name: str = ""):
        super().__init__(data, requires_grad=True)
        self.name = name

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


def _wrap(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_broadcast(sa, sb):
    try:
        return np.broadcast_shapes(sa, sb)
    except ValueError:
        raise ShapeError(f"shapes {sa} and {sb} are not broadcast-compatible") from None


def _unbroadcast(g, shape):
    """Sum `g` down to `shape`, inverting numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _make_out(data, *inputs):
    tape = _active_tape()
    needs = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=needs)
    return out, (tape if needs else None)


# ---------------------------------------------------------------------------
# elementwise primitives

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a.shape, b.shape)
    out, tape = _make_out(a.data + b.data, a, b)
    if tape:
        def bwd():
            if a.requires_grad:
                a._accumulate(_unbroadcast(out.grad, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(out.grad, b.shape))
        tape.record(bwd)
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a.shape, b.shape)
    out, tape = _make_out(a.data - b.data, a, b)
    if tape:
        def bwd():
            if a.requires_grad:
                a._accumulate(_unbroadcast(out.grad, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(-out.grad, b.shape))
        tape.record(bwd)
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise (Hadamard) product with trailing-dimension broadcasting."""
    _check_broadcast(a.shape, b.shape)
    out, tape = _make_out(a.data * b.data, a, b)
    if tape:
        a_data, b_data = a.data, b.data
        def bwd():
            if a.requires_grad:
                a._accumulate(_unbroadcast(out.grad * b_data, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(out.grad * a_data, b.shape))
        tape.record(bwd)
    return out


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a.shape, b.shape)
    out, tape = _make_out(a.data / b.data, a, b)
    if tape:
        a_data, b_data = a.data, b.data
        def bwd():
            if a.requires_grad:
                a._accumulate(_unbroadcast(out.grad / b_data, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(-out.grad * a_data / (b_data * b_data), b.shape))
        tape.record(bwd)
    return out


def power(a: Tensor, exponent: float) -> Tensor:
    """a ** exponent for a scalar (non-tensor) exponent."""
    out, tape = _make_out(a.data ** exponent, a)
    if tape:
        a_data = a.data
        def bwd():
            a._accumulate(out.grad * exponent * a_data ** (exponent - 1.0))
        tape.record(bwd)
    return out


def exp(a: Tensor) -> Tensor:
    out, tape = _make_out(np.exp(a.data), a)
    if tape:
        out_data = out.data
        def bwd():
            a._accumulate(out.grad * out_data)
        tape.record(bwd)
    return out


def sqrt(a: Tensor) -> Tensor:
    return power(a, 0.5)


def sigmoid(a: Tensor) -> Tensor:
    # numerically stable two-sided form
    d = a.data
    s = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))),
                 np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d))))
    out, tape = _make_out(s, a)
    if tape:
        def bwd():
            a._accumulate(out.grad * s * (1.0 - s))
        tape.record(bwd)
    return out


def tanh(a: Tensor) -> Tensor:
    out, tape = _make_out(np.tanh(a.data), a)
    if tape:
        t = out.data
        def bwd():
            a._accumulate(out.grad * (1.0 - t * t))
        tape.record(bwd)
    return out


def relu(a: Tensor) -> Tensor:
    out, tape = _make_out(np.maximum(a.data, 0.0), a)
    if tape:
        mask = a.data > 0
        def bwd():
            a._accumulate(out.grad * mask)
        tape.record(bwd)
    return out


def elu(a: Tensor, alpha: float = 1.0) -> Tensor:
    d = a.data
    neg = alpha * np.expm1(np.minimum(d, 0.0))
    out, tape = _make_out(np.where(d > 0, d, neg), a)
    if tape:
        local = np.where(d > 0, 1.0, neg + alpha)
        def bwd():
            a._accumulate(out.grad * local)
        tape.record(bwd)
    return out


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values into [lo, hi]; gradient is passed through inside the range."""
    out, tape = _make_out(np.clip(a.data, lo, hi), a)
    if tape:
        mask = (a.data >= lo) & (a.data <= hi)
        def bwd():
            a._accumulate(out.grad * mask)
        tape.record(bwd)
    return out


# ---------------------------------------------------------------------------
# matrix product

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul expects rank-2 operands, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    out, tape = _make_out(a.data @ b.data, a, b)
    if tape:
        a_data, b_data = a.data, b.data
        def bwd():
            if a.requires_grad:
                a._accumulate(out.grad @ b_data.T)
            if b.requires_grad:
                b._accumulate(a_data.T @ out.grad)
        tape.record(bwd)
    return out


# ---------------------------------------------------------------------------
# reductions

def _normalize_axis(axis, ndim):
    if axis is None:
        return None
    if not -ndim <= axis < ndim:
        raise ShapeError(f"axis {axis} invalid for rank-{ndim} tensor")
    return axis % ndim


def reduce_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axis = _normalize_axis(axis, a.data.ndim)
    out, tape = _make_out(a.data.sum(axis=axis, keepdims=keepdims), a)
    if tape:
        shape = a.shape
        def bwd():
            g = out.grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(g, shape))
        tape.record(bwd)
    return out


def reduce_mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axis = _normalize_axis(axis, a.data.ndim)
    n = a.data.size if axis is None else a.shape[axis]
    out, tape = _make_out(a.data.mean(axis=axis, keepdims=keepdims), a)
    if tape:
        shape = a.shape
        def bwd():
            g = out.grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(g, shape) / n)
        tape.record(bwd)
    return out


def reduce_max(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    """Max reduction; gradient routes to the first occurrence of the max."""
    axis = _normalize_axis(axis, a.data.ndim)
    out, tape = _make_out(a.data.max(axis=axis, keepdims=keepdims), a)
    if tape:
        if axis is None:
            mask = np.zeros_like(a.data)
            mask.reshape(-1)[int(np.argmax(a.data))] = 1.0
        else:
            idx = np.expand_dims(np.argmax(a.data, axis=axis), axis)
            mask = np.zeros_like(a.data)
            np.put_along_axis(mask, idx, 1.0, axis=axis)
        def bwd():
            g = out.grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            a._accumulate(mask * g)
        tape.record(bwd)
    return out


def reduce(kind: str, a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if kind == "sum":
        return reduce_sum(a, axis, keepdims)
    if kind == "mean":
        return reduce_mean(a, axis, keepdims)
    if kind == "max":
        return reduce_max(a, axis, keepdims)
    raise ShapeError(f"unknown reduction kind {kind!r}")


# ---------------------------------------------------------------------------
# shape ops

def reshape(a: Tensor, shape) -> Tensor:
    out, tape = _make_out(a.data.reshape(shape), a)
    if tape:
        old = a.shape
        def bwd():
            a._accumulate(out.grad.reshape(old))
        tape.record(bwd)
    return out


def transpose(a: Tensor, axes) -> Tensor:
    out, tape = _make_out(np.transpose(a.data, axes), a)
    if tape:
        inverse = np.argsort(axes)
        def bwd():
            a._accumulate(np.transpose(out.grad, inverse))
        tape.record(bwd)
    return out


def stack(tensors, axis: int = 1) -> Tensor:
    """Stack equal-shaped tensors along a new axis."""
    base = tensors[0].shape
    for t in tensors[1:]:
        if t.shape != base:
            raise ShapeError(f"stack requires equal shapes, got {base} and {t.shape}")
    out, tape = _make_out(np.stack([t.data for t in tensors], axis=axis), *tensors)
    if tape:
        def bwd():
            pieces = np.moveaxis(out.grad, axis, 0)
            for t, g in zip(tensors, pieces):
                if t.requires_grad:
                    t._accumulate(g)
        tape.record(bwd)
    return out


def index_axis(a: Tensor, axis: int, i: int) -> Tensor:
    """Take index `i` along `axis`, dropping that axis."""
    axis = _normalize_axis(axis, a.data.ndim)
    out, tape = _make_out(np.take(a.data, i, axis=axis), a)
    if tape:
        shape = a.shape
        def bwd():
            g = np.zeros(shape)
            sl = [slice(None)] * len(shape)
            sl[axis] = i
            g[tuple(sl)] = out.grad
            a._accumulate(g)
        tape.record(bwd)
    return out


def slice_last(a: Tensor, start: int, stop: int) -> Tensor:
    """Slice [start:stop] along the last axis."""
    out, tape = _make_out(a.data[..., start:stop], a)
    if tape:
        shape = a.shape
        def bwd():
            g = np.zeros(shape)
            g[..., start:stop] = out.grad
            a._accumulate(g)
        tape.record(bwd)
    return out


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    """Alias for the elementwise product."""
    return mul(a, b)


def elementwise(kind: str, a: Tensor, b: Tensor) -> Tensor:
    ops = {"add": add, "sub": sub, "mul": mul, "hadamard": mul, "div": div}
    if kind not in ops:
        raise ShapeError(f"unknown elementwise kind {kind!r}")
    return ops[kind](a, b)


def zeros_like(a: Tensor) -> Tensor:
    return Tensor(np.zeros_like(a.data))


def assert_finite(a: Tensor, context: str = "tensor"):
    if not np.all(np.isfinite(a.data)):
        raise ContractError(f"{context} contains non-finite values")
    return a
