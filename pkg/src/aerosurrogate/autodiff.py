"""Minimal reverse-mode automatic differentiation over numpy arrays.

Only the operations the surrogate model needs are implemented. Values are
plain ndarrays; calling backward() on a scalar output accumulates exact
gradients into every reachable Tensor with requires_grad set.
"""

import numpy as np

_GELU_C0 = 0.7978845608028654      # sqrt(2/pi)
_GELU_C1 = 0.044715


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, value, requires_grad=False, parents=(), backward=None):
        self.value = np.asarray(value)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.value.shape

    def detach(self) -> "Tensor":
        return Tensor(self.value)

    def backward(self):
        if self.value.size != 1:
            raise ValueError("backward() requires a scalar output")
        topo: list[Tensor] = []
        seen = set()

        def visit(t: Tensor):
            stack = [(t, False)]
            while stack:
                node, processed = stack.pop()
                if processed:
                    topo.append(node)
                    continue
                if id(node) in seen or not node.requires_grad:
                    continue
                seen.add(id(node))
                stack.append((node, True))
                for p in node._parents:
                    stack.append((p, False))

        visit(self)
        self.grad = np.ones_like(self.value)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return mul(self, -1.0)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _accum(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.value, dtype=g.dtype)
    t.grad = t.grad + g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient over axes that were broadcast in the forward pass."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, dim in enumerate(shape):
        if dim == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_val = a.value + b.value

    def backward(g):
        _accum(a, _unbroadcast(g, a.value.shape))
        _accum(b, _unbroadcast(g, b.value.shape))

    return Tensor(out_val, parents=(a, b), backward=backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_val = a.value - b.value

    def backward(g):
        _accum(a, _unbroadcast(g, a.value.shape))
        _accum(b, _unbroadcast(-g, b.value.shape))

    return Tensor(out_val, parents=(a, b), backward=backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_val = a.value * b.value

    def backward(g):
        _accum(a, _unbroadcast(g * b.value, a.value.shape))
        _accum(b, _unbroadcast(g * a.value, b.value.shape))

    return Tensor(out_val, parents=(a, b), backward=backward)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_val = a.value / b.value

    def backward(g):
        _accum(a, _unbroadcast(g / b.value, a.value.shape))
        _accum(b, _unbroadcast(-g * a.value / (b.value * b.value), b.value.shape))

    return Tensor(out_val, parents=(a, b), backward=backward)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_val = a.value @ b.value

    def backward(g):
        _accum(a, g @ b.value.T)
        _accum(b, a.value.T @ g)

    return Tensor(out_val, parents=(a, b), backward=backward)


def sum_(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    out_val = a.value.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            _accum(a, np.broadcast_to(g, a.value.shape).copy())
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            _accum(a, np.broadcast_to(gg, a.value.shape).copy())

    return Tensor(out_val, parents=(a,), backward=backward)


def mean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    count = a.value.size if axis is None else a.value.shape[axis]
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / count)


def exp(a) -> Tensor:
    a = as_tensor(a)
    out_val = np.exp(a.value)

    def backward(g):
        _accum(a, g * out_val)

    return Tensor(out_val, parents=(a,), backward=backward)


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out_val = np.tanh(a.value)

    def backward(g):
        _accum(a, g * (1.0 - out_val * out_val))

    return Tensor(out_val, parents=(a,), backward=backward)


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out_val = np.sqrt(a.value)

    def backward(g):
        _accum(a, g * 0.5 / out_val)

    return Tensor(out_val, parents=(a,), backward=backward)


def square(a) -> Tensor:
    a = as_tensor(a)
    return mul(a, a)


def maximum_const(a, floor: float) -> Tensor:
    """Elementwise max with a constant; gradient passes where a > floor."""
    a = as_tensor(a)
    out_val = np.maximum(a.value, floor)

    def backward(g):
        _accum(a, g * (a.value > floor))

    return Tensor(out_val, parents=(a,), backward=backward)


def getitem(a, key) -> Tensor:
    a = as_tensor(a)
    out_val = a.value[key]

    def backward(g):
        full = np.zeros_like(a.value)
        np.add.at(full, key, g)
        _accum(a, full)

    return Tensor(out_val, parents=(a,), backward=backward)


def concat(tensors: list, axis=0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out_val = np.concatenate([t.value for t in tensors], axis=axis)
    sizes = [t.value.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            _accum(t, g[tuple(sl)])

    return Tensor(out_val, parents=tuple(tensors), backward=backward)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    out_val = a.value.reshape(shape)

    def backward(g):
        _accum(a, g.reshape(a.value.shape))

    return Tensor(out_val, parents=(a,), backward=backward)


def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)
    out_val = np.transpose(a.value, axes)

    def backward(g):
        inv = None if axes is None else np.argsort(axes)
        _accum(a, np.transpose(g, inv))

    return Tensor(out_val, parents=(a,), backward=backward)


# ---------------------------------------------------------------------------
# composites


def softmax(a, axis=-1) -> Tensor:
    """Numerically stable softmax; the max shift is a detached constant
    (softmax is shift-invariant, so gradients stay exact)."""
    a = as_tensor(a)
    shift = np.max(a.value, axis=axis, keepdims=True)
    e = exp(sub(a, Tensor(shift)))
    return div(e, sum_(e, axis=axis, keepdims=True))


def gelu(a) -> Tensor:
    """GELU, tanh approximation:
    0.5*x*(1 + tanh(c0*(x + c1*x^3))), c0=sqrt(2/pi), c1=0.044715."""
    a = as_tensor(a)
    inner = mul(add(a, mul(mul(square(a), a), _GELU_C1)), _GELU_C0)
    return mul(mul(a, add(tanh(inner), 1.0)), 0.5)


def layer_norm(a, gain, bias, eps=1e-5) -> Tensor:
    """Per-row normalization over the last axis with learned scale/shift."""
    a = as_tensor(a)
    mu = mean(a, axis=-1, keepdims=True)
    centered = sub(a, mu)
    var = mean(square(centered), axis=-1, keepdims=True)
    normed = div(centered, sqrt(add(var, eps)))
    return add(mul(normed, gain), bias)


def frobenius_norm(a) -> Tensor:
    return sqrt(sum_(square(a)))
