"""Reverse-mode automatic differentiation over numpy arrays.

A :class:`Tensor` records the operation that produced it together with a
closure that pushes its gradient to the operands. Calling
:meth:`Tensor.backward` on a scalar walks the recorded graph in reverse
topological order.

All arithmetic is done in float64.
"""

import numpy as np

from ..errors import DimensionError

DTYPE = np.float64


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (undo numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """An n-dimensional array that can take part in gradient computation."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=DTYPE)
        self.requires_grad = requires_grad
        self.grad = None
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=DTYPE, copy=True)
        else:
            self.grad += g

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        """Propagate gradients from this tensor to every trainable ancestor."""
        if grad is None:
            if self.data.size != 1:
                raise DimensionError(
                    f"backward() without a seed gradient needs a scalar, got shape {self.shape}"
                )
            grad = np.ones_like(self.data)
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): np.asarray(grad, dtype=DTYPE)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node._accumulate(g)
                continue
            for parent, pg in node._backward(g):
                if pg is None or not parent.requires_grad:
                    continue
                if parent._backward is None:
                    parent._accumulate(pg)
                elif id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pg
                else:
                    grads[id(parent)] = pg

    # operator sugar -------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)


class Parameter(Tensor):
    """A trainable tensor carrying its own Adam moment buffers."""

    __slots__ = ("adam_m", "adam_v", "step", "frozen_rows")

    def __init__(self, data):
        super().__init__(data, requires_grad=True)
        self.adam_m = np.zeros_like(self.data)
        self.adam_v = np.zeros_like(self.data)
        self.step = 0
        self.frozen_rows = None

    def __repr__(self):
        return f"Parameter(shape={self.shape}, step={self.step})"


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, parents, backward):
    needs = any(p.requires_grad for p in parents)
    if not needs:
        return Tensor(data)
    return Tensor(data, requires_grad=True, _parents=parents, _backward=backward)


# elementwise ----------------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data

    def backward(g):
        return ((a, _unbroadcast(g, a.shape)), (b, _unbroadcast(g, b.shape)))

    return _result(out, (a, b), backward)


def neg(a):
    def backward(g):
        return ((a, -g),)

    return _result(-a.data, (a,), backward)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data

    def backward(g):
        return (
            (a, _unbroadcast(g * b.data, a.shape) if a.requires_grad else None),
            (b, _unbroadcast(g * a.data, b.shape) if b.requires_grad else None),
        )

    return _result(out, (a, b), backward)


def sigmoid(a):
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)

    def backward(g):
        return ((a, g * out * (1.0 - out)),)

    return _result(out, (a,), backward)


def tanh(a):
    out = np.tanh(a.data)

    def backward(g):
        return ((a, g * (1.0 - out * out)),)

    return _result(out, (a,), backward)


def relu(a):
    out = np.maximum(a.data, 0.0)

    def backward(g):
        return ((a, g * (a.data > 0)),)

    return _result(out, (a,), backward)


def where(mask, a, b):
    """Select from ``a`` where ``mask`` is true, else from ``b``.

    ``mask`` is a plain boolean array broadcastable against both operands.
    """
    a, b = as_tensor(a), as_tensor(b)
    mask = np.asarray(mask, dtype=bool)
    out = np.where(mask, a.data, b.data)

    def backward(g):
        return (
            (a, _unbroadcast(np.where(mask, g, 0.0), a.shape)),
            (b, _unbroadcast(np.where(mask, 0.0, g), b.shape)),
        )

    return _result(out, (a, b), backward)


# linear algebra ---------------------------------------------------------------

def matmul(a, b):
    """Matrix product; ``a`` may carry leading batch axes, ``b`` is 2-D."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 1 or b.ndim != 2 or a.shape[-1] != b.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    out = a.data @ b.data

    def backward(g):
        ga = g @ b.data.T if a.requires_grad else None
        gb = None
        if b.requires_grad:
            k = a.shape[-1]
            gb = a.data.reshape(-1, k).T @ g.reshape(-1, b.shape[1])
        return ((a, ga), (b, gb))

    return _result(out, (a, b), backward)


def linear(x, weight, bias):
    return add(matmul(x, weight), bias)


# shape manipulation -----------------------------------------------------------

def _is_basic(index):
    parts = index if isinstance(index, tuple) else (index,)
    return all(isinstance(p, (int, np.integer, slice)) or p is Ellipsis for p in parts)


def getitem(a, index):
    out = a.data[index]
    basic = _is_basic(index)

    def backward(g):
        full = np.zeros_like(a.data)
        if basic:
            full[index] += g
        else:
            np.add.at(full, index, g)
        return ((a, full),)

    return _result(np.array(out, copy=True), (a,), backward)


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    if len(tensors) == 1:
        return tensors[0]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        shapes = [t.shape for t in tensors]
        raise DimensionError(f"cannot concatenate shapes {shapes}") from exc
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def backward(g):
        res = []
        for t, lo, hi in zip(tensors, bounds[:-1], bounds[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            res.append((t, g[tuple(sl)]))
        return res

    return _result(out, tuple(tensors), backward)


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    out = np.stack([t.data for t in tensors], axis=axis)

    def backward(g):
        parts = np.moveaxis(g, axis, 0)
        return [(t, parts[i]) for i, t in enumerate(tensors)]

    return _result(out, tuple(tensors), backward)


def reshape(a, shape):
    def backward(g):
        return ((a, g.reshape(a.shape)),)

    return _result(a.data.reshape(shape), (a,), backward)


def tensor_sum(a, axis=None):
    out = a.data.sum(axis=axis)

    def backward(g):
        if axis is None:
            return ((a, np.broadcast_to(g, a.shape).copy()),)
        return ((a, np.broadcast_to(np.expand_dims(g, axis), a.shape).copy()),)

    return _result(out, (a,), backward)


def mean(a):
    n = a.data.size

    def backward(g):
        return ((a, np.full(a.shape, g / n)),)

    return _result(a.data.mean(), (a,), backward)


# reductions used by the encoders ---------------------------------------------

def masked_max(a, mask):
    """Max over axis 1 of an ``(N, L, D)`` tensor, ignoring masked-out rows.

    ``mask`` is ``(N, L)`` boolean; every row must keep at least one entry.
    Ties go to the earliest position.
    """
    mask = np.asarray(mask, dtype=bool)
    filled = np.where(mask[:, :, None], a.data, -np.inf)
    idx = np.argmax(filled, axis=1)
    out = np.take_along_axis(filled, idx[:, None, :], axis=1)[:, 0, :]

    def backward(g):
        full = np.zeros_like(a.data)
        np.put_along_axis(full, idx[:, None, :], g[:, None, :], axis=1)
        return ((a, full),)

    return _result(out, (a,), backward)


def embedding_lookup(table, ids, mask=None):
    """Gather rows of ``table`` by integer ``ids``; masked positions give zeros."""
    ids = np.asarray(ids, dtype=np.int64)
    out = table.data[ids]
    if mask is not None:
        out = out * np.asarray(mask, dtype=bool)[..., None]

    def backward(g):
        if mask is not None:
            g = g * np.asarray(mask, dtype=bool)[..., None]
        full = np.zeros_like(table.data)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, table.shape[1]))
        if getattr(table, "frozen_rows", None) is not None:
            full[table.frozen_rows] = 0.0
        return ((table, full),)

    return _result(out, (table,), backward)


def dropout_mask(x, mask, scale):
    m = np.asarray(mask, dtype=DTYPE) * scale

    def backward(g):
        return ((x, g * m),)

    return _result(x.data * m, (x,), backward)
