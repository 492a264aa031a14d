"""Reverse-mode automatic differentiation over dense float64 arrays.

A :class:`Tensor` wraps a C-contiguous float64 ndarray plus an optional
gradient buffer.  Ops build a DAG; calling ``backward()`` on a scalar
result walks the graph once in reverse topological order and accumulates
gradients into every tensor created with ``requires_grad=True``.

Only the handful of ops the network needs are implemented.  Everything is
64-bit: gradient checks at 1e-4 tolerance are not reliable in 32-bit.
"""

import contextlib

import numpy as np


class ShapeError(ValueError):
    """Operands do not fit together."""


_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Skip graph construction inside the block (forward values only)."""
    global _grad_enabled
    saved = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = saved


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backprop")

    def __init__(self, data, requires_grad=False):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backprop = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self):
        return self.data.item()

    def detach(self):
        return Tensor(self.data.copy())

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """Backpropagate from a scalar result."""
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar, got shape {self.shape}")
        order = []
        visited = {id(self)}
        stack = [(self, iter(self._parents))]
        while stack:
            node, parents = stack[-1]
            advanced = False
            for p in parents:
                if id(p) not in visited:
                    visited.add(id(p))
                    stack.append((p, iter(p._parents)))
                    advanced = True
                    break
            if not advanced:
                order.append(node)
                stack.pop()
        _accumulate(self, np.ones_like(self.data))
        for node in reversed(order):
            if node._backprop is not None and node.grad is not None:
                node._backprop(node.grad)

    # operator sugar; all arithmetic goes through the module-level ops
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _accumulate(t, g):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _make(data, parents, backprop):
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backprop = backprop
    return out


def _unbroadcast(g, shape):
    """Sum `g` back down to `shape` (inverse of numpy broadcasting)."""
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    data = a.data + b.data

    def backprop(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return _make(data, (a, b), backprop)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    data = a.data * b.data

    def backprop(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(data, (a, b), backprop)


def matmul(a, b):
    """Matrix/vector product for the 1-D/2-D combinations numpy allows."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim not in (1, 2) or b.data.ndim not in (1, 2):
        raise ShapeError(f"matmul supports 1-D/2-D operands, got {a.shape} @ {b.shape}")
    if a.data.shape[-1] != b.data.shape[0]:
        raise ShapeError(f"matmul: inner dimensions disagree: {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def backprop(g):
        if a.data.ndim == 2 and b.data.ndim == 2:
            _accumulate(a, g @ b.data.T)
            _accumulate(b, a.data.T @ g)
        elif a.data.ndim == 2 and b.data.ndim == 1:
            _accumulate(a, np.outer(g, b.data))
            _accumulate(b, a.data.T @ g)
        elif a.data.ndim == 1 and b.data.ndim == 2:
            _accumulate(a, b.data @ g)
            _accumulate(b, np.outer(a.data, g))
        else:
            _accumulate(a, g * b.data)
            _accumulate(b, g * a.data)

    return _make(data, (a, b), backprop)


def transpose(a):
    a = as_tensor(a)

    def backprop(g):
        _accumulate(a, g.T)

    return _make(a.data.T, (a,), backprop)


def reshape(a, shape):
    a = as_tensor(a)

    def backprop(g):
        _accumulate(a, g.reshape(a.data.shape))

    return _make(a.data.reshape(shape), (a,), backprop)


def take(a, key):
    """Basic (non-fancy) indexing/slicing with gradient routing."""
    a = as_tensor(a)
    data = a.data[key]

    def backprop(g):
        buf = np.zeros_like(a.data)
        buf[key] = g
        _accumulate(a, buf)

    return _make(data, (a,), backprop)


def concat(parts, axis=0):
    """Contiguous concatenation; the gradient slices back to each part."""
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise ShapeError("concat needs at least one part")
    ndim = parts[0].data.ndim
    if not -ndim <= axis < max(ndim, 1):
        raise ShapeError(f"concat: axis {axis} out of range for rank-{ndim} parts")
    ax = axis % ndim if ndim else 0
    for p in parts[1:]:
        if p.data.ndim != ndim:
            raise ShapeError(f"concat: rank mismatch {parts[0].shape} vs {p.shape}")
        for d in range(ndim):
            if d != ax and p.data.shape[d] != parts[0].data.shape[d]:
                raise ShapeError(f"concat: dimension mismatch {parts[0].shape} vs {p.shape}")
    data = np.concatenate([p.data for p in parts], axis=ax)
    offsets = [0]
    for p in parts:
        offsets.append(offsets[-1] + p.data.shape[ax])

    def backprop(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * ndim
            sl[ax] = slice(lo, hi)
            _accumulate(p, g[tuple(sl)])

    return _make(data, tuple(parts), backprop)


def stack(parts):
    """Stack equal-shape tensors along a new leading axis."""
    parts = [as_tensor(p) for p in parts]
    data = np.stack([p.data for p in parts])

    def backprop(g):
        for i, p in enumerate(parts):
            _accumulate(p, g[i])

    return _make(data, tuple(parts), backprop)


def tsum(a, axis=None):
    a = as_tensor(a)
    data = np.asarray(a.data.sum(axis=axis))

    def backprop(g):
        if axis is None:
            _accumulate(a, np.broadcast_to(g, a.data.shape).copy())
        else:
            _accumulate(a, np.broadcast_to(np.expand_dims(g, axis), a.data.shape).copy())

    return _make(data, (a,), backprop)


def mean_rows(a):
    """Mean over axis 0 (the global pooling used by the attention query)."""
    a = as_tensor(a)
    return mul(tsum(a, axis=0), 1.0 / a.data.shape[0])


def _sigmoid_raw(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a):
    a = as_tensor(a)
    y = _sigmoid_raw(a.data)

    def backprop(g):
        _accumulate(a, g * y * (1.0 - y))

    return _make(y, (a,), backprop)


def tanh_op(a):
    a = as_tensor(a)
    y = np.tanh(a.data)

    def backprop(g):
        _accumulate(a, g * (1.0 - y * y))

    return _make(y, (a,), backprop)


def softmax(a, axis=-1):
    """Stable softmax: rows are non-negative and sum to 1."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backprop(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        _accumulate(a, y * (g - dot))

    return _make(y, (a,), backprop)


def cross_entropy(logits, labels):
    """Mean negative log-likelihood of the softmax distribution.

    `logits` is (batch, n_classes); `labels` is a sequence of class indices.
    The gradient w.r.t. the logits is (softmax - onehot) / batch.
    """
    logits = as_tensor(logits)
    if logits.data.ndim != 2:
        raise ShapeError(f"cross_entropy expects (batch, classes) logits, got {logits.shape}")
    labels = np.asarray(labels, dtype=np.intp)
    batch, n_classes = logits.data.shape
    if labels.shape != (batch,):
        raise ShapeError(f"cross_entropy: {batch} rows but {labels.shape} labels")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError(f"label out of range [0, {n_classes}): {labels.tolist()}")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - lse
    loss = -logp[np.arange(batch), labels].mean()

    def backprop(g):
        soft = np.exp(logp)
        soft[np.arange(batch), labels] -= 1.0
        _accumulate(logits, g.item() * soft / batch)

    return _make(np.float64(loss), (logits,), backprop)


def gather_rows(table, indices):
    """Select rows of a 2-D tensor; the gradient scatter-adds back."""
    table = as_tensor(table)
    if table.data.ndim != 2:
        raise ShapeError(f"gather_rows expects a 2-D table, got {table.shape}")
    idx = np.asarray(indices, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= table.data.shape[0]):
        raise ValueError(f"row index out of range [0, {table.data.shape[0]})")
    data = table.data[idx]

    def backprop(g):
        buf = np.zeros_like(table.data)
        np.add.at(buf, idx, g)
        _accumulate(table, buf)

    return _make(data, (table,), backprop)


def dropout(x, rate, rng, training):
    """Inverted dropout: scaling happens at train time, eval is identity."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    x = as_tensor(x)
    if not training or rate == 0.0:
        return x
    keep = (rng.uniform_block(x.data.size) >= rate).reshape(x.data.shape)
    scale = keep / (1.0 - rate)
    data = x.data * scale

    def backprop(g):
        _accumulate(x, g * scale)

    return _make(data, (x,), backprop)
