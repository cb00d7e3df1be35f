"""A small reverse-mode autodiff over dense float64 numpy arrays.

Only the operations the models here need are provided.
"""
from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen and p.requires_grad:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data) if grad is None else np.asarray(grad, dtype=np.float64)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # arithmetic -----------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(_wrap(other)))

    def __rsub__(self, other):
        return add(_wrap(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _accum(t: Tensor, g):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        t.grad = t.grad + g


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _result(data, parents, backward):
    req = any(p.requires_grad for p in parents)
    return Tensor(data, req, parents if req else (), backward if req else None)


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)

    def bw(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(g, b.shape))

    return _result(a.data + b.data, (a, b), bw)


def neg(a) -> Tensor:
    a = _wrap(a)
    return _result(-a.data, (a,), lambda g: _accum(a, -g))


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)

    def bw(g):
        _accum(a, _unbroadcast(g * b.data, a.shape))
        _accum(b, _unbroadcast(g * a.data, b.shape))

    return _result(a.data * b.data, (a, b), bw)


def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)

    def bw(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _result(a.data @ b.data, (a, b), bw)


def relu(a) -> Tensor:
    mask = a.data > 0
    return _result(a.data * mask, (a,), lambda g: _accum(a, g * mask))


def exp(a) -> Tensor:
    out = np.exp(a.data)
    return _result(out, (a,), lambda g: _accum(a, g * out))


def square(a) -> Tensor:
    return _result(a.data**2, (a,), lambda g: _accum(a, 2.0 * a.data * g))


def sum(a, axis=None) -> Tensor:  # noqa: A001 - mirrors numpy
    shape = a.shape

    def bw(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g, shape))

    return _result(a.data.sum(axis=axis), (a,), bw)


def mean(a, axis=None) -> Tensor:
    n = a.data.size if axis is None else a.shape[axis]
    return mul(sum(a, axis), 1.0 / n)


def reshape(a, shape) -> Tensor:
    old = a.shape
    return _result(a.data.reshape(shape), (a,), lambda g: _accum(a, g.reshape(old)))


def concat(tensors, axis=0) -> Tensor:
    tensors = [_wrap(t) for t in tensors]
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def bw(g):
        for t, part in zip(tensors, np.split(g, sizes, axis=axis)):
            _accum(t, part)

    return _result(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), bw)


def take_rows(a, idx) -> Tensor:
    idx = np.asarray(idx, dtype=np.int64)

    def bw(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        _accum(a, full)

    return _result(a.data[idx], (a,), bw)


def segment_sum(a, idx, n) -> Tensor:
    """out[k] = sum of rows a[e] with idx[e] == k, for k < n."""
    idx = np.asarray(idx, dtype=np.int64)
    out = np.zeros((n,) + a.shape[1:])
    np.add.at(out, idx, a.data)
    return _result(out, (a,), lambda g: _accum(a, g[idx]))


def huber(pred, target, delta=1.0) -> Tensor:
    """Mean Huber loss; ``target`` is treated as a constant."""
    pred = _wrap(pred)
    target = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=np.float64)
    if pred.shape != target.shape:
        from ..exceptions import DimensionMismatch

        raise DimensionMismatch(f"huber shapes differ: {pred.shape} vs {target.shape}")
    if delta <= 0:
        raise ValueError("delta must be positive")
    diff = pred.data - target
    ad = np.abs(diff)
    quad = ad <= delta
    vals = np.where(quad, 0.5 * diff**2, delta * (ad - 0.5 * delta))
    n = max(diff.size, 1)

    def bw(g):
        _accum(pred, g * np.where(quad, diff, delta * np.sign(diff)) / n)

    return _result(vals.sum() / n, (pred,), bw)
