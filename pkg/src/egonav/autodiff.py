"""Reverse-mode automatic differentiation over numpy arrays.

Every differentiable operation builds a ``Tensor`` that remembers its parents
and a closure computing their gradients; this implicit tape is replayed in
reverse topological order by ``backward``. Only the primitives the policy,
value, and embedding networks need are provided. All data is float64.
"""
from __future__ import annotations

import numpy as np


def _unbroadcast(grad, shape):
    """Sum grad back down to `shape`, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, size in enumerate(shape):
        if size == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


class Tensor:
    """Array node of the recorded computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_grad_fn")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._grad_fn = None

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        return float(self.data)

    def detach(self):
        """Stop-gradient: same values, no history."""
        return Tensor(self.data)

    def backward(self):
        """Accumulate dself/dparam into .grad of every reachable parameter.

        Only valid on a traced scalar (the tip of a recorded computation).
        """
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        if self._grad_fn is None and not self.requires_grad:
            raise ValueError("backward() on a value with no recorded history")
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._grad_fn is None:
                continue
            for parent, part in zip(node._parents, node._grad_fn(node.grad)):
                if part is None or not parent.requires_grad:
                    continue
                # accumulation is always out-of-place, so sharing g's memory is fine
                parent.grad = part if parent.grad is None else parent.grad + part

    # operator sugar; every op lives as a module function below
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

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return gather(self, idx)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data, parents, grad_fn):
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._grad_fn = grad_fn
    return out


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _node(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _node(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _node(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.data.shape),
                            _unbroadcast(g * a.data, b.data.shape)))


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _node(a.data / b.data, (a, b),
                 lambda g: (_unbroadcast(g / b.data, a.data.shape),
                            _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape)))


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    an, bn = a.data.ndim, b.data.ndim

    def grad_fn(g):
        if an == 2 and bn == 2:
            return g @ b.data.T, a.data.T @ g
        if an == 2 and bn == 1:
            return np.outer(g, b.data), a.data.T @ g
        if an == 1 and bn == 2:
            return g @ b.data.T, np.outer(a.data, g)
        return g * b.data, g * a.data  # vector . vector -> scalar

    return _node(a.data @ b.data, (a, b), grad_fn)


def reshape(a, shape):
    a = as_tensor(a)
    return _node(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.data.shape),))


def exp(a):
    a = as_tensor(a)
    out_data = np.exp(a.data)
    return _node(out_data, (a,), lambda g: (g * out_data,))


def log(a):
    a = as_tensor(a)
    return _node(np.log(a.data), (a,), lambda g: (g / a.data,))


def relu(a):
    a = as_tensor(a)
    return _node(np.maximum(a.data, 0.0), (a,), lambda g: (g * (a.data > 0.0),))


def leaky_relu(a, slope=0.2):
    a = as_tensor(a)
    scale = np.where(a.data > 0.0, 1.0, slope)
    return _node(a.data * scale, (a,), lambda g: (g * scale,))


def elu(a):
    a = as_tensor(a)
    neg = np.exp(np.minimum(a.data, 0.0)) - 1.0
    out_data = np.where(a.data > 0.0, a.data, neg)
    return _node(out_data, (a,), lambda g: (g * np.where(a.data > 0.0, 1.0, neg + 1.0),))


def clip_min(a, floor):
    """max(a, floor) elementwise; gradient passes only where a > floor."""
    a = as_tensor(a)
    return _node(np.maximum(a.data, floor), (a,), lambda g: (g * (a.data > floor),))


def tsum(a, axis=None):
    a = as_tensor(a)

    def grad_fn(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.data.shape),)

    return _node(a.data.sum(axis=axis), (a,), grad_fn)


def concat(parts, axis=0):
    parts = [as_tensor(p) for p in parts]
    sizes = [p.data.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def grad_fn(g):
        return tuple(np.split(g, splits, axis=axis))

    return _node(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), grad_fn)


def scatter_add_rows(idx, values, n_rows):
    """Sum rows of `values` into n_rows bins at `idx` (bincount; faster than ufunc.at)."""
    if values.ndim == 1:
        return np.bincount(idx, weights=values, minlength=n_rows)
    d = values.shape[1]
    flat = np.bincount((idx[:, None] * d + np.arange(d)).ravel(),
                       weights=values.ravel(), minlength=n_rows * d)
    return flat.reshape(n_rows, d)


def gather(a, idx):
    """Rows (axis 0) of a at integer indices; duplicates accumulate on backward."""
    a = as_tensor(a)
    idx = np.asarray(idx)
    n_rows = a.data.shape[0]

    def grad_fn(g):
        return (scatter_add_rows(idx, g, n_rows).reshape(a.data.shape),)

    return _node(a.data[idx], (a,), grad_fn)


def segment_sum(a, segment_ids, num_segments):
    """Sum rows of a into num_segments bins given by segment_ids (axis 0)."""
    a = as_tensor(a)
    seg = np.asarray(segment_ids)
    return _node(scatter_add_rows(seg, a.data, num_segments), (a,), lambda g: (g[seg],))


def segment_max_data(values, segment_ids, num_segments):
    """Plain-numpy per-segment max (used as a detached shift inside softmax)."""
    out = np.full(num_segments, -np.inf, dtype=np.float64)
    np.maximum.at(out, np.asarray(segment_ids), np.asarray(values, dtype=np.float64))
    return out


def segment_softmax_parts(logits, segment_ids, num_segments):
    """Softmax within each segment.

    Returns (probs, log_probs) as traced tensors aligned with `logits`. The
    per-segment max is subtracted as a detached constant, which cancels
    exactly in both outputs, so gradients are unaffected.
    """
    logits = as_tensor(logits)
    seg = np.asarray(segment_ids)
    shift = segment_max_data(logits.data, seg, num_segments)
    centered = logits - Tensor(shift[seg])
    expd = exp(centered)
    denom = segment_sum(expd, seg, num_segments)
    probs = expd / gather(denom, seg)
    log_probs = centered - gather(log(denom), seg)
    return probs, log_probs
