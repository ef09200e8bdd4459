"""Minimal float64 tensors with reverse-mode differentiation.

Each op returns a new :class:`Tensor` that remembers its parents and a
closure mapping the output gradient to parent gradients. ``backward`` walks
the recorded graph in reverse topological order. Graphs are per-call
objects, so independent threads build independent graphs; only the
``no_grad`` switch is thread-local state.
"""
import threading
from contextlib import contextmanager

import numpy as np

from .errors import NumericError, ShapeError

_state = threading.local()


def grad_enabled():
    return getattr(_state, "enabled", True)


@contextmanager
def no_grad():
    prev = grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    def numpy(self):
        return self.data

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def backward(self):
        backward(self)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return index(self, key)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 else shape)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward_fn):
    out = Tensor(data)
    if grad_enabled():
        live = tuple(p for p in parents if p.requires_grad)
        if live:
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward_fn
    return out


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def backward(loss):
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every reachable leaf.

    Calling twice without clearing grads adds the second result onto the
    first.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    order, seen, stack = [], set(), [(loss, False)]
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
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for p, pg in zip(node._parents, node._backward(g)):
            if pg is None or not p.requires_grad:
                continue
            key = id(p)
            grads[key] = pg if key not in grads else grads[key] + pg


# elementwise ------------------------------------------------------------


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data
    return _make(out, (a, b),
                 lambda g: (_unbroadcast(g / b.data, a.shape),
                            _unbroadcast(-g * out / b.data, b.shape)))


def square(x):
    return _make(x.data * x.data, (x,), lambda g: (2.0 * g * x.data,))


def relu(x):
    mask = x.data > 0
    return _make(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def tanh(x):
    out = np.tanh(x.data)
    return _make(out, (x,), lambda g: (g * (1.0 - out * out),))


def norm(x, axis=-1):
    """Euclidean norm over ``axis``; the gradient at exactly zero is taken as 0."""
    out = np.sqrt(np.sum(x.data * x.data, axis=axis))

    def bw(g):
        o = np.expand_dims(out, axis)
        safe = np.where(o > 0, o, 1.0)
        return (np.expand_dims(g, axis) * np.where(o > 0, x.data / safe, 0.0),)

    return _make(out, (x,), bw)


def scale_grad(x, factor):
    """Identity in the forward pass, multiplies the gradient by ``factor``."""
    return _make(x.data.copy(), (x,), lambda g: (g * factor,))


# reductions and reshaping ------------------------------------------------


def tsum(x, axis=None, keepdims=False):
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _make(out, (x,), bw)


def mean(x, axis=None, keepdims=False):
    n = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return tsum(x, axis, keepdims) * (1.0 / n)


def max_reduce(x, axis):
    """Max over ``axis``; gradient goes to the first maximal entry only."""
    if x.shape[axis] == 0:
        raise ShapeError("max over an empty axis")
    arg = np.expand_dims(np.argmax(x.data, axis=axis), axis)
    out = np.take_along_axis(x.data, arg, axis=axis).squeeze(axis)

    def bw(g):
        gx = np.zeros_like(x.data)
        np.put_along_axis(gx, arg, np.expand_dims(g, axis), axis=axis)
        return (gx,)

    return _make(out, (x,), bw)


def reshape(x, shape):
    return _make(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def broadcast_to(x, shape):
    return _make(np.broadcast_to(x.data, shape).copy(), (x,),
                 lambda g: (_unbroadcast(g, x.shape),))


def expand_dims(x, axis):
    return reshape(x, np.expand_dims(x.data, axis).shape)


def repeat(x, r, axis=0):
    """``np.repeat``: every slice along ``axis`` is emitted ``r`` times in place."""
    out = np.repeat(x.data, r, axis=axis)

    def bw(g):
        shape = list(x.shape)
        shape.insert(axis + 1, r)
        return (g.reshape(shape).sum(axis=axis + 1),)

    return _make(out, (x,), bw)


def concat(xs, axis=-1):
    xs = [as_tensor(x) for x in xs]
    out = np.concatenate([x.data for x in xs], axis=axis)
    cuts = np.cumsum([x.shape[axis] for x in xs])[:-1]
    return _make(out, xs, lambda g: tuple(np.split(g, cuts, axis=axis)))


def index(x, key):
    out = x.data[key]

    def bw(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, key, g)
        return (gx,)

    return _make(out, (x,), bw)


def gather_rows(x, idx):
    """``x[idx]`` for an integer array ``idx`` of any shape (rows of a 2D x)."""
    idx = np.asarray(idx, dtype=np.int64)
    out = x.data[idx]

    flat_idx = idx.ravel()
    order = np.argsort(flat_idx, kind="stable")
    sorted_idx = flat_idx[order]
    starts = np.flatnonzero(np.r_[True, sorted_idx[1:] != sorted_idx[:-1]])

    def bw(g):
        flat = g.reshape(len(flat_idx), *x.shape[1:])
        gx = np.zeros_like(x.data)
        if len(flat_idx):
            gx[sorted_idx[starts]] = np.add.reduceat(flat[order], starts, axis=0)
        return (gx,)

    return _make(out, (x,), bw)


# linear algebra -------------------------------------------------------------


def matmul(x, w):
    """``x @ w`` with x of shape (..., n) and w of shape (n, m)."""
    x, w = as_tensor(x), as_tensor(w)
    if w.ndim != 2 or x.shape[-1] != w.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {x.shape} @ {w.shape}")
    lead = x.shape[:-1]
    x2 = x.data.reshape(-1, x.shape[-1])
    out = (x2 @ w.data).reshape(*lead, w.shape[1])

    def bw(g):
        g2 = g.reshape(-1, w.shape[1])
        gx = (g2 @ w.data.T).reshape(x.shape) if x.requires_grad else None
        gw = x2.T @ g2 if w.requires_grad else None
        return gx, gw

    return _make(out, (x, w), bw)


def softmax(x, axis=-1):
    if not np.all(np.isfinite(x.data)):
        raise NumericError("softmax received non-finite input")
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)
    return _make(out, (x,),
                 lambda g: (out * (g - (g * out).sum(axis=axis, keepdims=True)),))


def softmax_lastdim(x):
    return softmax(x, axis=-1)


# verification ----------------------------------------------------------------


def grad_check(f, x, h=1e-4, coords=None):
    """Largest relative error between analytic and central-difference gradients.

    ``f`` maps a Tensor to a scalar Tensor. ``coords`` optionally restricts
    the check to a list of flat indices into ``x``. The error for one
    coordinate is ``|analytic - numeric| / max(1, |numeric|)``.
    """
    x0 = np.array(as_tensor(x).data, dtype=np.float64)
    xt = Tensor(x0.copy(), requires_grad=True)
    backward(f(xt))
    analytic = np.zeros_like(x0) if xt.grad is None else xt.grad
    flat = x0.ravel()
    coords = range(flat.size) if coords is None else coords
    worst = 0.0
    with no_grad():
        for i in coords:
            vals = []
            for step in (h, -h):
                xp = flat.copy()
                xp[i] += step
                v = float(f(Tensor(xp.reshape(x0.shape))).data)
                if not np.isfinite(v):
                    raise NumericError(f"non-finite function value at coordinate {i}")
                vals.append(v)
            numeric = (vals[0] - vals[1]) / (2.0 * h)
            err = abs(analytic.ravel()[i] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, err)
    return worst
