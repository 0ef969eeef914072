"""Minimal reverse-mode automatic differentiation over dense numpy tensors.

Define-by-run: while a Tape is active, every operation on a tensor that
requires gradients appends a node to the tape. backward() replays the tape
in reverse. Training uses float32; gradient checks run in float64.
"""

from __future__ import annotations

import math
from contextlib import contextmanager

import numpy as np

_TAPE = None


class Tape:
    """Topologically ordered record of one forward computation."""

    __slots__ = ("nodes",)

    def __init__(self):
        self.nodes = []

    def append(self, t):
        t.node_id = len(self.nodes)
        self.nodes.append(t)


@contextmanager
def tape():
    global _TAPE
    prev = _TAPE
    _TAPE = Tape()
    try:
        yield _TAPE
    finally:
        _TAPE = prev


def active_tape():
    return _TAPE


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "parents", "vjp", "tape", "node_id")

    def __init__(self, data, requires_grad=False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=dtype) if dtype else np.asarray(data)
        if self.data.dtype not in (np.float32, np.float64):
            self.data = self.data.astype(np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self.parents = ()
        self.vjp = None
        self.tape = None
        self.node_id = -1

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"

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

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)


def as_tensor(x, like=None):
    if isinstance(x, Tensor):
        return x
    dtype = like.data.dtype if isinstance(like, Tensor) else None
    return Tensor(np.asarray(x, dtype=dtype))


def _record(data, parents, vjp):
    req = any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=req)
    if req and _TAPE is not None:
        out.parents = tuple(parents)
        out.vjp = vjp
        out.tape = _TAPE
        _TAPE.append(out)
    return out


def _unbroadcast(grad, shape):
    """Reduce a broadcasted gradient back to the original shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# Primitives
# ---------------------------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a, b if isinstance(b, Tensor) else None), as_tensor(b, a if isinstance(a, Tensor) else None)
    return _record(a.data + b.data, (a, b), lambda g: (
        _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)))


def sub(a, b):
    a, b = as_tensor(a, b if isinstance(b, Tensor) else None), as_tensor(b, a if isinstance(a, Tensor) else None)
    return _record(a.data - b.data, (a, b), lambda g: (
        _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)))


def mul(a, b):
    a, b = as_tensor(a, b if isinstance(b, Tensor) else None), as_tensor(b, a if isinstance(a, Tensor) else None)
    return _record(a.data * b.data, (a, b), lambda g: (
        _unbroadcast(g * b.data, a.data.shape), _unbroadcast(g * a.data, b.data.shape)))


def scale(a, s):
    a = as_tensor(a)
    s = float(s)
    return _record(a.data * s, (a,), lambda g: (g * s,))


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.data.shape[-1] != b.data.shape[-2 if b.data.ndim > 1 else 0]:
        raise ValueError(f"matmul inner extents disagree: {a.data.shape} @ {b.data.shape}")

    def vjp(g):
        bt = np.swapaxes(b.data, -1, -2) if b.data.ndim > 1 else b.data
        at = np.swapaxes(a.data, -1, -2) if a.data.ndim > 1 else a.data
        ga = _unbroadcast(g @ bt, a.data.shape) if b.data.ndim > 1 else np.outer(g, b.data).reshape(a.data.shape)
        gb = _unbroadcast(at @ g, b.data.shape)
        return ga, gb

    return _record(a.data @ b.data, (a, b), vjp)


def tanh(a):
    a = as_tensor(a)
    y = np.tanh(a.data)
    return _record(y, (a,), lambda g: (g * (1.0 - y * y),))


def sigmoid(a):
    a = as_tensor(a)
    y = 1.0 / (1.0 + np.exp(-a.data))
    return _record(y, (a,), lambda g: (g * y * (1.0 - y),))


def _softmax(x):
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax(a):
    """Last-axis softmax with max-subtraction for stability."""
    a = as_tensor(a)
    if not np.all(np.isfinite(a.data)):
        raise ValueError("softmax requires finite inputs")
    y = _softmax(a.data)
    return _record(y, (a,), lambda g: (y * (g - (g * y).sum(axis=-1, keepdims=True)),))


def log_softmax(a):
    a = as_tensor(a)
    z = a.data - a.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    y = z - lse
    sm = np.exp(y)
    return _record(y, (a,), lambda g: (g - sm * g.sum(axis=-1, keepdims=True),))


def cross_entropy(logits, targets, mask):
    """Masked mean cross-entropy: -(1/sum mask) sum_t mask_t * y_t . log_softmax(logits_t).

    logits: (..., T, K); targets: one-hot (..., T, K); mask: (..., T).
    """
    logits = as_tensor(logits)
    t = np.asarray(targets.data if isinstance(targets, Tensor) else targets, dtype=logits.data.dtype)
    m = np.asarray(mask.data if isinstance(mask, Tensor) else mask, dtype=logits.data.dtype)
    denom = m.sum()
    if denom <= 0:
        raise ValueError("cross_entropy mask selects no positions")
    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    ls = z - lse
    loss = -(m[..., None] * t * ls).sum() / denom
    sm = np.exp(ls)

    def vjp(g):
        return (g * (sm - t) * m[..., None] / denom,)

    return _record(np.asarray(loss, dtype=logits.data.dtype), (logits,), vjp)


def layer_norm(x, gain, bias, eps=1e-5):
    """Zero mean, unit variance per last-axis slice, then affine."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    y = gain.data * xhat + bias.data
    d = x.data.shape[-1]

    def vjp(g):
        gxhat = g * gain.data
        gx = inv * (gxhat - gxhat.mean(axis=-1, keepdims=True)
                    - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True))
        ggain = _unbroadcast(g * xhat, gain.data.shape)
        gbias = _unbroadcast(g, bias.data.shape)
        return gx, ggain, gbias

    _ = d
    return _record(y, (x, gain, bias), vjp)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        return tuple(np.take(g, range(offsets[i], offsets[i + 1]), axis=axis)
                     for i in range(len(tensors)))

    return _record(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), vjp)


def getitem(a, key):
    a = as_tensor(a)

    def vjp(g):
        gx = np.zeros_like(a.data)
        gx[key] += g
        return (gx,)

    return _record(a.data[key], (a,), vjp)


def take(a, indices, axis=0):
    """Gather along an axis with an integer index array; backward scatter-adds."""
    a = as_tensor(a)
    idx = np.asarray(indices)
    ax = axis % a.data.ndim

    def vjp(g):
        gx = np.zeros_like(a.data)
        g_moved = np.moveaxis(g, list(range(ax, ax + idx.ndim)), list(range(idx.ndim)))
        np.add.at(np.moveaxis(gx, ax, 0), idx, g_moved)
        return (gx,)

    return _record(np.take(a.data, idx, axis=ax), (a,), vjp)


def gather_last(a, idx):
    """out[..., i, j] = a[..., i, idx[i, j]] for a (..., R, S) and idx (R, C)."""
    a = as_tensor(a)
    idx = np.asarray(idx)
    full_idx = np.broadcast_to(idx, a.data.shape[:-1] + (idx.shape[-1],))
    out = np.take_along_axis(a.data, full_idx, axis=-1)

    def vjp(g):
        gx = np.zeros_like(a.data)
        flat_gx = gx.reshape(-1, gx.shape[-2], gx.shape[-1])
        flat_g = g.reshape(-1, g.shape[-2], g.shape[-1])
        lead = np.arange(flat_gx.shape[0])[:, None, None]
        rows = np.arange(gx.shape[-2])[None, :, None]
        np.add.at(flat_gx, (lead, rows, idx[None, :, :]), flat_g)
        return (flat_gx.reshape(gx.shape),)

    return _record(out, (a,), vjp)


def swapaxes(a, ax1, ax2):
    a = as_tensor(a)
    return _record(np.swapaxes(a.data, ax1, ax2), (a,), lambda g: (np.swapaxes(g, ax1, ax2),))


def transpose(a):
    return swapaxes(a, -1, -2)


def reshape(a, shape):
    a = as_tensor(a)
    return _record(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.data.shape),))


def tsum(a, axis=None, keepdims=False):
    a = as_tensor(a)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape).copy(),)

    return _record(a.data.sum(axis=axis, keepdims=keepdims), (a,), vjp)


def tmean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    n = a.data.size if axis is None else a.data.shape[axis]

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape) / n,)

    return _record(a.data.mean(axis=axis, keepdims=keepdims), (a,), vjp)


def roll(a, shift, axis=-1):
    a = as_tensor(a)
    return _record(np.roll(a.data, shift, axis=axis), (a,), lambda g: (np.roll(g, -shift, axis=axis),))


def roll_rows(a, shifts):
    """Circular roll of the last axis with a per-row shift amount.

    shifts: integer array broadcastable to a.shape[:-1]; positive shifts move
    entries toward higher indices, matching np.roll.
    """
    a = as_tensor(a)
    n = a.data.shape[-1]
    shifts = np.asarray(shifts, dtype=np.int64)
    idx = np.broadcast_to((np.arange(n) - shifts[..., None]) % n, a.data.shape)
    inv = np.broadcast_to((np.arange(n) + shifts[..., None]) % n, a.data.shape)

    def vjp(g):
        return (np.take_along_axis(g, inv, axis=-1),)

    return _record(np.take_along_axis(a.data, idx, axis=-1), (a,), vjp)


def dropout(a, p, rng=None, train=False):
    """Bernoulli mask scaled by 1/(1-p) at train time, identity at evaluation."""
    a = as_tensor(a)
    if not train or p <= 0.0:
        return a
    if rng is None:
        raise ValueError("dropout at train time needs an rng")
    mask = (rng.random(a.data.shape) >= p).astype(a.data.dtype) / (1.0 - p)
    return _record(a.data * mask, (a,), lambda g: (g * mask,))


def embedding(ids, weights):
    """Row lookup: one-hot(ids) @ weights, realized as a gather."""
    return take(weights, np.asarray(ids, dtype=np.int64), axis=0)


# ---------------------------------------------------------------------------
# Backward pass
# ---------------------------------------------------------------------------

def backward(loss):
    """Accumulate d(loss)/d(param) into .grad for every reachable parameter."""
    if loss.data.size != 1:
        raise ValueError("backward expects a scalar loss")
    tp = loss.tape
    if tp is None:
        raise ValueError("loss is not on a tape")
    grads = [None] * len(tp.nodes)
    grads[loss.node_id] = np.ones_like(loss.data)
    for node in reversed(tp.nodes[: loss.node_id + 1]):
        g = grads[node.node_id]
        if g is None:
            continue
        for parent, pg in zip(node.parents, node.vjp(g)):
            if pg is None or not parent.requires_grad:
                continue
            if parent.tape is tp:
                if grads[parent.node_id] is None:
                    grads[parent.node_id] = pg
                else:
                    grads[parent.node_id] = grads[parent.node_id] + pg
            else:
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.data)
                parent.grad += pg
        grads[node.node_id] = None


# ---------------------------------------------------------------------------
# Parameters and Adam
# ---------------------------------------------------------------------------

def glorot_uniform(rng, shape, dtype=np.float32):
    fan_in = shape[0] if len(shape) > 1 else shape[0]
    fan_out = shape[-1]
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class ParamStore:
    """Named parameters plus Adam moment state. One step counter per store."""

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self.params = {}
        self._m = {}
        self._v = {}
        self.t = 0

    def add(self, name, array):
        if name in self.params:
            raise ValueError(f"duplicate parameter {name!r}")
        p = Tensor(np.asarray(array, dtype=self.dtype), requires_grad=True)
        p.grad = np.zeros_like(p.data)
        self.params[name] = p
        self._m[name] = np.zeros_like(p.data)
        self._v[name] = np.zeros_like(p.data)
        return p

    def __getitem__(self, name):
        return self.params[name]

    def __iter__(self):
        return iter(self.params.items())

    def __len__(self):
        return len(self.params)

    def zero_grad(self):
        for p in self.params.values():
            p.grad[...] = 0.0

    def adam_step(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        """Standard Adam with bias correction; zeroes gradients afterwards."""
        self.t += 1
        bc1 = 1.0 - beta1 ** self.t
        bc2 = 1.0 - beta2 ** self.t
        for name, p in self.params.items():
            g = p.grad
            m = self._m[name]
            v = self._v[name]
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g * g
            p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
            g[...] = 0.0

    def as_float64(self):
        """Copy of this store in float64 (gradient-check mode)."""
        out = ParamStore(dtype=np.float64)
        for name, p in self.params.items():
            out.add(name, p.data.astype(np.float64))
        out.t = self.t
        return out

    def load_arrays(self, arrays):
        for name, arr in arrays.items():
            p = self.params[name]
            if p.data.shape != arr.shape:
                raise ValueError(f"shape mismatch for {name!r}")
            p.data[...] = arr.astype(self.dtype)


def adam_step(store, lr, **kw):
    store.adam_step(lr, **kw)
    return store


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------

def grad_check_store(store, loss_fn, h=1e-5):
    """Max relative error between backprop and central differences for every
    parameter in a ParamStore. loss_fn() must rebuild the scalar loss from
    the store's current parameter values; run in float64.
    """
    store.zero_grad()
    with tape():
        backward(loss_fn())
    worst = 0.0
    for _, p in store:
        analytic = p.grad.copy()
        flat = p.data.reshape(-1)
        gflat = analytic.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = float(loss_fn().data)
            flat[i] = orig - h
            down = float(loss_fn().data)
            flat[i] = orig
            num = (up - down) / (2.0 * h)
            worst = max(worst, _rel_err(gflat[i], num))
    store.zero_grad()
    return worst


def _rel_err(a, n):
    """Relative error with an absolute floor.

    Central differences carry ~1e-10 roundoff noise, so gradients that agree
    to that level must not register as mismatches even when their magnitude
    is tiny; genuine sign or scale bugs still produce errors far above the
    floor-adjusted tolerance.
    """
    return abs(a - n) / max(abs(a), abs(n), 1e-4)


def grad_check(f, thetas, h=1e-5):
    """Max relative error between backprop and central differences.

    f maps a list of float64 parameter Tensors to a scalar Tensor. thetas is
    a list of float64 numpy arrays.
    """
    params = []
    for th in thetas:
        p = Tensor(np.asarray(th, dtype=np.float64).copy(), requires_grad=True)
        p.grad = np.zeros_like(p.data)
        params.append(p)
    with tape():
        loss = f(params)
        backward(loss)
    analytic = [p.grad.copy() for p in params]

    worst = 0.0
    for p, ga in zip(params, analytic):
        flat = p.data.reshape(-1)
        gflat = ga.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            with tape():
                up = float(f(params).data)
            flat[i] = orig - h
            with tape():
                down = float(f(params).data)
            flat[i] = orig
            num = (up - down) / (2.0 * h)
            worst = max(worst, _rel_err(gflat[i], num))
    return worst
