"""Minimal reverse-mode automatic differentiation on numpy float64.

A Var wraps an ndarray; ops are plain functions that lift raw arrays and
scalars to constants, so model code written against this module runs
unchanged with or without gradient recording. Recording happens only while
a Tape is active on the current thread:

    with Tape() as tape:
        loss = some_scalar_expression(params)
        tape.backward(loss)
    g = params["w"].grad

Outside a Tape, ops just compute values, so the inference paths pay no
graph-building cost. The op set is exactly what the recurrent model and
the linear-chain CRF need; there is no general broadcasting engine beyond
what ``add``/``mul`` provide.
"""

from __future__ import annotations

import threading

import numpy as np

_TLS = threading.local()


def _tape() -> "Tape | None":
    return getattr(_TLS, "tape", None)


class Var:
    __slots__ = ("value", "grad")

    def __init__(self, value):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None

    @property
    def shape(self):
        return self.value.shape

    def item(self) -> float:
        return float(self.value)

    def accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        self.grad += g

    def __repr__(self):
        return f"Var(shape={self.value.shape})"


class Tape:
    """Records backward closures; context manager installs it thread-locally."""

    def __init__(self):
        self._ops: list = []

    def __enter__(self) -> "Tape":
        if _tape() is not None:
            raise RuntimeError("a Tape is already active on this thread")
        _TLS.tape = self
        return self

    def __exit__(self, *exc):
        _TLS.tape = None
        return False

    def record(self, backward):
        self._ops.append(backward)

    def backward(self, loss: Var):
        if loss.value.shape != ():
            raise ValueError("backward requires a scalar loss")
        loss.accumulate(np.ones_like(loss.value))
        for op in reversed(self._ops):
            op()


def as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def _rec(out: Var, backward):
    t = _tape()
    if t is not None:
        t.record(backward)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, dim in enumerate(shape):
        if dim == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


def add(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    out = Var(a.value + b.value)

    def backward():
        if out.grad is None:
            return
        a.accumulate(_unbroadcast(out.grad, a.value.shape))
        b.accumulate(_unbroadcast(out.grad, b.value.shape))

    return _rec(out, backward)


def add_n(xs) -> Var:
    xs = [as_var(x) for x in xs]
    out = Var(sum(x.value for x in xs))

    def backward():
        if out.grad is None:
            return
        for x in xs:
            x.accumulate(_unbroadcast(out.grad, x.value.shape))

    return _rec(out, backward)


def sub(a, b) -> Var:
    return add(a, neg(b))


def neg(a) -> Var:
    a = as_var(a)
    out = Var(-a.value)

    def backward():
        if out.grad is None:
            return
        a.accumulate(-out.grad)

    return _rec(out, backward)


def mul(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    out = Var(a.value * b.value)

    def backward():
        if out.grad is None:
            return
        a.accumulate(_unbroadcast(out.grad * b.value, a.value.shape))
        b.accumulate(_unbroadcast(out.grad * a.value, b.value.shape))

    return _rec(out, backward)


def matvec(w, x) -> Var:
    """w @ x for 2-D w, 1-D x."""
    w, x = as_var(w), as_var(x)
    out = Var(w.value @ x.value)

    def backward():
        if out.grad is None:
            return
        w.accumulate(np.outer(out.grad, x.value))
        x.accumulate(w.value.T @ out.grad)

    return _rec(out, backward)


def tmatvec(w, x) -> Var:
    """w.T @ x for 2-D w, 1-D x."""
    w, x = as_var(w), as_var(x)
    out = Var(w.value.T @ x.value)

    def backward():
        if out.grad is None:
            return
        w.accumulate(np.outer(x.value, out.grad))
        x.accumulate(w.value @ out.grad)

    return _rec(out, backward)


def dot(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    out = Var(a.value @ b.value)

    def backward():
        if out.grad is None:
            return
        a.accumulate(out.grad * b.value)
        b.accumulate(out.grad * a.value)

    return _rec(out, backward)


def tanh(x) -> Var:
    x = as_var(x)
    y = np.tanh(x.value)
    out = Var(y)

    def backward():
        if out.grad is None:
            return
        x.accumulate(out.grad * (1.0 - y * y))

    return _rec(out, backward)


def sigmoid(x) -> Var:
    x = as_var(x)
    y = 1.0 / (1.0 + np.exp(-x.value))
    out = Var(y)

    def backward():
        if out.grad is None:
            return
        x.accumulate(out.grad * y * (1.0 - y))

    return _rec(out, backward)


def exp(x) -> Var:
    x = as_var(x)
    y = np.exp(x.value)
    out = Var(y)

    def backward():
        if out.grad is None:
            return
        x.accumulate(out.grad * y)

    return _rec(out, backward)


def log(x) -> Var:
    x = as_var(x)
    out = Var(np.log(x.value))

    def backward():
        if out.grad is None:
            return
        x.accumulate(out.grad / x.value)

    return _rec(out, backward)


def softmax(x) -> Var:
    """1-D softmax."""
    x = as_var(x)
    shifted = x.value - x.value.max()
    e = np.exp(shifted)
    y = e / e.sum()
    out = Var(y)

    def backward():
        if out.grad is None:
            return
        x.accumulate(y * (out.grad - float(out.grad @ y)))

    return _rec(out, backward)


def log_softmax(x) -> Var:
    """1-D log-softmax."""
    x = as_var(x)
    m = x.value.max()
    shifted = x.value - m
    lse = m + np.log(np.exp(shifted).sum())
    out = Var(x.value - lse)

    def backward():
        if out.grad is None:
            return
        p = np.exp(out.value)
        x.accumulate(out.grad - p * out.grad.sum())

    return _rec(out, backward)


def logsumexp(x, axis=None) -> Var:
    x = as_var(x)
    m = x.value.max(axis=axis, keepdims=True)
    s = np.exp(x.value - m).sum(axis=axis, keepdims=True)
    keep = m + np.log(s)
    out = Var(keep.squeeze(axis=axis) if axis is not None else keep.reshape(()))

    def backward():
        if out.grad is None:
            return
        p = np.exp(x.value - keep)
        if axis is None:
            x.accumulate(p * out.grad)
        else:
            x.accumulate(p * np.expand_dims(out.grad, axis))

    return _rec(out, backward)


def take(x, index) -> Var:
    """Scalar element by (tuple) index."""
    x = as_var(x)
    out = Var(x.value[index])

    def backward():
        if out.grad is None:
            return
        g = np.zeros_like(x.value)
        g[index] = out.grad
        x.accumulate(g)

    return _rec(out, backward)


def row(m, i: int) -> Var:
    """Row i of a 2-D array (embedding lookup)."""
    m = as_var(m)
    out = Var(m.value[i].copy())

    def backward():
        if out.grad is None:
            return
        g = np.zeros_like(m.value)
        g[i] = out.grad
        m.accumulate(g)

    return _rec(out, backward)


def stack(xs) -> Var:
    """Stack 1-D vars into a 2-D matrix, one per row."""
    xs = [as_var(x) for x in xs]
    out = Var(np.stack([x.value for x in xs]))

    def backward():
        if out.grad is None:
            return
        for i, x in enumerate(xs):
            x.accumulate(out.grad[i])

    return _rec(out, backward)


def concat(xs) -> Var:
    xs = [as_var(x) for x in xs]
    sizes = [x.value.shape[0] for x in xs]
    out = Var(np.concatenate([x.value for x in xs]))

    def backward():
        if out.grad is None:
            return
        off = 0
        for x, n in zip(xs, sizes):
            x.accumulate(out.grad[off : off + n])
            off += n

    return _rec(out, backward)


def ssum(x) -> Var:
    x = as_var(x)
    out = Var(np.asarray(x.value.sum()))

    def backward():
        if out.grad is None:
            return
        x.accumulate(np.full_like(x.value, float(out.grad)))

    return _rec(out, backward)


def reshape(x, shape) -> Var:
    x = as_var(x)
    out = Var(x.value.reshape(shape))

    def backward():
        if out.grad is None:
            return
        x.accumulate(out.grad.reshape(x.value.shape))

    return _rec(out, backward)


def scale(x, c: float) -> Var:
    x = as_var(x)
    out = Var(x.value * c)

    def backward():
        if out.grad is None:
            return
        x.accumulate(out.grad * c)

    return _rec(out, backward)


def numeric_gradient(fn, arrays: dict[str, np.ndarray], name: str, index,
                     eps: float = 1e-5) -> float:
    """Central finite difference of ``fn(arrays) -> float`` in one coordinate."""
    saved = arrays[name][index]
    arrays[name][index] = saved + eps
    hi = fn(arrays)
    arrays[name][index] = saved - eps
    lo = fn(arrays)
    arrays[name][index] = saved
    return (hi - lo) / (2.0 * eps)
