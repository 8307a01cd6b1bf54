"""Minimal reverse-mode automatic differentiation over numpy arrays.

Every op in this module accepts plain numpy values or Var nodes. When no
argument is a Var the op short-circuits to numpy, so the same numeric code
serves both inference (arrays in, arrays out) and training (Vars in, gradients
out of `backward`). Only float64 is supported; shapes follow numpy broadcasting
for the elementwise ops.

Typical use:

    w = Var(weights)
    loss = add(mul(w, w), 1.0)      # or w * w + 1.0
    total = sum(loss)
    total.backward()
    w.grad                          # dtotal/dweights
"""

import builtins

import numpy as np

from . import _kernels


class Var:
    """A node in the computation graph: a value plus VJP edges to parents."""

    __slots__ = ("value", "parents", "vjps", "grad")

    def __init__(self, value, parents=(), vjps=()):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = parents
        self.vjps = vjps
        self.grad = None

    @property
    def shape(self):
        return self.value.shape

    def backward(self):
        """Accumulate gradients of this scalar into every reachable Var."""
        if self.value.shape != ():
            raise ValueError("backward() requires a scalar root")
        order = _topo_order(self)
        for node in order:
            node.grad = None
        self.grad = np.ones(())
        for node in reversed(order):
            g = node.grad
            if g is None:
                continue
            for parent, vjp in zip(node.parents, node.vjps):
                pg = vjp(g)
                parent.grad = pg if parent.grad is None else parent.grad + pg

    def item(self):
        return float(self.value)

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

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return power(self, p)

    def __repr__(self):
        return f"Var(shape={self.value.shape}, grad={'set' if self.grad is not None else 'unset'})"


def _topo_order(root):
    """Parents-before-children ordering via iterative post-order DFS."""
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def is_var(x):
    return isinstance(x, Var)


def value_of(x):
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=np.float64)


def _unbroadcast(grad, shape):
    """Reduce a broadcasted gradient back to the original operand shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _binary(a, b, out_val, vjp_a, vjp_b):
    parents, vjps = [], []
    if isinstance(a, Var):
        parents.append(a)
        vjps.append(vjp_a)
    if isinstance(b, Var):
        parents.append(b)
        vjps.append(vjp_b)
    return Var(out_val, tuple(parents), tuple(vjps))


def add(a, b):
    av, bv = value_of(a), value_of(b)
    out = av + bv
    if not (isinstance(a, Var) or isinstance(b, Var)):
        return out
    return _binary(
        a, b, out,
        lambda g: _unbroadcast(g, av.shape),
        lambda g: _unbroadcast(g, bv.shape),
    )


def sub(a, b):
    av, bv = value_of(a), value_of(b)
    out = av - bv
    if not (isinstance(a, Var) or isinstance(b, Var)):
        return out
    return _binary(
        a, b, out,
        lambda g: _unbroadcast(g, av.shape),
        lambda g: _unbroadcast(-g, bv.shape),
    )


def mul(a, b):
    av, bv = value_of(a), value_of(b)
    out = av * bv
    if not (isinstance(a, Var) or isinstance(b, Var)):
        return out
    return _binary(
        a, b, out,
        lambda g: _unbroadcast(g * bv, av.shape),
        lambda g: _unbroadcast(g * av, bv.shape),
    )


def neg(a):
    if not isinstance(a, Var):
        return -value_of(a)
    return Var(-a.value, (a,), (lambda g: -g,))


def matmul(a, b):
    """Matrix product for the 1-D/2-D combinations numpy's @ supports."""
    av, bv = value_of(a), value_of(b)
    out = av @ bv
    if not (isinstance(a, Var) or isinstance(b, Var)):
        return out

    def vjp_a(g):
        if av.ndim == 1 and bv.ndim == 1:
            return g * bv
        if av.ndim == 1:  # (k,) @ (k, m) -> (m,)
            return bv @ g
        if bv.ndim == 1:  # (n, k) @ (k,) -> (n,)
            return np.outer(g, bv)
        return g @ bv.T

    def vjp_b(g):
        if av.ndim == 1 and bv.ndim == 1:
            return g * av
        if av.ndim == 1:
            return np.outer(av, g)
        if bv.ndim == 1:
            return av.T @ g
        return av.T @ g

    return _binary(a, b, out, vjp_a, vjp_b)


def dot(a, b):
    """Inner product of two vectors."""
    return matmul(a, b)


def sum(a, axis=None):
    av = value_of(a)
    out = av.sum(axis=axis)
    if not isinstance(a, Var):
        return out

    def vjp(g):
        if axis is None:
            return np.broadcast_to(g, av.shape).copy()
        return np.broadcast_to(np.expand_dims(g, axis), av.shape).copy()

    return Var(out, (a,), (vjp,))


def mean(a, axis=None):
    av = value_of(a)
    count = av.size if axis is None else av.shape[axis]
    return mul(sum(a, axis=axis), 1.0 / count)


def relu(a):
    av = value_of(a)
    out = np.maximum(av, 0.0)
    if not isinstance(a, Var):
        return out
    return Var(out, (a,), (lambda g: g * (av > 0.0),))


def exp(a):
    av = value_of(a)
    out = np.exp(av)
    if not isinstance(a, Var):
        return out
    return Var(out, (a,), (lambda g: g * out,))


def log(a):
    av = value_of(a)
    out = np.log(av)
    if not isinstance(a, Var):
        return out
    return Var(out, (a,), (lambda g: g / av,))


def power(a, p):
    av = value_of(a)
    out = av ** p
    if not isinstance(a, Var):
        return out
    return Var(out, (a,), (lambda g: g * p * av ** (p - 1),))


def sigmoid(a):
    av = value_of(a)
    out = _stable_sigmoid(av)
    if not isinstance(a, Var):
        return out
    return Var(out, (a,), (lambda g: g * out * (1.0 - out),))


def _stable_sigmoid(x):
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def logaddexp(a, b):
    """Elementwise log(exp(a) + exp(b)), computed without overflow."""
    av, bv = value_of(a), value_of(b)
    out = np.logaddexp(av, bv)
    if not (isinstance(a, Var) or isinstance(b, Var)):
        return out
    return _binary(
        a, b, out,
        lambda g: _unbroadcast(g * np.exp(av - out), av.shape),
        lambda g: _unbroadcast(g * np.exp(bv - out), bv.shape),
    )


def concat(parts):
    """Concatenate 1-D segments; gradients split back by offset."""
    vals = [value_of(p) for p in parts]
    out = np.concatenate(vals)
    if not builtins.any(isinstance(p, Var) for p in parts):
        return out
    offsets = np.cumsum([0] + [v.shape[0] for v in vals])
    parents, vjps = [], []
    for k, p in enumerate(parts):
        if isinstance(p, Var):
            lo, hi = offsets[k], offsets[k + 1]
            parents.append(p)
            vjps.append(lambda g, lo=lo, hi=hi: g[lo:hi])
    return Var(out, tuple(parents), tuple(vjps))


def scatter_symmetric(values, rows, cols, n):
    """Build an (n, n) symmetric matrix from per-edge values.

    values[k] lands at (rows[k], cols[k]) and (cols[k], rows[k]); everything
    else is zero. Index pairs must be off-diagonal and unique per undirected
    edge.
    """
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    vv = value_of(values)
    out = np.zeros((n, n))
    out[rows, cols] = vv
    out[cols, rows] = vv
    if not isinstance(values, Var):
        return out
    return Var(out, (values,), (lambda g: g[rows, cols] + g[cols, rows],))


def normalize_adjacency(w):
    """Kernel-backed symmetric normalization D^-1/2 (w + I) D^-1/2."""
    wv = value_of(w)
    p, cache = _kernels.sym_normalize(wv)
    if not isinstance(w, Var):
        return p
    return Var(p, (w,), (lambda g: _kernels.sym_normalize_vjp(g, cache),))
