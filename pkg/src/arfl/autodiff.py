"""Define-by-run reverse-mode differentiation over dense float64 arrays.

Every operation returns a new :class:`Tensor` that remembers its parents and a
closure mapping the output gradient to parent gradients. Tensors that do not
depend on anything with ``requires_grad`` carry no graph at all, so frozen
inputs cost nothing on the backward pass.

Shapes are 0-, 1- or 2-D. Binary elementwise operations allow the
matrix/vector broadcast needed for batched bias addition and per-row scaling
and nothing fancier.
"""

from __future__ import annotations

import numpy as np

from arfl.errors import ContractError, DimensionError


def _as_array(value) -> np.ndarray:
    return np.array(value, dtype=np.float64)


class Tensor:
    __slots__ = ("values", "requires_grad", "_grad", "_parents", "_backward", "op")

    def __init__(self, values, requires_grad=False, *, _parents=(), _backward=None, op="leaf"):
        self.values = values if isinstance(values, np.ndarray) and values.dtype == np.float64 else _as_array(values)
        self.requires_grad = bool(requires_grad)
        self._grad = None
        self._parents = _parents
        self._backward = _backward
        self.op = op

    @property
    def grad(self) -> np.ndarray:
        if self._grad is None:
            return np.zeros_like(self.values)
        return self._grad

    @grad.setter
    def grad(self, value):
        self._grad = None if value is None else _as_array(value)

    def zero_grad(self):
        self._grad = None

    @property
    def shape(self):
        return self.values.shape

    def __len__(self):
        return len(self.values)

    def __repr__(self):
        return f"Tensor({self.values!r}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        if self.values.size != 1:
            raise ContractError(f"item() needs a single element, got shape {self.shape}")
        return float(self.values.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.values

    def detach(self) -> "Tensor":
        return Tensor(self.values.copy())

    def backward(self, accumulate=False):
        backward(self, accumulate=accumulate)

    __add__ = lambda self, other: add(self, other)
    __radd__ = lambda self, other: add(other, self)
    __sub__ = lambda self, other: sub(self, other)
    __rsub__ = lambda self, other: sub(other, self)
    __mul__ = lambda self, other: mul(self, other)
    __rmul__ = lambda self, other: mul(other, self)
    __neg__ = lambda self: neg(self)
    __matmul__ = lambda self, other: matmul(self, other)


def tensor(values, requires_grad=False) -> Tensor:
    return Tensor(_as_array(values), requires_grad)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(_as_array(x))


def _node(values, parents, backward_fn, op) -> Tensor:
    if any(p.requires_grad for p in parents):
        return Tensor(values, True, _parents=parents, _backward=backward_fn, op=op)
    return Tensor(values, op=op)


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _check_elementwise(a: Tensor, b: Tensor, op: str):
    sa, sb = a.shape, b.shape
    if sa == sb or a.values.size == 1 or b.values.size == 1:
        return
    # matrix (rows x n) against a length-n row vector or a (rows x 1) column
    for m, v in ((sa, sb), (sb, sa)):
        if len(m) == 2 and (v == (m[1],) or v == (m[0], 1)):
            return
    raise DimensionError(f"{op}: shapes {sa} and {sb} do not conform")


# --- binary arithmetic -----------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _check_elementwise(a, b, "add")
    out = a.values + b.values

    def back(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _node(out, (a, b), back, "add")


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _check_elementwise(a, b, "sub")
    out = a.values - b.values

    def back(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _node(out, (a, b), back, "sub")


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _check_elementwise(a, b, "mul")
    out = a.values * b.values

    def back(g):
        return _unbroadcast(g * b.values, a.shape), _unbroadcast(g * a.values, b.shape)

    return _node(out, (a, b), back, "mul")


def neg(a) -> Tensor:
    a = _wrap(a)
    return _node(-a.values, (a,), lambda g: (-g,), "neg")


def scale(a, c: float) -> Tensor:
    """Multiply by a plain constant without recording the constant as a node."""
    a = _wrap(a)
    c = float(c)
    return _node(a.values * c, (a,), lambda g: (g * c,), "scale")


def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.values.ndim not in (1, 2) or b.values.ndim not in (1, 2) or a.shape[-1] != b.shape[0]:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} do not conform")
    av, bv = a.values, b.values
    out = av @ bv

    def back(g):
        if av.ndim == 2 and bv.ndim == 2:
            return g @ bv.T, av.T @ g
        if av.ndim == 2:  # matrix @ vector
            return np.outer(g, bv), av.T @ g
        if bv.ndim == 2:  # vector @ matrix
            return bv @ g, np.outer(av, g)
        return g * bv, g * av

    return _node(out, (a, b), back, "matmul")


def affine(W, b, x) -> Tensor:
    """``W x + b`` for a single vector ``x``, or row-wise for a batch of rows.

    A batch ``x`` of shape (rows, n) gives (rows, m) with one output row per
    input row.
    """
    W, b, x = _wrap(W), _wrap(b), _wrap(x)
    m_n = W.shape
    if len(m_n) != 2 or b.shape != (m_n[0],) or x.values.ndim not in (1, 2) or x.shape[-1] != m_n[1]:
        raise DimensionError(f"affine: weights {W.shape}, bias {b.shape} and input {x.shape} do not conform")
    Wv, xv = W.values, x.values
    if xv.ndim == 1:
        out = Wv @ xv + b.values

        def back(g):
            return np.outer(g, xv), g, Wv.T @ g

    else:
        out = xv @ Wv.T + b.values

        def back(g):
            return g.T @ xv, g.sum(axis=0), g @ Wv

    return _node(out, (W, b, x), back, "affine")


# --- elementwise nonlinearities ----------------------------------------------


def _sigmoid(v: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    e = np.exp(v[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _softplus(v: np.ndarray) -> np.ndarray:
    return np.maximum(v, 0.0) + np.log1p(np.exp(-np.abs(v)))


def tanh(x) -> Tensor:
    x = _wrap(x)
    out = np.tanh(x.values)
    return _node(out, (x,), lambda g: (g * (1.0 - out * out),), "tanh")


def relu(x) -> Tensor:
    x = _wrap(x)
    mask = x.values > 0
    return _node(np.where(mask, x.values, 0.0), (x,), lambda g: (g * mask,), "relu")


def sigmoid(x) -> Tensor:
    x = _wrap(x)
    out = _sigmoid(x.values)
    return _node(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def absolute(x) -> Tensor:
    x = _wrap(x)
    # np.sign(0) == 0 gives the zero subgradient at the kink
    s = np.sign(x.values)
    return _node(np.abs(x.values), (x,), lambda g: (g * s,), "abs")


def softplus(x) -> Tensor:
    """``log(1 + exp(x))`` evaluated without overflow."""
    x = _wrap(x)
    return _node(_softplus(x.values), (x,), lambda g: (g * _sigmoid(x.values),), "softplus")


def exp(x) -> Tensor:
    x = _wrap(x)
    out = np.exp(x.values)
    return _node(out, (x,), lambda g: (g * out,), "exp")


def log(x) -> Tensor:
    x = _wrap(x)
    v = x.values
    return _node(np.log(v), (x,), lambda g: (g / v,), "log")


def clip(x, lo: float, hi: float) -> Tensor:
    x = _wrap(x)
    v = x.values
    inside = (v >= lo) & (v <= hi)
    return _node(np.clip(v, lo, hi), (x,), lambda g: (g * inside,), "clip")


ELEMENTWISE = {"tanh": tanh, "relu": relu, "sigmoid": sigmoid, "abs": absolute}


def elementwise(kind: str, x) -> Tensor:
    try:
        fn = ELEMENTWISE[kind]
    except KeyError:
        raise ValueError(f"unknown nonlinearity {kind!r}; expected one of {sorted(ELEMENTWISE)}") from None
    return fn(x)


# --- reductions and reshaping ------------------------------------------------


def sum(x, axis=None) -> Tensor:  # noqa: A001 - mirrors numpy naming
    x = _wrap(x)
    shape = x.shape
    out = x.values.sum(axis=axis)

    def back(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _node(np.asarray(out, dtype=np.float64), (x,), back, "sum")


def mean(x, axis=None) -> Tensor:
    x = _wrap(x)
    n = x.values.size if axis is None else x.shape[axis]
    return scale(sum(x, axis), 1.0 / n)


def reshape(x, shape) -> Tensor:
    x = _wrap(x)
    old = x.shape
    return _node(x.values.reshape(shape), (x,), lambda g: (g.reshape(old),), "reshape")


# --- graph traversal ---------------------------------------------------------


def topological_order(root: Tensor) -> list:
    """Nodes reachable from ``root`` that carry gradients, parents first."""
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root: Tensor, accumulate: bool = False) -> None:
    """Populate ``.grad`` of every grad-carrying tensor reachable from ``root``.

    Gradients of those tensors are reset first unless ``accumulate`` is set,
    in which case the new contribution is added to what is already there.
    """
    if root.values.size != 1:
        raise ContractError(f"backward needs a scalar root, got shape {root.shape}")
    order = topological_order(root)
    if not accumulate:
        for node in order:
            node._grad = None
    pending = {id(root): np.ones_like(root.values)}
    for node in reversed(order):
        g = pending.pop(id(node), None)
        if g is None:
            continue
        node._grad = g if node._grad is None else node._grad + g
        if node._backward is None:
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if not parent.requires_grad:
                continue
            key = id(parent)
            pending[key] = pg if key not in pending else pending[key] + pg


def finite_diff_grad(f, x, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of the scalar function ``f`` at ``x``.

    ``f`` receives a float64 array shaped like ``x`` and returns a float.
    """
    if h <= 0:
        raise ValueError("step size must be positive")
    base = np.array(x.values if isinstance(x, Tensor) else x, dtype=np.float64)
    grad = np.zeros_like(base)
    flat = base.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        hi = float(f(base))
        flat[i] = orig - h
        lo = float(f(base))
        flat[i] = orig
        out[i] = (hi - lo) / (2.0 * h)
    return grad
