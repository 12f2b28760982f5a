"""Minimal reverse-mode automatic differentiation over numpy arrays.

Values are recorded on a :class:`Tape` as :class:`Var` nodes.  The module
level functions (``exp``, ``softmax``, ``concatenate`` ...) dispatch on their
arguments: given plain arrays they return plain arrays, given at least one
``Var`` they record a node.  Game kernels and solver networks are written
once against these functions and run unchanged in both modes, so a taped
forward pass produces bitwise the same numbers as an untaped one.

Only first-order reverse accumulation is supported.  Second-order terms in
meta-gradients come from recording closed-form payoff gradients as ordinary
forward operations.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tape", "Var", "is_var", "value_of",
    "exp", "log", "tanh", "sigmoid", "relu", "leaky_relu", "softmax",
    "sum", "mean", "reshape", "transpose", "concatenate", "stack", "matmul",
    "square", "dot",
]


class Var:
    """A node on a tape: a value plus how it was computed."""

    __slots__ = ("value", "tape", "index", "op", "args", "fn", "vjps")
    __array_priority__ = 1000.0  # make ndarray <op> Var defer to Var

    def __init__(self, value, tape, op, args=(), fn=None, vjps=()):
        self.value = value
        self.tape = tape
        self.op = op
        self.args = args
        self.fn = fn
        self.vjps = vjps
        self.index = len(tape.nodes)
        tape.nodes.append(self)

    def __repr__(self):
        return f"Var({self.op}, shape={np.shape(self.value)})"

    @property
    def shape(self):
        return np.shape(self.value)

    @property
    def ndim(self):
        return np.ndim(self.value)

    def __len__(self):
        return len(self.value)

    @property
    def T(self):
        return transpose(self)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def sum(self, axis=None, keepdims=False):
        return sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return subtract(self, other)

    def __rsub__(self, other):
        return subtract(other, self)

    def __mul__(self, other):
        return multiply(self, other)

    def __rmul__(self, other):
        return multiply(other, self)

    def __truediv__(self, other):
        return divide(self, other)

    def __rtruediv__(self, other):
        return divide(other, self)

    def __neg__(self):
        return negative(self)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, idx):
        return getitem(self, idx)


class Tape:
    """Ordered record of operations.

    Nodes are appended in evaluation order, so every node's inputs precede
    it and reverse iteration is a valid backward schedule.
    """

    def __init__(self):
        self.nodes: list[Var] = []

    def __len__(self):
        return len(self.nodes)

    def leaf(self, value, name: str = "leaf") -> Var:
        return Var(np.array(value, dtype=float), self, name)

    def custom(self, value, parents: Sequence[Var], vjp: Callable, fn: Callable | None = None,
               op: str = "custom") -> Var:
        """Record an opaque node.

        ``vjp(g)`` must return one cotangent per parent.  ``fn`` recomputes
        the value from parent values during :meth:`replay`.
        """
        parents = tuple(parents)
        for p in parents:
            _check_tape(p, self)

        memo = [None, None]

        def part(g, k):
            if memo[0] is not g:
                memo[0], memo[1] = g, vjp(g)
            return memo[1][k]

        vjps = tuple((lambda k: (lambda g, vals, out: part(g, k)))(k)
                     for k in range(len(parents)))
        return Var(np.asarray(value, dtype=float), self, op, parents, fn, vjps)

    def ops(self) -> list[str]:
        return [n.op for n in self.nodes]

    def backward(self, output: Var, wrt: Iterable[Var], cotangent=None) -> list[np.ndarray]:
        """Gradients of ``output`` with respect to each node in ``wrt``."""
        _check_tape(output, self)
        wrt = list(wrt)
        for w in wrt:
            _check_tape(w, self)
        grads: dict[int, np.ndarray] = {}
        if cotangent is None:
            if np.size(output.value) != 1:
                raise ValueError("backward from a non-scalar output needs a cotangent")
            cotangent = np.ones_like(output.value)
        grads[output.index] = np.asarray(cotangent, dtype=float)
        keep = {w.index for w in wrt}
        for node in reversed(self.nodes[: output.index + 1]):
            g = grads.get(node.index) if node.index in keep else grads.pop(node.index, None)
            if g is None or not node.args:
                continue
            vals = [a.value if isinstance(a, Var) else a for a in node.args]
            for arg, vjp in zip(node.args, node.vjps):
                if vjp is None or not isinstance(arg, Var):
                    continue
                contrib = _unbroadcast(vjp(g, vals, node.value), np.shape(arg.value))
                prev = grads.get(arg.index)
                grads[arg.index] = contrib if prev is None else prev + contrib
        return [grads.get(w.index, np.zeros_like(w.value)) for w in wrt]

    def replay(self, leaves: dict[Var, np.ndarray] | None = None) -> list[np.ndarray]:
        """Recompute every node from the leaves; returns values in tape order."""
        leaves = leaves or {}
        override = {v.index: np.asarray(val, dtype=float) for v, val in leaves.items()}
        out: list[np.ndarray] = []
        for node in self.nodes:
            if not node.args and node.fn is None:
                out.append(override.get(node.index, node.value))
                continue
            vals = [out[a.index] if isinstance(a, Var) else a for a in node.args]
            out.append(node.fn(*vals))
        return out


def _check_tape(v: Var, tape: Tape):
    if v.tape is not tape:
        raise ValueError("Var belongs to a different tape")


def _unbroadcast(g, shape):
    g = np.asarray(g, dtype=float)
    if g.shape == tuple(shape):
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


def is_var(x) -> bool:
    return isinstance(x, Var)


def value_of(x):
    """Numeric value of a Var, or the argument itself."""
    return x.value if isinstance(x, Var) else x


def _record(op, fn, args, vjps):
    tape = None
    for a in args:
        if isinstance(a, Var):
            if tape is None:
                tape = a.tape
            elif a.tape is not tape:
                raise ValueError("cannot combine Vars from different tapes")
    vals = [a.value if isinstance(a, Var) else a for a in args]
    return Var(fn(*vals), tape, op, tuple(args), fn, tuple(vjps))


def _any_var(args) -> bool:
    return any(isinstance(a, Var) for a in args)


def _asf(x):
    return np.asarray(x, dtype=float)


# -- elementwise arithmetic -------------------------------------------------

def add(a, b):
    if not _any_var((a, b)):
        return np.add(a, b)
    return _record("add", np.add, (a, b), (lambda g, v, o: g, lambda g, v, o: g))


def subtract(a, b):
    if not _any_var((a, b)):
        return np.subtract(a, b)
    return _record("sub", np.subtract, (a, b), (lambda g, v, o: g, lambda g, v, o: -g))


def multiply(a, b):
    if not _any_var((a, b)):
        return np.multiply(a, b)
    return _record("mul", np.multiply, (a, b),
                   (lambda g, v, o: g * v[1], lambda g, v, o: g * v[0]))


def divide(a, b):
    if not _any_var((a, b)):
        return np.divide(a, b)
    return _record("div", np.divide, (a, b),
                   (lambda g, v, o: g / v[1], lambda g, v, o: -g * v[0] / (v[1] * v[1])))


def negative(a):
    if not isinstance(a, Var):
        return np.negative(a)
    return _record("neg", np.negative, (a,), (lambda g, v, o: -g,))


def power(a, p: float):
    fn = lambda x: np.power(x, p)  # noqa: E731
    if not isinstance(a, Var):
        return fn(a)
    return _record("pow", fn, (a,), (lambda g, v, o: g * p * np.power(v[0], p - 1),))


def square(a):
    fn = lambda x: x * x  # noqa: E731
    if not isinstance(a, Var):
        return fn(a)
    return _record("square", fn, (a,), (lambda g, v, o: 2.0 * g * v[0],))


# -- nonlinearities ---------------------------------------------------------

def exp(a):
    if not isinstance(a, Var):
        return np.exp(a)
    return _record("exp", np.exp, (a,), (lambda g, v, o: g * o,))


def log(a):
    if not isinstance(a, Var):
        return np.log(a)
    return _record("log", np.log, (a,), (lambda g, v, o: g / v[0],))


def tanh(a):
    if not isinstance(a, Var):
        return np.tanh(a)
    return _record("tanh", np.tanh, (a,), (lambda g, v, o: g * (1.0 - o * o),))


def _sigmoid_np(x):
    x = _asf(x)
    with np.errstate(over="ignore"):
        pos = 1.0 / (1.0 + np.exp(-np.abs(x)))
    return np.where(x >= 0, pos, 1.0 - pos)


def sigmoid(a):
    if not isinstance(a, Var):
        return _sigmoid_np(a)
    return _record("sigmoid", _sigmoid_np, (a,), (lambda g, v, o: g * o * (1.0 - o),))


def _relu_np(x):
    return np.maximum(x, 0.0)


def relu(a):
    if not isinstance(a, Var):
        return _relu_np(a)
    return _record("relu", _relu_np, (a,), (lambda g, v, o: g * (v[0] > 0),))


def leaky_relu(a, slope: float = 0.01):
    fn = lambda x: np.where(x > 0, x, slope * x)  # noqa: E731
    if not isinstance(a, Var):
        return fn(a)
    return _record("leaky_relu", fn, (a,), (lambda g, v, o: g * np.where(v[0] > 0, 1.0, slope),))


def _softmax_np(x, axis):
    x = _asf(x)
    z = np.exp(x - np.max(x, axis=axis, keepdims=True))
    return z / np.sum(z, axis=axis, keepdims=True)


def softmax(a, axis: int = -1):
    fn = lambda x: _softmax_np(x, axis)  # noqa: E731
    if not isinstance(a, Var):
        return fn(a)

    def vjp(g, v, o):
        return o * (g - np.sum(g * o, axis=axis, keepdims=True))

    return _record("softmax", fn, (a,), (vjp,))


# -- reductions and shape ---------------------------------------------------

def _expand_to(g, shape, axis, keepdims):
    g = _asf(g)
    if axis is not None and not keepdims:
        axes = (axis,) if np.isscalar(axis) else tuple(axis)
        axes = tuple(ax % len(shape) for ax in axes)
        for ax in sorted(axes):
            g = np.expand_dims(g, ax)
    return np.broadcast_to(g, shape)


def sum(a, axis=None, keepdims: bool = False):  # noqa: A001
    fn = lambda x: np.sum(x, axis=axis, keepdims=keepdims)  # noqa: E731
    if not isinstance(a, Var):
        return fn(a)
    return _record("sum", fn, (a,),
                   (lambda g, v, o: _expand_to(g, np.shape(v[0]), axis, keepdims),))


def mean(a, axis=None, keepdims: bool = False):
    fn = lambda x: np.mean(x, axis=axis, keepdims=keepdims)  # noqa: E731
    if not isinstance(a, Var):
        return fn(a)

    def vjp(g, v, o):
        n = np.size(v[0]) // max(np.size(o), 1)
        return _expand_to(g, np.shape(v[0]), axis, keepdims) / n

    return _record("mean", fn, (a,), (vjp,))


def reshape(a, shape):
    fn = lambda x: np.reshape(x, shape)  # noqa: E731
    if not isinstance(a, Var):
        return fn(a)
    return _record("reshape", fn, (a,), (lambda g, v, o: np.reshape(g, np.shape(v[0])),))


def transpose(a, axes=None):
    fn = lambda x: np.transpose(x, axes)  # noqa: E731
    if not isinstance(a, Var):
        return fn(a)
    inv = None if axes is None else tuple(np.argsort(axes))
    return _record("transpose", fn, (a,), (lambda g, v, o: np.transpose(g, inv),))


def getitem(a, idx):
    fn = lambda x: x[idx]  # noqa: E731
    if not isinstance(a, Var):
        return fn(a)

    def vjp(g, v, o):
        out = np.zeros(np.shape(v[0]))
        np.add.at(out, idx, g)
        return out

    return _record("getitem", fn, (a,), (vjp,))


def concatenate(parts: Sequence, axis: int = 0):
    parts = list(parts)
    fn = lambda *xs: np.concatenate([np.asarray(x, dtype=float) for x in xs], axis=axis)  # noqa: E731
    if not _any_var(parts):
        return fn(*parts)
    sizes = [np.shape(p.value if isinstance(p, Var) else p)[axis] for p in parts]
    bounds = np.cumsum([0] + sizes)

    def make(k):
        def vjp(g, v, o):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(bounds[k], bounds[k + 1])
            return g[tuple(sl)]
        return vjp

    return _record("concatenate", fn, tuple(parts), tuple(make(k) for k in range(len(parts))))


def stack(parts: Sequence, axis: int = 0):
    parts = list(parts)
    fn = lambda *xs: np.stack([np.asarray(x, dtype=float) for x in xs], axis=axis)  # noqa: E731
    if not _any_var(parts):
        return fn(*parts)

    def make(k):
        return lambda g, v, o: np.take(g, k, axis=axis)

    return _record("stack", fn, tuple(parts), tuple(make(k) for k in range(len(parts))))


# -- linear algebra ---------------------------------------------------------

def _matmul_vjp_a(g, v, o):
    a, b = v
    if b.ndim == 1:
        return np.outer(g, b) if a.ndim == 2 else g * b
    if a.ndim == 1:
        return b @ g
    return g @ b.T


def _matmul_vjp_b(g, v, o):
    a, b = v
    if a.ndim == 1:
        return np.outer(a, g) if b.ndim == 2 else g * a
    if b.ndim == 1:
        return a.T @ g
    return a.T @ g


def matmul(a, b):
    """Matrix product for 1-D and 2-D operands."""
    if not _any_var((a, b)):
        return np.matmul(a, b)
    for x in (a, b):
        if np.ndim(value_of(x)) > 2:
            raise ValueError("taped matmul supports 1-D and 2-D operands only")
    return _record("matmul", np.matmul, (a, b), (_matmul_vjp_a, _matmul_vjp_b))


def dot(a, b):
    return sum(multiply(a, b))
