"""Array-valued reverse-mode tape with forward propagation of spatial jets.

The tape records numpy-array intermediates of a loss evaluation; a reverse
sweep accumulates d(loss)/d(theta) into a flat parameter vector.  Spatial
derivatives (gradient and Hessian of a scalar field w.r.t. the input point)
are carried *forward* as extra array channels (a "jet"), built out of the
same tape ops, so the reverse sweep differentiates through them for free.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Tape",
    "Var",
    "ParamVector",
    "JetBatch",
    "seed_input_jets",
    "jet_affine",
    "jet_activation",
    "jet_add",
    "jet_mul",
    "reverse_gradient",
    "fd_gradient_oracle",
    "ACTIVATIONS",
]


class ConfigurationError(ValueError):
    """Raised on dimension/shape mismatches in user-supplied configuration."""


# ---------------------------------------------------------------------------
# parameter storage
# ---------------------------------------------------------------------------


@dataclass
class ParamVector:
    """Flat trainable parameter storage plus an architecture layout.

    ``layout`` is a list of ``(name, offset, shape)`` records whose extents
    are disjoint and cover ``[0, len(data))``.
    """

    data: np.ndarray
    layout: list[tuple[str, int, tuple[int, ...]]]

    def __post_init__(self):
        total = 0
        for _, offset, shape in self.layout:
            if offset != total:
                raise ConfigurationError("layout regions must be contiguous")
            total += int(np.prod(shape))
        if total != self.data.size:
            raise ConfigurationError(
                f"layout covers {total} entries, data has {self.data.size}"
            )

    @property
    def size(self) -> int:
        return self.data.size

    def view(self, name: str) -> np.ndarray:
        for nm, offset, shape in self.layout:
            if nm == name:
                n = int(np.prod(shape))
                return self.data[offset : offset + n].reshape(shape)
        raise KeyError(name)

    def copy(self) -> "ParamVector":
        return ParamVector(self.data.copy(), list(self.layout))


# ---------------------------------------------------------------------------
# activations: value and the first three derivatives
# ---------------------------------------------------------------------------


def _tanh_k(v: np.ndarray, k: int) -> np.ndarray:
    t = np.tanh(v)
    if k == 0:
        return t
    s = 1.0 - t * t
    if k == 1:
        return s
    if k == 2:
        return -2.0 * t * s
    if k == 3:
        return -2.0 * s * (1.0 - 3.0 * t * t)
    raise ValueError(k)


def _relu_k(v: np.ndarray, k: int) -> np.ndarray:
    pos = v > 0
    if k == 0:
        return np.where(pos, v, 0.0)
    if k == 1:
        return pos.astype(v.dtype)
    return np.zeros_like(v)


def _relu_cubed_k(v: np.ndarray, k: int) -> np.ndarray:
    # sigma(v) = max(v^3, 0); derivatives at 0 set to 0
    pos = v > 0
    if k == 0:
        return np.where(pos, v * v * v, 0.0)
    if k == 1:
        return np.where(pos, 3.0 * v * v, 0.0)
    if k == 2:
        return np.where(pos, 6.0 * v, 0.0)
    if k == 3:
        return np.where(pos, 6.0, 0.0)
    raise ValueError(k)


ACTIVATIONS: dict[str, Callable[[np.ndarray, int], np.ndarray]] = {
    "tanh": _tanh_k,
    "relu": _relu_k,
    "relu_cubed": _relu_cubed_k,
}


# ---------------------------------------------------------------------------
# tape
# ---------------------------------------------------------------------------


class Node:
    __slots__ = ("op", "value", "parents", "vjps", "grad", "param_offset")

    def __init__(self, op, value, parents=(), vjps=(), param_offset=None):
        self.op = op
        self.value = value
        self.parents = parents
        self.vjps = vjps
        self.grad = None
        self.param_offset = param_offset


class Tape:
    """Append-only DAG of array ops; creation order is topological order."""

    def __init__(self):
        self.nodes: list[Node] = []

    def _emit(self, node: Node) -> "Var":
        self.nodes.append(node)
        return Var(self, node)

    def constant(self, value) -> "Var":
        return self._emit(Node("constant", np.asarray(value, dtype=float)))

    def bind(self, params: ParamVector) -> dict[str, "Var"]:
        """Expose every layout region of ``params`` as a trainable leaf."""
        out = {}
        for name, offset, shape in params.layout:
            n = int(np.prod(shape))
            value = params.data[offset : offset + n].reshape(shape)
            out[name] = self._emit(Node("parameter", value, param_offset=offset))
        return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    g = np.asarray(g)
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


class Var:
    """Handle to a tape node; supports numpy-style arithmetic."""

    __slots__ = ("tape", "node")

    # keep numpy from elementwise-broadcasting over Var operands; binary ops
    # with ndarrays must fall through to the reflected Var methods
    __array_ufunc__ = None

    def __init__(self, tape: Tape, node: Node):
        self.tape = tape
        self.node = node

    @property
    def value(self) -> np.ndarray:
        return self.node.value

    @property
    def shape(self):
        return np.shape(self.node.value)

    def _lift(self, other) -> "Var":
        if isinstance(other, Var):
            return other
        return self.tape.constant(other)

    # -- elementwise arithmetic ------------------------------------------

    def __add__(self, other):
        o = self._lift(other)
        a, b = self.node, o.node
        out = a.value + b.value
        return self.tape._emit(
            Node(
                "add",
                out,
                (a, b),
                (
                    lambda g: _unbroadcast(g, np.shape(a.value)),
                    lambda g: _unbroadcast(g, np.shape(b.value)),
                ),
            )
        )

    __radd__ = __add__

    def __neg__(self):
        a = self.node
        return self.tape._emit(Node("neg", -a.value, (a,), (lambda g: -g,)))

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) + (-self)

    def __mul__(self, other):
        o = self._lift(other)
        a, b = self.node, o.node
        out = a.value * b.value
        return self.tape._emit(
            Node(
                "mul",
                out,
                (a, b),
                (
                    lambda g: _unbroadcast(g * b.value, np.shape(a.value)),
                    lambda g: _unbroadcast(g * a.value, np.shape(b.value)),
                ),
            )
        )

    __rmul__ = __mul__

    def reciprocal(self) -> "Var":
        a = self.node
        inv = 1.0 / a.value
        return self.tape._emit(
            Node("reciprocal", inv, (a,), (lambda g: -g * inv * inv,))
        )

    def __truediv__(self, other):
        return self * self._lift(other).reciprocal()

    def __rtruediv__(self, other):
        return self._lift(other) * self.reciprocal()

    def __pow__(self, n):
        if not isinstance(n, (int, float)):
            raise TypeError("exponent must be a number")
        a = self.node
        out = a.value**n
        return self.tape._emit(
            Node("power", out, (a,), (lambda g: g * n * a.value ** (n - 1),))
        )

    def square(self) -> "Var":
        a = self.node
        return self.tape._emit(
            Node("square", a.value * a.value, (a,), (lambda g: g * 2.0 * a.value,))
        )

    def abs(self) -> "Var":
        # subgradient at 0 chosen as 0 (symmetric choice)
        a = self.node
        s = np.sign(a.value)
        return self.tape._emit(Node("abs", np.abs(a.value), (a,), (lambda g: g * s,)))

    def activation(self, kind: str, order: int = 0) -> "Var":
        """Apply the ``order``-th derivative of activation ``kind``.

        The local partial of ``sigma^(k)`` is ``sigma^(k+1)``, so jets built
        from these nodes stay differentiable w.r.t. parameters.
        """
        fn = ACTIVATIONS[kind]
        a = self.node
        out = fn(a.value, order)
        deriv = fn(a.value, order + 1)
        return self.tape._emit(Node("activation", out, (a,), (lambda g: g * deriv,)))

    # -- shape / reduction ------------------------------------------------

    def reshape(self, shape) -> "Var":
        a = self.node
        orig = np.shape(a.value)
        return self.tape._emit(
            Node(
                "reshape",
                np.reshape(a.value, shape),
                (a,),
                (lambda g: np.reshape(g, orig),),
            )
        )

    def sum(self, axis=None) -> "Var":
        a = self.node
        orig = np.shape(a.value)
        out = np.sum(a.value, axis=axis)

        def vjp(g):
            if axis is None:
                return np.broadcast_to(g, orig).copy()
            return np.broadcast_to(np.expand_dims(g, axis), orig).copy()

        return self.tape._emit(Node("sum", out, (a,), (vjp,)))

    def mean(self, axis=None) -> "Var":
        n = self.value.size if axis is None else self.shape[axis]
        return self.sum(axis=axis) * (1.0 / n)

    def trace_last2(self) -> "Var":
        """Trace over the last two axes (Laplacian from a Hessian channel)."""
        a = self.node
        d = np.shape(a.value)[-1]
        eye = np.eye(d)
        out = np.trace(a.value, axis1=-2, axis2=-1)

        def vjp(g):
            return np.asarray(g)[..., None, None] * eye

        return self.tape._emit(Node("trace", out, (a,), (vjp,)))


def matapply(W: Var, x: Var) -> Var:
    """Contract a matrix ``W (n, m)`` against axis 1 of ``x (B, m, ...)``.

    Applies the linear layer to every batch entry and every trailing jet
    channel at once.
    """
    a, b = W.node, x.node
    if np.shape(a.value)[1] != np.shape(b.value)[1]:
        raise ConfigurationError(
            f"matapply: W is {np.shape(a.value)}, x has axis-1 extent "
            f"{np.shape(b.value)[1]}"
        )
    x_shape = np.shape(b.value)
    B, m = x_shape[:2]
    n = np.shape(a.value)[0]
    trailing = x_shape[2:]
    xr = np.reshape(b.value, (B, m, -1))
    out = np.reshape(np.matmul(a.value, xr), (B, n) + trailing)

    def vjp_w(g):
        # sum over the batch and all trailing jet channels
        gr = np.reshape(g, (B, n, -1))
        return np.tensordot(gr, xr, axes=([0, 2], [0, 2]))

    def vjp_x(g):
        gr = np.reshape(g, (B, n, -1))
        return np.reshape(np.matmul(a.value.T, gr), x_shape)

    return W.tape._emit(Node("affine", out, (a, b), (vjp_w, vjp_x)))


def reverse_gradient(loss: Var, params: ParamVector) -> np.ndarray:
    """Reverse sweep: d(loss)/d(theta_i) for every flat coordinate ``i``."""
    root = loss.node
    if np.ndim(root.value) != 0:
        raise ValueError("reverse_gradient requires a scalar loss node")
    tape = loss.tape
    for node in tape.nodes:
        node.grad = None
    root.grad = np.asarray(1.0)
    grad = np.zeros(params.size)
    for node in reversed(tape.nodes):
        if node.grad is None:
            continue
        if node.op == "parameter":
            flat = np.asarray(node.grad).ravel()
            grad[node.param_offset : node.param_offset + flat.size] += flat
            continue
        for parent, vjp in zip(node.parents, node.vjps):
            contrib = vjp(node.grad)
            if parent.grad is None:
                parent.grad = np.asarray(contrib, dtype=float).copy()
            else:
                parent.grad = parent.grad + contrib
    return grad


def fd_gradient_oracle(
    loss_fn: Callable[[ParamVector], float], params: ParamVector, step: float
) -> np.ndarray:
    """Central finite differences of ``loss_fn`` over every coordinate."""
    if step <= 0:
        raise ValueError("step must be positive")
    grad = np.zeros(params.size)
    work = params.copy()
    for i in range(params.size):
        orig = work.data[i]
        work.data[i] = orig + step
        fp = loss_fn(work)
        work.data[i] = orig - step
        fm = loss_fn(work)
        work.data[i] = orig
        grad[i] = (fp - fm) / (2.0 * step)
    return grad


# ---------------------------------------------------------------------------
# spatial jets
# ---------------------------------------------------------------------------


@dataclass
class JetBatch:
    """Value, spatial gradient and spatial Hessian of a batch of fields.

    Channel shapes: ``value (B, n)``, ``grad (B, n, d)``, ``hess (B, n, d, d)``
    where ``n`` is the number of scalar components (network width, or 1 for
    the final output).  The Hessian stays symmetric by construction: every
    op below maps symmetric Hessians to symmetric Hessians.
    """

    value: Var
    grad: Var
    hess: Var

    @property
    def dim(self) -> int:
        return self.grad.shape[-1]

    def laplacian(self) -> Var:
        return self.hess.trace_last2()


def seed_input_jets(tape: Tape, x: np.ndarray) -> JetBatch:
    """Jets of the coordinate functions at points ``x (B, d)``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    B, d = x.shape
    grad = np.broadcast_to(np.eye(d), (B, d, d)).copy()
    hess = np.zeros((B, d, d, d))
    return JetBatch(tape.constant(x), tape.constant(grad), tape.constant(hess))


def jet_affine(W: Var, b: Var | None, jets: JetBatch) -> JetBatch:
    """Linear layer on jets: all channels transform linearly."""
    value = matapply(W, jets.value)
    if b is not None:
        value = value + b
    return JetBatch(value, matapply(W, jets.grad), matapply(W, jets.hess))


def jet_activation(kind: str, jets: JetBatch) -> JetBatch:
    """Chain rule through a pointwise activation:

    value = sigma(v), grad = sigma'(v) g, hess = sigma'(v) H + sigma''(v) g g^T.
    """
    s0 = jets.value.activation(kind, 0)
    s1 = jets.value.activation(kind, 1)
    s2 = jets.value.activation(kind, 2)
    B, n = jets.value.shape
    d = jets.dim
    g_col = jets.grad.reshape((B, n, d, 1))
    g_row = jets.grad.reshape((B, n, 1, d))
    grad = s1.reshape((B, n, 1)) * jets.grad
    hess = s1.reshape((B, n, 1, 1)) * jets.hess + s2.reshape((B, n, 1, 1)) * (
        g_col * g_row
    )
    return JetBatch(s0, grad, hess)


def jet_add(a: JetBatch, b: JetBatch) -> JetBatch:
    return JetBatch(a.value + b.value, a.grad + b.grad, a.hess + b.hess)


def jet_mul(a: JetBatch, b: JetBatch) -> JetBatch:
    """Leibniz rule on jets (used for the boundary-factor product)."""
    B, n = a.value.shape
    d = a.dim
    av = a.value.reshape((B, n, 1))
    bv = b.value.reshape((B, n, 1))
    grad = av * b.grad + bv * a.grad
    ga_col = a.grad.reshape((B, n, d, 1))
    gb_row = b.grad.reshape((B, n, 1, d))
    gb_col = b.grad.reshape((B, n, d, 1))
    ga_row = a.grad.reshape((B, n, 1, d))
    cross = ga_col * gb_row + gb_col * ga_row
    hess = (
        a.value.reshape((B, n, 1, 1)) * b.hess
        + b.value.reshape((B, n, 1, 1)) * a.hess
        + cross
    )
    return JetBatch(a.value * b.value, grad, hess)
