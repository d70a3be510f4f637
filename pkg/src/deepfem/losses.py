"""The five Monte-Carlo loss functionals of Phase I.

Every loss builder takes a *field*: a callable mapping points ``(B, d)`` to
a :class:`~deepfem.autodiff.JetBatch` living on an autodiff tape.  For a
network the field is a closure over bound parameters; tests also pass
frozen closed-form fields wrapped as tape constants.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .autodiff import JetBatch, Tape, Var
from .domain import ProblemDomain, boundary_factor_jets

__all__ = [
    "LsmSemilinear",
    "RitzLinear",
    "FrictionJ2",
    "LinearEigenJ3",
    "GpEigenJ5",
    "DegenerateNetworkError",
    "constant_field",
    "frozen_field",
    "with_boundary_factor",
    "loss_lsm",
    "loss_ritz_linear",
    "loss_friction_j2",
    "loss_eigen_j3",
    "loss_gp_j5",
    "build_loss",
]


class DegenerateNetworkError(RuntimeError):
    """The eigen-loss denominator collapsed (network numerically zero)."""


Field = Callable[[np.ndarray], JetBatch]
Scalar = Callable[[np.ndarray], np.ndarray]


# -- loss specifications (tagged union) -------------------------------------


@dataclass(frozen=True)
class LsmSemilinear:
    """Squared-residual loss for -div(p grad u) + nonlinearity(x, u) = source.

    With the default ``p is None`` the principal part is the plain Laplacian;
    otherwise the residual uses -p(x) lap(u) - grad p(x) . grad(u), so
    ``p_grad`` must be supplied alongside ``p``.
    """

    source: Scalar
    nonlinearity: Callable[[Var, np.ndarray], Var]
    gamma: float
    boundary_g: Scalar | None = None  # None means homogeneous Dirichlet data
    p: Scalar | None = None
    p_grad: Callable | None = None  # (B, d) gradient of p

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if (self.p is None) != (self.p_grad is None):
            raise ValueError("p and p_grad must be supplied together")


@dataclass(frozen=True)
class RitzLinear:
    """Energy of -(p u')' + q u = f with a Dirichlet boundary penalty."""

    p: Scalar
    q: Scalar
    f: Scalar
    gamma: float

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")


@dataclass(frozen=True)
class FrictionJ2:
    """Penalized friction-problem energy: -lap(u) + u = f with |u| term."""

    f: Scalar
    g: Scalar
    gamma: float

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")


@dataclass(frozen=True)
class LinearEigenJ3:
    """Rayleigh-quotient loss for the smallest eigenpair of -(p u')' + q u."""

    p: Scalar
    q: Scalar
    gamma: float
    x0: tuple
    use_boundary_factor: bool = True

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")


@dataclass(frozen=True)
class GpEigenJ5:
    """Ground-state loss for -lap(u) + V u + beta u^3 = lambda u."""

    V: Scalar
    beta: float
    gamma: float
    x0: tuple

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")


# -- field helpers -----------------------------------------------------------


def frozen_field(tape: Tape, value: Scalar, grad: Callable, hess: Callable) -> Field:
    """Wrap closed-form value/grad/hess callables as a constant jet field."""

    def field(x: np.ndarray) -> JetBatch:
        x = np.atleast_2d(x)
        B, d = x.shape
        return JetBatch(
            tape.constant(np.asarray(value(x)).reshape(B, 1)),
            tape.constant(np.asarray(grad(x)).reshape(B, 1, d)),
            tape.constant(np.asarray(hess(x)).reshape(B, 1, d, d)),
        )

    return field


def constant_field(tape: Tape, value: Scalar) -> Field:
    """Frozen field for tests that only exercise the value channel."""

    def zero_grad(x):
        x = np.atleast_2d(x)
        return np.zeros((x.shape[0], x.shape[1]))

    def zero_hess(x):
        x = np.atleast_2d(x)
        return np.zeros((x.shape[0], x.shape[1], x.shape[1]))

    return frozen_field(tape, value, zero_grad, zero_hess)


def with_boundary_factor(tape: Tape, field: Field, domain: ProblemDomain) -> Field:
    """Multiply a field by the boundary factor so it vanishes on the boundary."""
    from .autodiff import jet_mul

    def wrapped(x: np.ndarray) -> JetBatch:
        return jet_mul(boundary_factor_jets(tape, x, domain), field(x))

    return wrapped


def _sq_grad(jets: JetBatch) -> Var:
    """|grad phi|^2 with shape (B, 1)."""
    return jets.grad.square().sum(axis=2)


def _flat(x: np.ndarray) -> np.ndarray:
    return np.asarray(x).reshape(-1, 1)


# -- the five losses ---------------------------------------------------------


def loss_lsm(field: Field, spec: LsmSemilinear, domain: ProblemDomain, batches) -> Var:
    xi, xb = batches["interior"], batches["boundary"]
    jets = field(xi)
    if spec.p is None:
        principal = -jets.laplacian()
    else:
        B, d = np.atleast_2d(xi).shape
        pg = np.asarray(spec.p_grad(xi)).reshape(B, 1, d)
        principal = -(_flat(spec.p(xi)) * jets.laplacian()) - (pg * jets.grad).sum(
            axis=2
        )
    resid = principal + spec.nonlinearity(jets.value, xi) - _flat(spec.source(xi))
    loss = resid.square().mean()
    phi_b = field(xb).value
    if spec.boundary_g is not None:
        phi_b = phi_b - _flat(spec.boundary_g(xb))
    return loss + spec.gamma * phi_b.square().mean()


def loss_ritz_linear(field: Field, spec: RitzLinear, domain: ProblemDomain, batches) -> Var:
    xi, xb = batches["interior"], batches["boundary"]
    jets = field(xi)
    v = jets.value
    energy = (
        0.5 * (_flat(spec.p(xi)) * _sq_grad(jets) + _flat(spec.q(xi)) * v.square())
        - _flat(spec.f(xi)) * v
    )
    interior = domain.measure * energy.mean()
    phi_b = field(xb).value
    return interior + spec.gamma * phi_b.square().mean()


def loss_friction_j2(field: Field, spec: FrictionJ2, domain: ProblemDomain, batches) -> Var:
    xi = batches["interior"]
    xc = batches["gamma_c"]
    xd = batches["gamma_d"]
    jets = field(xi)
    v = jets.value
    energy = 0.5 * (_sq_grad(jets) + v.square()) - _flat(spec.f(xi)) * v
    interior = domain.measure * energy.mean()
    phi_c = field(xc).value
    friction = domain.piece("gamma_c").measure * (_flat(spec.g(xc)) * phi_c.abs()).mean()
    phi_d = field(xd).value
    dirichlet = domain.piece("gamma_d").measure * (spec.gamma * phi_d.square()).mean()
    return interior + friction + dirichlet


def _ratio_j3(field: Field, p: Scalar, q: Scalar, xi, eta) -> Var:
    jets = field(xi)
    num = (_flat(p(xi)) * _sq_grad(jets) + _flat(q(xi)) * jets.value.square()).mean()
    den = field(eta).value.square().mean()
    if den.value <= 1e-30:
        raise DegenerateNetworkError("eigen-loss denominator underflow")
    return num / den


def _point_penalty(field: Field, gamma: float, x0) -> Var:
    phi0 = field(np.atleast_2d(x0)).value.sum()
    return gamma * (phi0 - 1.0).square()


def loss_eigen_j3(field: Field, spec: LinearEigenJ3, domain: ProblemDomain, batches) -> Var:
    ratio = _ratio_j3(field, spec.p, spec.q, batches["xi"], batches["eta"])
    return ratio + _point_penalty(field, spec.gamma, spec.x0)


def loss_gp_j5(field: Field, spec: GpEigenJ5, domain: ProblemDomain, batches) -> Var:
    xi, eta, zeta = batches["xi"], batches["eta"], batches["zeta"]
    jets = field(xi)
    phi2_xi = jets.value.square()
    num1 = (_sq_grad(jets) + _flat(spec.V(xi)) * phi2_xi).mean()
    den1 = field(eta).value.square().mean()
    if den1.value <= 1e-30:
        raise DegenerateNetworkError("eigen-loss denominator underflow")
    ratio1 = num1 / den1
    num2 = (phi2_xi.square()).mean()
    den2 = den1 * field(zeta).value.square().mean()
    ratio2 = (spec.beta / (2.0 * domain.measure)) * (num2 / den2)
    return ratio1 + ratio2 + _point_penalty(field, spec.gamma, spec.x0)


_LOSS_DISPATCH = {
    LsmSemilinear: loss_lsm,
    RitzLinear: loss_ritz_linear,
    FrictionJ2: loss_friction_j2,
    LinearEigenJ3: loss_eigen_j3,
    GpEigenJ5: loss_gp_j5,
}


def build_loss(field: Field, spec, domain: ProblemDomain, batches) -> Var:
    return _LOSS_DISPATCH[type(spec)](field, spec, domain, batches)
