"""Adam training loop for the Monte-Carlo losses and eigenvalue evaluation.

One "epoch" is one Adam step on freshly sampled batches; with no dataset to
cycle through, resampling per step is the natural reading of the
expectation-minimization objective.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .autodiff import ParamVector, Tape, reverse_gradient
from .domain import ProblemDomain, sample_uniform
from .fem import Mesh
from .losses import (
    FrictionJ2,
    GpEigenJ5,
    LinearEigenJ3,
    LsmSemilinear,
    RitzLinear,
    build_loss,
    with_boundary_factor,
)
from .network import NetworkConfig, network_jets

__all__ = [
    "TrainConfig",
    "TrainedModel",
    "TrainingDiverged",
    "train",
    "model_field_values",
    "network_eigenvalue",
    "rayleigh_quadrature",
    "gp_eigenvalue_quadrature",
]


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, value: float):
        super().__init__(f"non-finite loss at epoch {epoch}: {value}")
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch_interior: int = 512
    batch_boundary: int = 512
    epochs: int = 200
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.batch_interior < 1 or self.batch_boundary < 1:
            raise ValueError("batch sizes must be >= 1")


@dataclass
class TrainedModel:
    config: NetworkConfig
    params: ParamVector
    spec: object
    loss_history: np.ndarray
    wall_time: float

    def value_fn(self, domain: ProblemDomain):
        """Scalar field evaluator (boundary factor included for eigen specs)."""

        def fn(x):
            v, _, _ = model_field_values(self.params, self.config, self.spec, domain, x)
            return v

        return fn


def _uses_boundary_factor(spec) -> bool:
    if isinstance(spec, GpEigenJ5):
        return True
    if isinstance(spec, LinearEigenJ3):
        return spec.use_boundary_factor
    return False


def _draw_batches(spec, domain: ProblemDomain, tc: TrainConfig, rng) -> dict:
    if isinstance(spec, (LsmSemilinear, RitzLinear)):
        piece = domain.piece("boundary")
        if piece.points is not None:
            xb = piece.as_points()  # 1D: evaluate the endpoints exactly
        else:
            xb = sample_uniform(piece, tc.batch_boundary, rng)
        return {
            "interior": sample_uniform(domain, tc.batch_interior, rng),
            "boundary": xb,
        }
    if isinstance(spec, FrictionJ2):
        return {
            "interior": sample_uniform(domain, tc.batch_interior, rng),
            "gamma_c": sample_uniform(domain.piece("gamma_c"), tc.batch_boundary, rng),
            "gamma_d": sample_uniform(domain.piece("gamma_d"), tc.batch_boundary, rng),
        }
    if isinstance(spec, LinearEigenJ3):
        # numerator and denominator of the Rayleigh ratio share one batch:
        # the shared-batch estimator keeps the ratio scale-invariant and its
        # gradient variance far below the independent-batch variant
        x = sample_uniform(domain, tc.batch_interior, rng)
        return {"xi": x, "eta": x}
    if isinstance(spec, GpEigenJ5):
        x = sample_uniform(domain, tc.batch_interior, rng)
        return {"xi": x, "eta": x, "zeta": x}
    raise TypeError(f"unknown loss spec {type(spec).__name__}")


def evaluate_loss(
    params: ParamVector, config: NetworkConfig, spec, domain: ProblemDomain, batches
):
    """Build the loss tape once; returns the scalar Var (for value or grad)."""
    tape = Tape()
    theta = tape.bind(params)
    net = lambda x: network_jets(theta, config, x)
    fld = with_boundary_factor(tape, net, domain) if _uses_boundary_factor(spec) else net
    return build_loss(fld, spec, domain, batches)


def train(
    config: NetworkConfig, spec, domain: ProblemDomain, tc: TrainConfig,
    params: ParamVector | None = None,
) -> TrainedModel:
    """Run ``tc.epochs`` Adam steps; deterministic given seeds."""
    from .network import init_network

    t0 = time.perf_counter()
    params = params.copy() if params is not None else init_network(config)
    rng = np.random.default_rng(tc.seed)
    m = np.zeros(params.size)
    v = np.zeros(params.size)
    history = np.zeros(tc.epochs)
    for epoch in range(tc.epochs):
        batches = _draw_batches(spec, domain, tc, rng)
        loss = evaluate_loss(params, config, spec, domain, batches)
        value = float(loss.value)
        if not np.isfinite(value):
            raise TrainingDiverged(epoch, value)
        history[epoch] = value
        g = reverse_gradient(loss, params)
        t = epoch + 1
        m = tc.beta1 * m + (1.0 - tc.beta1) * g
        v = tc.beta2 * v + (1.0 - tc.beta2) * g * g
        mhat = m / (1.0 - tc.beta1**t)
        vhat = v / (1.0 - tc.beta2**t)
        params.data -= tc.lr * mhat / (np.sqrt(vhat) + tc.eps)
    return TrainedModel(config, params, spec, history, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# evaluation of the trained field and its eigenvalue
# ---------------------------------------------------------------------------


def model_field_values(
    params: ParamVector,
    config: NetworkConfig,
    spec,
    domain: ProblemDomain,
    x: np.ndarray,
    chunk: int = 8192,
):
    """Value and spatial gradient (and Laplacian) of the trained field at x.

    The boundary factor is applied when the loss spec trained with one.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = config.input_dim
    vals, grads, laps = [], [], []
    use_b = _uses_boundary_factor(spec)
    for start in range(0, len(x), chunk):
        pts = x[start : start + chunk]
        tape = Tape()
        theta = tape.bind(params)
        net = lambda p: network_jets(theta, config, p)
        fld = with_boundary_factor(tape, net, domain) if use_b else net
        jets = fld(pts)
        B = len(pts)
        vals.append(jets.value.value.reshape(B))
        grads.append(jets.grad.value.reshape(B, d))
        laps.append(np.trace(jets.hess.value.reshape(B, d, d), axis1=1, axis2=2))
    return np.concatenate(vals), np.concatenate(grads), np.concatenate(laps)


def rayleigh_quadrature(value_fn, grad_fn, mesh: Mesh, p, q) -> float:
    """Composite-quadrature Rayleigh quotient (p |grad u|^2 + q u^2) / u^2."""
    E, nq, d = mesh.quad_points.shape
    pts = mesh.quad_points.reshape(E * nq, d)
    w = mesh.quad_weights.reshape(E * nq)
    u = np.asarray(value_fn(pts)).reshape(-1)
    gu = np.asarray(grad_fn(pts)).reshape(-1, d)
    num = float(np.sum(w * (p(pts) * (gu**2).sum(axis=1) + q(pts) * u * u)))
    den = float(np.sum(w * u * u))
    if den <= 1e-30:
        raise ZeroDivisionError("degenerate field: zero L2 norm")
    return num / den


def gp_eigenvalue_quadrature(value_fn, grad_fn, mesh: Mesh, V, beta) -> float:
    """GP eigenvalue of the normalized field: with w = u/||u||,
    lambda = int(|grad w|^2 + V w^2) + beta int(w^4)."""
    E, nq, d = mesh.quad_points.shape
    pts = mesh.quad_points.reshape(E * nq, d)
    w = mesh.quad_weights.reshape(E * nq)
    u = np.asarray(value_fn(pts)).reshape(-1)
    gu = np.asarray(grad_fn(pts)).reshape(-1, d)
    i2 = float(np.sum(w * u * u))
    if i2 <= 1e-30:
        raise ZeroDivisionError("degenerate field: zero L2 norm")
    ig = float(np.sum(w * ((gu**2).sum(axis=1) + V(pts) * u * u)))
    i4 = float(np.sum(w * u**4))
    return ig / i2 + beta * i4 / (i2 * i2)


def network_eigenvalue(model: TrainedModel, domain: ProblemDomain, mesh: Mesh) -> float:
    """Eigenvalue of the trained eigen model by quadrature on a test mesh."""

    def value_fn(x):
        return model_field_values(model.params, model.config, model.spec, domain, x)[0]

    def grad_fn(x):
        return model_field_values(model.params, model.config, model.spec, domain, x)[1]

    if isinstance(model.spec, LinearEigenJ3):
        return rayleigh_quadrature(value_fn, grad_fn, mesh, model.spec.p, model.spec.q)
    if isinstance(model.spec, GpEigenJ5):
        return gp_eigenvalue_quadrature(
            value_fn, grad_fn, mesh, model.spec.V, model.spec.beta
        )
    raise TypeError("network_eigenvalue requires an eigen loss spec")
