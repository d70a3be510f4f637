"""Mesh-refinement phase: Newton, power-iteration and baseline solvers.

All solvers consume an initial interior-coefficient vector (typically the
nodal interpolation of a trained network) and emit an IterationReport with
the relative-update history e_k = ||u_{k+1} - u_k||_0 / ||u_k||_0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import ProblemDomain
from .fem import (
    Mesh,
    assemble_load,
    assemble_weighted_mass,
    build_mesh,
    p1_eval,
    p1_values_at_quad,
)
from .linalg import CsrMatrix

__all__ = [
    "SolverConfig",
    "IterationReport",
    "newton_semilinear",
    "picard_semilinear",
    "two_grid_semilinear",
    "power_eigen",
    "newton_nonlinear_eigen",
]

DIVERGENCE_THRESHOLD = 1e8  # large enough to report blow-ups before aborting


@dataclass(frozen=True)
class SolverConfig:
    eps: float
    n_max: int
    renormalize: bool = False  # power iteration only

    def __post_init__(self):
        if self.eps <= 0 or self.n_max < 1:
            raise ValueError("need eps > 0 and n_max >= 1")


@dataclass
class IterationReport:
    iterations: int
    e_history: list
    u: np.ndarray
    converged: bool
    diverged: bool = False
    stability_warning: bool = False
    lam_history: list = field(default_factory=list)
    mu_history: list = field(default_factory=list)
    residual_norm: float | None = None
    coarse: "IterationReport | None" = None

    @property
    def lam(self):
        return self.lam_history[-1] if self.lam_history else None


def _rel_update(M: CsrMatrix, u_new: np.ndarray, u_old: np.ndarray) -> float:
    diff = u_new - u_old
    num = np.sqrt(max(diff @ M.matvec(diff), 0.0))
    den = np.sqrt(max(u_old @ M.matvec(u_old), 0.0))
    # zero iterates (e.g. a cold start at 0) fall back to the absolute update
    return float(num / den) if den > 0 else float(num)


def _quad_xu(mesh: Mesh, u: np.ndarray):
    E, nq, d = mesh.quad_points.shape
    x = mesh.quad_points.reshape(E * nq, d)
    uq = p1_values_at_quad(mesh, u).reshape(E * nq)
    return x, uq


def newton_semilinear(mesh: Mesh, f, fprime, u0: np.ndarray, cfg: SolverConfig) -> IterationReport:
    """Newton iteration for -lap(u) + f(x, u) = 0 with Dirichlet data.

    Each step solves (grad v, grad chi) + (f'(u_k) v, chi) =
    -(grad u_k, grad chi) - (f(u_k), chi) and updates u_{k+1} = u_k + v.
    """
    A = mesh.stiffness()
    M = mesh.mass()
    E, nq, _ = mesh.quad_points.shape
    u = np.asarray(u0, dtype=float).copy()
    e_hist = [1.0]
    k = 0
    diverged = False
    while e_hist[-1] > cfg.eps and k < cfg.n_max:
        x, uq = _quad_xu(mesh, u)
        J = A + assemble_weighted_mass(mesh, np.asarray(fprime(x, uq)).reshape(E, nq))
        rhs = -A.matvec(u) - assemble_load(mesh, np.asarray(f(x, uq)).reshape(E, nq))
        v = J.lu().solve(rhs)
        u_new = u + v
        e = _rel_update(M, u_new, u)
        e_hist.append(e)
        u = u_new
        k += 1
        if not np.isfinite(e) or e > DIVERGENCE_THRESHOLD:
            diverged = True
            break
    return IterationReport(
        iterations=k,
        e_history=e_hist,
        u=u,
        converged=bool(np.isfinite(e_hist[-1]) and e_hist[-1] <= cfg.eps),
        diverged=diverged,
    )


def picard_semilinear(mesh: Mesh, f, u0: np.ndarray, cfg: SolverConfig) -> IterationReport:
    """Frozen-nonlinearity fixed point: solve lap-part with f(u_k) as data."""
    A = mesh.stiffness()
    M = mesh.mass()
    E, nq, _ = mesh.quad_points.shape
    u = np.asarray(u0, dtype=float).copy()
    e_hist = [1.0]
    k = 0
    diverged = False
    while e_hist[-1] > cfg.eps and k < cfg.n_max:
        x, uq = _quad_xu(mesh, u)
        with np.errstate(all="ignore"):
            fq = np.asarray(f(x, uq), dtype=float).reshape(E, nq)
        if not np.all(np.isfinite(fq)):
            e_hist.append(float("nan"))
            u = np.full_like(u, np.nan)
            diverged = True
            k += 1
            break
        u_new = A.lu().solve(-assemble_load(mesh, fq))
        e = _rel_update(M, u_new, u)
        e_hist.append(e)
        u = u_new
        k += 1
        if not np.isfinite(e):
            diverged = True
            break
    return IterationReport(
        iterations=k,
        e_history=e_hist,
        u=u,
        converged=bool(np.isfinite(e_hist[-1]) and e_hist[-1] <= cfg.eps),
        diverged=diverged,
    )


def two_grid_semilinear(
    domain: ProblemDomain,
    f,
    fprime,
    H: float,
    h: float,
    u0H: np.ndarray,
    cfg: SolverConfig,
) -> IterationReport:
    """Newton to convergence on the coarse mesh, prolong, one fine correction."""
    if not H > h:
        raise ValueError("coarse mesh size H must exceed fine mesh size h")
    mesh_H = build_mesh(domain, H)
    mesh_h = build_mesh(domain, h)
    coarse_cfg = SolverConfig(eps=0.01 * H * H, n_max=cfg.n_max)
    coarse = newton_semilinear(mesh_H, f, fprime, u0H, coarse_cfg)
    if coarse.diverged or not np.all(np.isfinite(coarse.u)):
        report = IterationReport(
            iterations=coarse.iterations,
            e_history=list(coarse.e_history),
            u=np.full(mesh_h.n_interior, np.nan),
            converged=False,
            diverged=True,
        )
        report.coarse = coarse
        return report
    u0h = p1_eval(mesh_H, coarse.u, mesh_h.vertices[mesh_h.interior])
    fine = newton_semilinear(mesh_h, f, fprime, u0h, SolverConfig(eps=cfg.eps, n_max=1))
    fine.coarse = coarse
    return fine


def power_eigen(mesh: Mesh, u0: np.ndarray, cfg: SolverConfig, V=None) -> IterationReport:
    """Inverse power iteration for -lap(u) [+ V u] = lambda u, Rayleigh-accelerated.

    Expects a normalized start (||u0||_0 = 1).  Iterates are not
    renormalized inside the loop unless ``cfg.renormalize`` is set; a
    stability flag is raised when ||u_k||_0 leaves [1e-6, 1e6].
    """
    A = mesh.stiffness()
    if V is not None:
        A = A + assemble_weighted_mass(mesh, V)
    M = mesh.mass()

    def rayleigh(u):
        return float((u @ A.matvec(u)) / (u @ M.matvec(u)))

    u = np.asarray(u0, dtype=float).copy()
    lam_hist = [rayleigh(u)]
    e_hist = [1.0]
    k = 0
    stability = False
    while e_hist[-1] > cfg.eps and k < cfg.n_max:
        from .linalg import solve_spd

        if V is None:
            u_new = solve_spd(A, lam_hist[-1] * M.matvec(u))
        else:
            # the potential can push the spectrum negative, where plain
            # inverse iteration locks onto the smallest-magnitude mode;
            # shift by the running Rayleigh quotient to stay on the lowest
            shift = lam_hist[-1] - 1.0
            u_new = (A - M.scale(shift)).lu().solve(M.matvec(u))
        lam_hist.append(rayleigh(u_new))
        e_hist.append(_rel_update(M, u_new, u))
        if cfg.renormalize:
            u_new = u_new / np.sqrt(u_new @ M.matvec(u_new))
        u = u_new
        k += 1
        norm = np.sqrt(u @ M.matvec(u))
        if not 1e-6 <= norm <= 1e6:
            stability = True
            break
    return IterationReport(
        iterations=k,
        e_history=e_hist,
        u=u,
        converged=bool(e_hist[-1] <= cfg.eps),
        stability_warning=stability,
        lam_history=lam_hist,
    )


def newton_nonlinear_eigen(
    mesh: Mesh, V, beta: float, u0: np.ndarray, cfg: SolverConfig
) -> IterationReport:
    """Constrained Newton iteration for -lap(u) + V u + beta u^3 = lambda u.

    Each step solves the bordered system with constraint
    2 (v_k, u_k) = 1 - (u_k, u_k), updating both u and lambda.
    Expects a normalized start.
    """
    from .linalg import solve_bordered

    A_V = mesh.stiffness() + assemble_weighted_mass(mesh, V)
    M = mesh.mass()

    def cubic_load(u):
        uq = p1_values_at_quad(mesh, u)
        return assemble_load(mesh, beta * uq**3)

    u = np.asarray(u0, dtype=float).copy()
    lam = float(u @ A_V.matvec(u) + u @ cubic_load(u))
    lam_hist = [lam]
    mu_hist: list = []
    e_hist = [1.0]
    k = 0
    diverged = False
    while e_hist[-1] > cfg.eps and k < cfg.n_max:
        uq = p1_values_at_quad(mesh, u)
        K = A_V + assemble_weighted_mass(mesh, 3.0 * beta * uq**2) - M.scale(lam)
        m = M.matvec(u)
        rhs = -A_V.matvec(u) - cubic_load(u) + lam * m
        s = 1.0 - float(u @ m)
        v, mu = solve_bordered(K, m, rhs, s)
        u_new = u + v
        lam = lam + mu
        lam_hist.append(lam)
        mu_hist.append(mu)
        e = _rel_update(M, u_new, u)
        e_hist.append(e)
        u = u_new
        k += 1
        if not np.isfinite(e) or e > DIVERGENCE_THRESHOLD:
            diverged = True
            break
    res = A_V.matvec(u) + cubic_load(u) - lam * M.matvec(u)
    return IterationReport(
        iterations=k,
        e_history=e_hist,
        u=u,
        converged=bool(np.isfinite(e_hist[-1]) and e_hist[-1] <= cfg.eps),
        diverged=diverged,
        lam_history=lam_hist,
        mu_history=mu_hist,
        residual_norm=float(np.linalg.norm(res)),
    )
