"""Uniform P1 meshes, matrix assembly, nodal interpolation and norms.

1D meshes are uniform subdivisions of an interval; 2D meshes are uniform
grids of squares split into two right triangles each.  Dirichlet data is
handled by interior-dof elimination: assembled operators and coefficient
vectors live on interior vertices only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .autodiff import ConfigurationError
from .domain import ProblemDomain
from .linalg import CsrMatrix

__all__ = [
    "Mesh",
    "build_mesh",
    "assemble_stiffness",
    "assemble_weighted_mass",
    "assemble_load",
    "interpolate_at_nodes",
    "p1_values_at_quad",
    "p1_eval",
    "l2_norm",
    "h1_seminorm",
    "max_node_error",
    "max_node_norm",
]

_GAUSS_1D = (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0))  # on [0, 1]


@dataclass
class Mesh:
    dim: int
    h: float
    bounds: tuple
    vertices: np.ndarray  # (V, d)
    elements: np.ndarray  # (E, d+1) vertex indices
    interior: np.ndarray  # interior vertex indices (Dirichlet elimination)
    vertex_to_dof: np.ndarray  # (V,) interior dof index or -1
    quad_points: np.ndarray  # (E, nq, d)
    quad_weights: np.ndarray  # (E, nq) global weights
    basis_at_quad: np.ndarray  # (nq, d+1) reference P1 values
    grads: np.ndarray  # (E, d+1, d) constant P1 gradients per element
    _mass: CsrMatrix | None = field(default=None, repr=False)
    _stiff: CsrMatrix | None = field(default=None, repr=False)

    @property
    def n_interior(self) -> int:
        return len(self.interior)

    def to_full(self, v: np.ndarray) -> np.ndarray:
        """Coefficient vector over all vertices, zero on the boundary."""
        full = np.zeros(len(self.vertices))
        full[self.interior] = v
        return full

    def mass(self) -> CsrMatrix:
        if self._mass is None:
            self._mass = assemble_weighted_mass(self, lambda x: np.ones(len(x)))
        return self._mass

    def stiffness(self) -> CsrMatrix:
        if self._stiff is None:
            self._stiff = assemble_stiffness(self, lambda x: np.ones(len(x)))
        return self._stiff


def _check_divides(length: float, h: float) -> int:
    n = length / h
    if abs(n - round(n)) > 1e-9 * max(1.0, n):
        raise ConfigurationError(f"mesh size {h} does not divide interval length {length}")
    return int(round(n))


def build_mesh(domain: ProblemDomain, h: float) -> Mesh:
    if domain.dim == 1:
        (a, b), = domain.bounds
        n = _check_divides(b - a, h)
        verts = np.linspace(a, b, n + 1).reshape(-1, 1)
        elems = np.stack([np.arange(n), np.arange(1, n + 1)], axis=1)
        interior = np.arange(1, n)
        # 2-point Gauss per element: exact for cubics
        x0 = verts[elems[:, 0], 0]
        qp = np.stack([x0 + g * h for g in _GAUSS_1D], axis=1)[..., None]
        qw = np.full((n, 2), h / 2.0)
        basis = np.array([[1.0 - g, g] for g in _GAUSS_1D])
        grads = np.broadcast_to(np.array([[-1.0 / h], [1.0 / h]]), (n, 2, 1)).copy()
    else:
        (a1, b1), (a2, b2) = domain.bounds
        n1 = _check_divides(b1 - a1, h)
        n2 = _check_divides(b2 - a2, h)
        xs = np.linspace(a1, b1, n1 + 1)
        ys = np.linspace(a2, b2, n2 + 1)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        verts = np.stack([X.ravel(), Y.ravel()], axis=1)

        def vid(i, j):
            return i * (n2 + 1) + j

        I, J = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
        I, J = I.ravel(), J.ravel()
        v00, v10 = vid(I, J), vid(I + 1, J)
        v01, v11 = vid(I, J + 1), vid(I + 1, J + 1)
        # split each cell along the (v00, v11) diagonal; both triangles CCW
        lower = np.stack([v00, v10, v11], axis=1)
        upper = np.stack([v00, v11, v01], axis=1)
        elems = np.concatenate([lower, upper], axis=0)

        ii, jj = np.meshgrid(np.arange(1, n1), np.arange(1, n2), indexing="ij")
        interior = (ii * (n2 + 1) + jj).ravel()

        # edge-midpoint rule: 3 points per triangle, exact for quadratics
        tri = verts[elems]  # (E, 3, 2)
        mids = 0.5 * (tri + np.roll(tri, -1, axis=1))  # midpoints of edges
        area = h * h / 2.0
        qp = mids
        qw = np.full((len(elems), 3), area / 3.0)
        basis = np.array(
            [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]
        )
        # P1 gradients from edge vectors: grad_i = rot90(p_{i+1} - p_{i+2}) / (2 area)
        e = np.roll(tri, -2, axis=1) - np.roll(tri, -1, axis=1)  # p_{i+1}-p_{i+2}
        grads = np.stack([-e[..., 1], e[..., 0]], axis=-1) / (2.0 * area)
    return Mesh(
        dim=domain.dim,
        h=h,
        bounds=domain.bounds,
        vertices=verts,
        elements=elems,
        interior=interior,
        vertex_to_dof=_dof_map(len(verts), interior),
        quad_points=qp,
        quad_weights=qw,
        basis_at_quad=basis,
        grads=grads,
    )


def _dof_map(n_vertices: int, interior: np.ndarray) -> np.ndarray:
    m = np.full(n_vertices, -1, dtype=int)
    m[interior] = np.arange(len(interior))
    return m


def _eval_at_quad(mesh: Mesh, fn) -> np.ndarray:
    """Evaluate a coefficient callable (or per-quad-point array) as (E, nq)."""
    if callable(fn):
        E, nq, d = mesh.quad_points.shape
        return np.asarray(fn(mesh.quad_points.reshape(E * nq, d))).reshape(E, nq)
    arr = np.asarray(fn, dtype=float)
    if arr.shape != mesh.quad_weights.shape:
        raise ConfigurationError("per-quad-point array has wrong shape")
    return arr


def _assemble(mesh: Mesh, local: np.ndarray) -> CsrMatrix:
    """Scatter per-element (E, nv, nv) blocks onto interior dofs."""
    elems = mesh.elements
    nv = elems.shape[1]
    rows = np.repeat(elems, nv, axis=1).ravel()
    cols = np.tile(elems, (1, nv)).ravel()
    ri = mesh.vertex_to_dof[rows]
    ci = mesh.vertex_to_dof[cols]
    keep = (ri >= 0) & (ci >= 0)
    n = mesh.n_interior
    A = sp.coo_matrix(
        (local.ravel()[keep], (ri[keep], ci[keep])), shape=(n, n)
    ).tocsr()
    A.sum_duplicates()
    return CsrMatrix(A)


def assemble_stiffness(mesh: Mesh, p) -> CsrMatrix:
    """Matrix of integral(p grad(phi_i) . grad(phi_j)) on interior dofs."""
    pq = _eval_at_quad(mesh, p)
    pint = (pq * mesh.quad_weights).sum(axis=1)  # (E,)
    gg = np.einsum("eik,ejk->eij", mesh.grads, mesh.grads)
    return _assemble(mesh, pint[:, None, None] * gg)


def assemble_weighted_mass(mesh: Mesh, w) -> CsrMatrix:
    """Matrix of integral(w phi_i phi_j); w == 1 gives the mass matrix."""
    wq = _eval_at_quad(mesh, w)
    basis = mesh.basis_at_quad
    local = np.einsum("eq,qi,qj->eij", wq * mesh.quad_weights, basis, basis)
    return _assemble(mesh, local)


def assemble_load(mesh: Mesh, g) -> np.ndarray:
    """Vector of integral(g phi_i) over interior basis functions."""
    gq = _eval_at_quad(mesh, g)
    local = np.einsum("eq,qi->ei", gq * mesh.quad_weights, mesh.basis_at_quad)
    out = np.zeros(mesh.n_interior)
    dof = mesh.vertex_to_dof[mesh.elements]
    np.add.at(out, dof[dof >= 0], local[dof >= 0])
    return out


def p1_values_at_quad(mesh: Mesh, v: np.ndarray) -> np.ndarray:
    """P1 interpolant of interior coefficients at the quadrature points."""
    full = mesh.to_full(v)
    return np.einsum("qi,ei->eq", mesh.basis_at_quad, full[mesh.elements])


def interpolate_at_nodes(mesh: Mesh, field_fn) -> np.ndarray:
    """Nodal interpolation: field values at interior vertices."""
    return np.asarray(field_fn(mesh.vertices[mesh.interior])).reshape(-1)


def p1_eval(mesh: Mesh, v: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Evaluate the P1 function with interior coefficients ``v`` at points."""
    full = mesh.to_full(v)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if mesh.dim == 1:
        return np.interp(pts[:, 0], mesh.vertices[:, 0], full)
    (a1, _), (a2, _) = mesh.bounds
    h = mesh.h
    n1 = int(round((mesh.bounds[0][1] - a1) / h))
    n2 = int(round((mesh.bounds[1][1] - a2) / h))
    i = np.clip(((pts[:, 0] - a1) / h).astype(int), 0, n1 - 1)
    j = np.clip(((pts[:, 1] - a2) / h).astype(int), 0, n2 - 1)
    xi = (pts[:, 0] - a1) / h - i
    et = (pts[:, 1] - a2) / h - j

    def vid(ii, jj):
        return ii * (n2 + 1) + jj

    f00 = full[vid(i, j)]
    f10 = full[vid(i + 1, j)]
    f01 = full[vid(i, j + 1)]
    f11 = full[vid(i + 1, j + 1)]
    lower = f00 + (f10 - f00) * xi + (f11 - f10) * et
    upper = f00 + (f01 - f00) * et + (f11 - f01) * xi
    return np.where(et <= xi, lower, upper)


# -- discrete norms ----------------------------------------------------------


def l2_norm(mesh: Mesh, v: np.ndarray) -> float:
    M = mesh.mass()
    return float(np.sqrt(max(v @ M.matvec(v), 0.0)))


def h1_seminorm(mesh: Mesh, v: np.ndarray) -> float:
    A = mesh.stiffness()
    return float(np.sqrt(max(v @ A.matvec(v), 0.0)))


def max_node_norm(mesh: Mesh, v: np.ndarray) -> float:
    return float(np.max(np.abs(v))) if len(v) else 0.0


def max_node_error(mesh: Mesh, v: np.ndarray, reference) -> float:
    """Discrete max norm of v - reference over all mesh vertices.

    The reference field is sampled at every vertex; v is extended by zero
    on the boundary (homogeneous Dirichlet convention).
    """
    full = mesh.to_full(v)
    ref = np.asarray(reference(mesh.vertices)).reshape(-1)
    return float(np.max(np.abs(full - ref)))
