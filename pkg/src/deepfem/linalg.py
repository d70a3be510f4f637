"""Sparse storage and the linear solves used by the mesh-refinement phase.

CsrMatrix wraps a scipy CSR matrix behind a small, explicit surface:
matvec, an SPD solve (banded/tridiagonal systems go through a direct
factorization, others through Jacobi-preconditioned conjugate gradients)
and the bordered solve for the constrained Newton step of the nonlinear
eigenvalue iteration.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "CsrMatrix",
    "matvec",
    "solve_spd",
    "solve_bordered",
    "SolverFailure",
    "SingularBorderingError",
]


class SolverFailure(RuntimeError):
    pass


class SingularBorderingError(RuntimeError):
    """The bordered system is singular (shift sits at an eigenvalue)."""


class CsrMatrix:
    """Square sparse matrix in CSR form."""

    def __init__(self, mat):
        m = sp.csr_matrix(mat)
        if m.shape[0] != m.shape[1]:
            raise ValueError("CsrMatrix must be square")
        m.sort_indices()
        self._m = m

    # raw CSR fields
    @property
    def row_offsets(self) -> np.ndarray:
        return self._m.indptr

    @property
    def col_indices(self) -> np.ndarray:
        return self._m.indices

    @property
    def values(self) -> np.ndarray:
        return self._m.data

    @property
    def n(self) -> int:
        return self._m.shape[0]

    @property
    def scipy(self) -> sp.csr_matrix:
        return self._m

    def toarray(self) -> np.ndarray:
        return self._m.toarray()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[-1] != self.n:
            raise ValueError(f"matvec: matrix is {self.n}x{self.n}, vector has {x.shape}")
        return self._m @ x

    def diagonal(self) -> np.ndarray:
        return self._m.diagonal()

    def is_tridiagonal(self) -> bool:
        coo = self._m.tocoo()
        return bool(np.all(np.abs(coo.row - coo.col) <= 1))

    def __add__(self, other: "CsrMatrix") -> "CsrMatrix":
        return CsrMatrix(self._m + other._m)

    def __sub__(self, other: "CsrMatrix") -> "CsrMatrix":
        return CsrMatrix(self._m - other._m)

    def scale(self, c: float) -> "CsrMatrix":
        return CsrMatrix(self._m * c)

    def lu(self):
        """Direct sparse factorization (works for indefinite matrices)."""
        return spla.splu(self._m.tocsc())


def matvec(A: CsrMatrix, x: np.ndarray) -> np.ndarray:
    return A.matvec(x)


def _jacobi_pcg(A: CsrMatrix, b: np.ndarray, tol: float, maxiter: int) -> np.ndarray:
    """Conjugate gradients with diagonal preconditioning."""
    d = A.diagonal()
    if np.any(d <= 0):
        raise SolverFailure("Jacobi preconditioner needs a positive diagonal")
    dinv = 1.0 / d
    x = np.zeros_like(b)
    r = b.copy()
    z = dinv * r
    p = z.copy()
    rz = r @ z
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return x
    for _ in range(maxiter):
        Ap = A.matvec(p)
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= tol * bnorm:
            return x
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverFailure(f"PCG did not converge in {maxiter} iterations")


def solve_spd(A: CsrMatrix, rhs: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Solve A x = rhs for symmetric positive definite A.

    Tridiagonal systems (1D meshes) use a direct banded factorization and
    ignore ``tol``; others use Jacobi-PCG.  The residual contract
    ||Ax - rhs|| <= tol ||rhs|| is asserted on return.
    """
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != A.n:
        raise ValueError("solve_spd: dimension mismatch")
    if A.is_tridiagonal():
        x = A.lu().solve(rhs)
    else:
        x = _jacobi_pcg(A, rhs, tol, maxiter=10 * A.n)
    bnorm = np.linalg.norm(rhs)
    if bnorm > 0:
        res = np.linalg.norm(A.matvec(x) - rhs)
        if res > max(tol, 1e-10) * bnorm:
            raise SolverFailure(f"solve_spd residual {res:.3e} exceeds contract")
    return x


def solve_bordered(K: CsrMatrix, m: np.ndarray, rhs: np.ndarray, s: float):
    """Solve [[K, -m], [2 m^T, 0]] [v; mu] = [rhs; s] by block elimination.

    K may be indefinite; both inner solves go through a direct sparse
    factorization.  Returns ``(v, mu)``.
    """
    m = np.asarray(m, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    lu = K.lu()
    w1 = lu.solve(rhs)
    w2 = lu.solve(m)
    denom = 2.0 * (m @ w2)
    if abs(m @ w2) <= 1e-14 * np.linalg.norm(m) * np.linalg.norm(w2):
        raise SingularBorderingError("bordered system singular: shift at an eigenvalue")
    mu = (s - 2.0 * (m @ w1)) / denom
    v = w1 + mu * w2
    scale = max(np.linalg.norm(rhs), abs(s), 1.0)
    res = np.linalg.norm(K.matvec(v) - mu * m - rhs)
    res_c = abs(2.0 * (m @ v) - s)
    if max(res, res_c) > 1e-9 * scale * max(1.0, np.linalg.norm(v)):
        raise SolverFailure("bordered solve residual check failed")
    return v, mu
