import numpy as np
import pytest
import scipy.linalg

from deepfem.domain import unit_box
from deepfem.fem import build_mesh
from deepfem.linalg import (
    CsrMatrix,
    SingularBorderingError,
    SolverFailure,
    matvec,
    solve_bordered,
    solve_spd,
)


def _spd(n, seed=0):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, n))
    return B @ B.T + n * np.eye(n)


def test_csr_requires_square():
    with pytest.raises(ValueError):
        CsrMatrix(np.ones((2, 3)))


def test_csr_fields_and_matvec():
    A = CsrMatrix(np.array([[2.0, 0.0], [1.0, 3.0]]))
    assert A.n == 2
    assert np.allclose(A.diagonal(), [2.0, 3.0])
    assert np.allclose(matvec(A, np.array([1.0, 1.0])), [2.0, 4.0])
    assert np.allclose(A.toarray(), [[2.0, 0.0], [1.0, 3.0]])
    with pytest.raises(ValueError):
        A.matvec(np.ones(3))


def test_csr_add_sub_scale():
    A = CsrMatrix(np.eye(3))
    B = CsrMatrix(2 * np.eye(3))
    assert np.allclose((A + B).toarray(), 3 * np.eye(3))
    assert np.allclose((B - A).toarray(), np.eye(3))
    assert np.allclose(A.scale(5.0).toarray(), 5 * np.eye(3))


def test_is_tridiagonal():
    mesh1 = build_mesh(unit_box(1), 1.0 / 8.0)
    mesh2 = build_mesh(unit_box(2), 1.0 / 4.0)
    assert mesh1.stiffness().is_tridiagonal()
    assert not mesh2.stiffness().is_tridiagonal()


def test_solve_spd_matches_dense_tridiagonal():
    mesh = build_mesh(unit_box(1), 1.0 / 32.0)
    A = mesh.stiffness()
    rng = np.random.default_rng(1)
    b = rng.standard_normal(A.n)
    x = solve_spd(A, b)
    assert np.allclose(x, np.linalg.solve(A.toarray(), b), atol=1e-10)


def test_solve_spd_pcg_on_2d_stiffness():
    mesh = build_mesh(unit_box(2), 1.0 / 16.0)
    A = mesh.stiffness()
    rng = np.random.default_rng(2)
    b = rng.standard_normal(A.n)
    x = solve_spd(A, b)
    assert np.linalg.norm(A.matvec(x) - b) <= 1e-10 * np.linalg.norm(b)


def test_solve_spd_dense_general_matrix():
    A = CsrMatrix(_spd(20, seed=3))
    b = np.arange(20.0)
    x = solve_spd(A, b)
    assert np.allclose(x, np.linalg.solve(A.toarray(), b), atol=1e-9)


def test_solve_spd_zero_rhs():
    A = CsrMatrix(_spd(5))
    assert np.all(solve_spd(A, np.zeros(5)) == 0.0)


def test_solve_spd_dimension_mismatch():
    with pytest.raises(ValueError):
        solve_spd(CsrMatrix(np.eye(3)), np.ones(4))


def test_pcg_rejects_nonpositive_diagonal():
    # non-tridiagonal so the PCG path (not the direct factorization) runs
    A = np.zeros((4, 4))
    A[0, 3] = A[3, 0] = 1.0
    A[1, 1] = A[2, 2] = 1.0
    with pytest.raises(SolverFailure):
        solve_spd(CsrMatrix(A), np.ones(4))


def test_solve_bordered_matches_dense_block_solve():
    n = 12
    rng = np.random.default_rng(4)
    K_dense = _spd(n, seed=4) - 3.0 * np.eye(n)  # indefinite-ish shift
    K = CsrMatrix(K_dense)
    m = rng.standard_normal(n)
    rhs = rng.standard_normal(n)
    s = 0.37
    v, mu = solve_bordered(K, m, rhs, s)
    big = np.zeros((n + 1, n + 1))
    big[:n, :n] = K_dense
    big[:n, n] = -m
    big[n, :n] = 2 * m
    sol = scipy.linalg.solve(big, np.concatenate([rhs, [s]]))
    assert np.allclose(v, sol[:n], atol=1e-9)
    assert mu == pytest.approx(sol[n], abs=1e-9)


def test_solve_bordered_singular_guard():
    # vanishing Schur complement m^T K^{-1} m trips the singularity check
    with pytest.raises(SingularBorderingError):
        solve_bordered(CsrMatrix(np.eye(6)), np.zeros(6), np.ones(6), 1.0)
