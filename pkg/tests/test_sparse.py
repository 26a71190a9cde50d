import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_spd
from fraccauchy.sparse import ConvergenceError, SparseMatrix, cg_solve, estimate_lambda_min, \
    estimate_operator_norm, linear_combine, spmv


def test_spmv_identity_and_zero():
    x = np.array([1.0, -2.0, 3.5])
    np.testing.assert_array_equal(spmv(SparseMatrix.identity(3), x), x)
    Z = SparseMatrix.from_dense(np.zeros((3, 3)))
    np.testing.assert_array_equal(spmv(Z, x), np.zeros(3))


def test_spmv_hand_example():
    A = SparseMatrix.from_dense([[2.0, 1.0], [1.0, 3.0]])
    np.testing.assert_array_equal(A @ np.ones(2), [3.0, 4.0])


def test_spmv_dimension_mismatch():
    with pytest.raises(ValueError):
        spmv(SparseMatrix.identity(3), np.ones(2))


def test_csr_invariants_enforced():
    with pytest.raises(ValueError):
        SparseMatrix(2, np.array([0, 2, 3]), np.array([1, 0, 1]), np.ones(3))
    with pytest.raises(ValueError):
        SparseMatrix(2, np.array([0, 1, 3]), np.array([0, 1]), np.ones(2))
    with pytest.raises(ValueError):
        SparseMatrix(2, np.array([0, 1, 2]), np.array([0, 2]), np.ones(2))


def test_from_coo_sums_duplicates():
    A = SparseMatrix.from_coo(2, [0, 1, 0, 0], [1, 0, 1, 0], [1.0, 2.0, 3.0, 5.0])
    np.testing.assert_array_equal(A.toarray(), [[5.0, 4.0], [2.0, 0.0]])
    assert list(A.indices) == [0, 1, 0]


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, 6, elements=st.floats(-1e3, 1e3)),
       arrays(np.float64, 6, elements=st.floats(-1e3, 1e3)),
       st.floats(-10, 10), st.floats(-10, 10))
def test_spmv_linearity(x, y, a, b):
    A = SparseMatrix.from_dense(random_spd(6, seed=3))
    lhs = spmv(A, a * x + b * y)
    rhs = a * spmv(A, x) + b * spmv(A, y)
    scale = 1 + np.abs(A.toarray()).sum() * (abs(a) * np.abs(x).max() + abs(b) * np.abs(y).max())
    assert np.abs(lhs - rhs).max() <= 1e-12 * scale


def test_linear_combine_copy_and_cancel():
    A = SparseMatrix.from_dense([[2.0, 1.0, 0], [1.0, 3.0, 0], [0, 0, 1.0]])
    B = SparseMatrix.from_dense([[1.0, 0, 0], [0, 1.0, 4.0], [0, 4.0, 1.0]])
    np.testing.assert_array_equal(linear_combine(A, 1.0, B, 0.0).toarray(), A.toarray())
    np.testing.assert_array_equal(linear_combine(A, 1.0, A, -1.0).data, 0.0)
    C = linear_combine(A, 2.0, B, -3.0)
    np.testing.assert_allclose(C.toarray(), 2 * A.toarray() - 3 * B.toarray())
    with pytest.raises(ValueError):
        linear_combine(A, 1.0, SparseMatrix.identity(2), 1.0)


def test_linear_combine_builds_shifted_operator(small_system, small_eig):
    _, s = small_system
    delta = 0.5 * small_eig.lambdas[0]
    S = linear_combine(s.K, 1.0, s.M, -delta)
    phi, lam = small_eig.phis[:, 0], small_eig.lambdas[0]
    np.testing.assert_allclose(S @ phi, (lam - delta) * (s.M @ phi), atol=1e-10)


def test_cg_identity():
    b = np.array([1.0, 2.0, 3.0])
    x, its = cg_solve(SparseMatrix.identity(3), b)
    np.testing.assert_allclose(x, b)
    assert its <= 1


def test_cg_diagonal():
    A = SparseMatrix.from_dense(np.diag([2.0, 4.0]))
    x, _ = cg_solve(A, np.array([2.0, 4.0]))
    np.testing.assert_allclose(x, [1.0, 1.0])


@pytest.mark.parametrize("pre", [None, "jacobi"])
def test_cg_against_dense_solve(pre):
    Ad = random_spd(50, seed=1, cond=1e3)
    b = np.random.default_rng(2).standard_normal(50)
    x, _ = cg_solve(SparseMatrix.from_dense(Ad), b, tol=1e-13, preconditioner=pre)
    np.testing.assert_allclose(x, np.linalg.solve(Ad, b), atol=1e-8)


def test_cg_residual_bound_and_zero_rhs():
    Ad = random_spd(30, seed=4)
    A = SparseMatrix.from_dense(Ad)
    b = np.arange(30.0)
    x, _ = cg_solve(A, b, tol=1e-10)
    assert np.linalg.norm(Ad @ x - b) <= 1e-10 * np.linalg.norm(b)
    x, its = cg_solve(A, np.zeros(30))
    assert its == 0 and not np.any(x)


def test_cg_error_norms_monotone():
    """A-norm and 2-norm of the error shrink every iteration (the residual need not)."""
    Ad = random_spd(40, seed=5, cond=1e4)
    b = np.random.default_rng(6).standard_normal(40)
    exact = np.linalg.solve(Ad, b)
    iterates = [np.zeros(40)]
    cg_solve(SparseMatrix.from_dense(Ad), b, tol=1e-12, callback=lambda x: iterates.append(x.copy()))
    errs = np.array(iterates) - exact
    e_a = np.sqrt(np.einsum("ki,ij,kj->k", errs, Ad, errs))
    e_2 = np.linalg.norm(errs, axis=1)
    assert len(iterates) > 10
    assert np.all(np.diff(e_a) <= 1e-12 * e_a[0])
    assert np.all(np.diff(e_2) <= 1e-12 * e_2[0])


def test_cg_nonconvergence_carries_residual():
    A = SparseMatrix.from_dense(random_spd(30, seed=7, cond=1e6))
    with pytest.raises(ConvergenceError) as info:
        cg_solve(A, np.ones(30), tol=1e-14, maxit=3)
    assert info.value.residual > 1e-14
    assert info.value.iterations == 3


def test_operator_norm_proportional_pair():
    M = SparseMatrix.from_dense(random_spd(10, seed=8))
    S = linear_combine(M, 3.0, M, 0.0)
    assert estimate_operator_norm(S, M, tol=1e-12) == pytest.approx(3.0, rel=1e-10)


def test_operator_norm_zero():
    M = SparseMatrix.from_dense(random_spd(10, seed=8))
    S = linear_combine(M, 0.0, M, 0.0)
    assert estimate_operator_norm(S, M) == 0.0


def test_operator_norm_matches_oracle(small_system, small_eig, small_delta):
    _, s = small_system
    S = linear_combine(s.K, 1.0, s.M, -small_delta)
    exact = small_eig.lambdas[-1] - small_delta
    assert estimate_operator_norm(S, s.M) == pytest.approx(exact, rel=1e-6)
    # independent route: scipy's dense generalized solver
    top = sla.eigh(S.toarray(), s.M.toarray(), eigvals_only=True)[-1]
    assert exact == pytest.approx(top, rel=1e-12)


def test_lambda_min_matches_oracle(small_system, small_eig):
    _, s = small_system
    assert estimate_lambda_min(s.K, s.M) == pytest.approx(small_eig.lambdas[0], rel=1e-7)
