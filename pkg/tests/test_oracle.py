import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from conftest import random_spd
from fraccauchy.assembly import assemble_system, constant, CoefficientField
from fraccauchy.mesh import build_uniform_mesh
from fraccauchy.oracle import (CholeskyError, dense_generalized_eig, exact_evolution,
                               fractional_apply, jacobi_eigh, lambda_min, spectral_truncation,
                               write_spectrum_csv)
from fraccauchy.sparse import SparseMatrix

# smallest generalized eigenvalue of the n=8 model problem, frozen from the oracle
LAMBDA1_N8 = 4.109461294731992


def m_norm(M, x):
    return np.sqrt(M.quad(x))


def test_unit_reaction_has_lambda_one_with_constant_mode():
    mesh = build_uniform_mesh(5)
    one, zero = constant(1.0), constant(0.0)
    s = assemble_system(mesh, CoefficientField(one, one, zero, one))
    e = dense_generalized_eig(s.K, s.M)
    assert lambda_min(e) == pytest.approx(1.0, abs=1e-10)
    phi = e.phis[:, 0]
    assert np.ptp(phi) <= 1e-8
    assert phi[0] > 0


def test_scalar_problem():
    e = dense_generalized_eig(SparseMatrix.from_dense([[2.0]]), SparseMatrix.from_dense([[1.0]]))
    assert e.lambdas.tolist() == [2.0]
    assert e.phis.tolist() == [[1.0]]


def test_model_problem_spectrum(small_system, small_eig):
    _, s = small_system
    e = small_eig
    assert e.lambdas[0] > 1.0
    assert e.lambdas[0] == pytest.approx(LAMBDA1_N8, rel=1e-12)
    assert np.all(np.diff(e.lambdas) >= 0)
    M, K = s.M.toarray(), s.K.toarray()
    P = e.phis
    assert np.abs(P.T @ M @ P - np.eye(len(e))).max() <= 1e-10
    res = np.linalg.norm(K @ P - (M @ P) * e.lambdas, axis=0)
    assert np.all(res <= 1e-8 * e.lambdas)


def test_matches_lapack(small_system, small_eig):
    _, s = small_system
    ref = scipy.linalg.eigh(s.K.toarray(), s.M.toarray(), eigvals_only=True)
    assert np.abs(small_eig.lambdas - ref).max() <= 1e-10 * ref.max()


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 30), st.integers(0, 10_000))
def test_jacobi_against_lapack(n, seed):
    a = random_spd(n, seed=seed, cond=1e3) - 5.0 * np.eye(n)  # indefinite is fine
    lam, vec = jacobi_eigh(a)
    order = np.argsort(lam)
    assert np.allclose(lam[order], np.linalg.eigvalsh(a), atol=1e-10 * np.abs(a).max())
    assert np.allclose(vec.T @ vec, np.eye(n), atol=1e-12)
    assert np.allclose(a @ vec, vec * lam, atol=1e-9 * np.abs(a).max())


def test_jacobi_diagonal_input_is_untouched():
    lam, vec = jacobi_eigh(np.diag([3.0, 1.0, 2.0]))
    assert lam.tolist() == [3.0, 1.0, 2.0]
    assert np.array_equal(vec, np.eye(3))


def test_degenerate_eigenvalues_resolved():
    # the unit-square mesh with constant coefficients has repeated eigenvalues
    mesh = build_uniform_mesh(4)
    one, zero = constant(1.0), constant(0.0)
    s = assemble_system(mesh, CoefficientField(one, one, zero, one))
    e = dense_generalized_eig(s.K, s.M)
    P = e.phis
    assert np.abs(P.T @ s.M.toarray() @ P - np.eye(len(e))).max() <= 1e-10


def test_dimension_cap():
    I = SparseMatrix.identity(10)
    with pytest.raises(ValueError, match="cap"):
        dense_generalized_eig(I, I, cap=9)


def test_indefinite_mass_rejected():
    K = SparseMatrix.identity(2)
    M = SparseMatrix.from_dense([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(CholeskyError):
        dense_generalized_eig(K, M)


def test_fractional_apply_on_eigenvector(small_system, small_eig):
    _, s = small_system
    e = small_eig
    for k in (0, 7, 80):
        phi = e.phis[:, k]
        out = fractional_apply(e, s.M, -0.5, phi)
        assert np.allclose(out, e.lambdas[k] ** -0.5 * phi, atol=1e-10)


def test_fractional_apply_identities(small_system, small_eig):
    _, s = small_system
    x = np.random.default_rng(3).standard_normal(s.K.n)
    assert np.allclose(fractional_apply(small_eig, s.M, 0.0, x), x, atol=1e-10)
    Mx = np.linalg.solve(s.M.toarray(), s.K @ x)
    assert np.allclose(fractional_apply(small_eig, s.M, 1.0, x), Mx, atol=1e-8 * np.abs(Mx).max())


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
def test_fractional_round_trip(small_system, small_eig, alpha):
    _, s = small_system
    x = np.random.default_rng(4).standard_normal(s.K.n)
    back = fractional_apply(small_eig, s.M, -alpha, fractional_apply(small_eig, s.M, alpha, x))
    assert m_norm(s.M, back - x) <= 1e-8 * m_norm(s.M, x)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
@pytest.mark.parametrize("frac", [0.5, 0.99, 1.0])
def test_a_priori_bound(small_system, small_eig, alpha, frac):
    _, s = small_system
    delta = frac * small_eig.lambdas[0]
    v = fractional_apply(small_eig, s.M, -alpha, s.psi)
    assert m_norm(s.M, v) <= delta ** -alpha * m_norm(s.M, s.psi) * (1 + 1e-12)


def test_exact_evolution_endpoints(small_system, small_eig, small_delta):
    _, s = small_system
    alpha = 0.5
    w0 = small_delta ** -alpha * s.psi
    assert np.allclose(exact_evolution(small_eig, s.M, small_delta, alpha, 0.0, w0), w0,
                       atol=1e-12)
    v = fractional_apply(small_eig, s.M, -alpha, s.psi)
    w1 = exact_evolution(small_eig, s.M, small_delta, alpha, 1.0, w0)
    assert m_norm(s.M, w1 - v) <= 1e-12 * m_norm(s.M, v)


def test_exact_evolution_scalar():
    e = dense_generalized_eig(SparseMatrix.from_dense([[2.0]]), SparseMatrix.from_dense([[1.0]]))
    M = SparseMatrix.from_dense([[1.0]])
    w = exact_evolution(e, M, 1.0, 0.5, 0.5, np.array([1.0]))
    assert w[0] == pytest.approx(1.5 ** -0.5, abs=1e-14)
    assert w[0] == pytest.approx(0.816497, abs=1e-6)


def test_exact_evolution_norm_is_monotone(small_system, small_eig, small_delta):
    _, s = small_system
    w0 = small_delta ** -0.25 * s.psi
    norms = [m_norm(s.M, exact_evolution(small_eig, s.M, small_delta, 0.25, t, w0))
             for t in np.linspace(0.0, 1.0, 51)]
    assert np.all(np.diff(norms) <= 1e-14)


def test_exact_evolution_rejects_bad_arguments(small_system, small_eig):
    _, s = small_system
    with pytest.raises(ValueError, match="lambda_1"):
        exact_evolution(small_eig, s.M, 1.01 * small_eig.lambdas[0], 0.5, 0.5, s.psi)
    with pytest.raises(ValueError, match="outside"):
        exact_evolution(small_eig, s.M, 1.0, 0.5, 1.5, s.psi)


def test_spectral_truncation(small_system, small_eig):
    _, s = small_system
    t = spectral_truncation(small_eig, s.M, s.psi, 4)
    c = small_eig.coefficients(s.M, t)
    assert np.abs(c[4:]).max() <= 1e-10 * np.abs(c[:4]).max()
    assert np.allclose(c[:4], small_eig.coefficients(s.M, s.psi)[:4], atol=1e-12)


def test_spectrum_csv(tmp_path, small_eig):
    path = tmp_path / "lambdas.csv"
    write_spectrum_csv(small_eig, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "k,lambda"
    assert len(lines) == len(small_eig) + 1
    k, lam = lines[1].split(",")
    assert int(k) == 1 and float(lam) == small_eig.lambdas[0]
