import sys

import numpy as np
import pytest

from fraccauchy.assembly import assemble_system, model_coefficients
from fraccauchy.cauchy import CauchyProblem
from fraccauchy.mesh import build_uniform_mesh
from fraccauchy.oracle import dense_generalized_eig
from fraccauchy.sparse import SparseMatrix


@pytest.fixture
def scalar_problem():
    """1x1 instance K = [2], M = [1], delta = 1, alpha = 1/2, psi = [1]."""
    K = SparseMatrix.from_dense([[2.0]])
    M = SparseMatrix.from_dense([[1.0]])
    return CauchyProblem(K, M, 0.5, 1.0, [1.0])


@pytest.fixture(scope="session")
def small_system():
    mesh = build_uniform_mesh(8)
    return mesh, assemble_system(mesh, model_coefficients())


@pytest.fixture(scope="session")
def small_eig(small_system):
    _, s = small_system
    return dense_generalized_eig(s.K, s.M)


@pytest.fixture(scope="session")
def small_delta(small_eig):
    return 0.99 * small_eig.lambdas[0]


@pytest.fixture(scope="session")
def make_small_problem(small_system, small_eig, small_delta):
    _, s = small_system

    def make(alpha, psi=None, delta=None):
        return CauchyProblem(s.K, s.M, alpha, small_delta if delta is None else delta,
                             s.psi if psi is None else psi, lambda1=small_eig.lambdas[0])
    return make


def random_spd(n, seed=0, cond=100.0):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return Q @ np.diag(np.geomspace(1.0, cond, n)) @ Q.T


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
