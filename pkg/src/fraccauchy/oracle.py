"""Dense spectral ground truth for small problems.

The generalized problem K phi = lambda M phi is reduced with M = L L^T to
the standard symmetric problem L^-1 K L^-T y = lambda y, which is
diagonalized by cyclic Jacobi rotations. Everything here is O(n^3) and
meant for meshes with at most a few hundred vertices.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .sparse import ConvergenceError, SparseMatrix

DEFAULT_DIMENSION_CAP = 1500


class CholeskyError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class EigenDecomposition:
    lambdas: np.ndarray  # ascending
    phis: np.ndarray     # columns, M-orthonormal

    def __len__(self):
        return self.lambdas.size

    def coefficients(self, M: SparseMatrix, x) -> np.ndarray:
        """Expansion coefficients (x, phi_k) in the M-inner product."""
        return self.phis.T @ (M @ np.asarray(x, dtype=float))

    def synthesize(self, coeffs) -> np.ndarray:
        return self.phis @ coeffs


def _round_robin(n):
    """Pairings for one Jacobi sweep; every index pair occurs exactly once.

    Uses the circle method, so the rotations inside a round act on disjoint
    rows and columns and can be applied simultaneously.
    """
    players = list(range(n)) + ([-1] if n % 2 else [])
    m = len(players)
    rounds = []
    for _ in range(m - 1):
        pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(p, q), max(p, q)) for p, q in pairs if p >= 0 and q >= 0]
        if pairs:
            rounds.append(np.array(pairs, dtype=np.int64))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _off(a):
    # direct sum; ||A||_F^2 - sum(diag^2) cancels once A is nearly diagonal
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    return np.linalg.norm(off)


def jacobi_eigh(a, threshold=1e-12, max_sweeps=100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps continue until the off-diagonal Frobenius norm is at most
    ``threshold`` times the Frobenius norm of ``a``. Returns the
    (unsorted) eigenvalues and the orthogonal matrix of eigenvectors.
    """
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if n < 2 or scale == 0.0:
        return np.diag(a).copy(), v
    target = threshold * scale
    rounds = _round_robin(n)
    for _ in range(max_sweeps):
        if _off(a) <= target:
            return np.diag(a).copy(), v
        for pairs in rounds:
            p, q = pairs[:, 0], pairs[:, 1]
            apq = a[p, q]
            active = np.abs(apq) > 1e-300
            if not np.any(active):
                continue
            p, q, apq = p[active], q[active], apq[active]
            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            t = np.sign(theta) / (np.abs(theta) + np.hypot(1.0, theta))
            t[theta == 0.0] = 1.0
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            # A <- J^T A J with J = [[c, s], [-s, c]] in the (p, q) plane
            ap, aq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * ap - s[:, None] * aq
            a[q, :] = s[:, None] * ap + c[:, None] * aq
            ap, aq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = ap * c - aq * s
            a[:, q] = ap * s + aq * c
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = vp * c - vq * s
            v[:, q] = vp * s + vq * c
    if _off(a) <= target:
        return np.diag(a).copy(), v
    raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps", _off(a) / scale,
                           max_sweeps)


def _first_significant(col, rel=1e-8):
    mag = np.abs(col)
    return int(np.flatnonzero(mag > rel * mag.max())[0])


def dense_generalized_eig(K: SparseMatrix, M: SparseMatrix,
                          cap: int = DEFAULT_DIMENSION_CAP) -> EigenDecomposition:
    if K.n != M.n:
        raise ValueError("dimension mismatch")
    if K.n > cap:
        raise ValueError(f"dimension {K.n} exceeds the dense oracle cap {cap}")
    Md = M.toarray()
    try:
        L = np.linalg.cholesky(Md)
    except np.linalg.LinAlgError as exc:
        raise CholeskyError("mass matrix is not positive definite") from exc
    Kd = K.toarray()
    tmp = sla.solve_triangular(L, Kd, lower=True)
    C = sla.solve_triangular(L, tmp.T, lower=True)
    C = 0.5 * (C + C.T)
    lam, Y = jacobi_eigh(C)
    phis = sla.solve_triangular(L.T, Y, lower=False)
    phis /= np.sqrt(np.einsum("ik,ik->k", phis, Md @ phis))

    # deterministic sign: first significant component positive
    firsts = np.array([_first_significant(phis[:, k]) for k in range(phis.shape[1])])
    phis *= np.sign(phis[firsts, np.arange(phis.shape[1])])
    # ascending eigenvalues; near-ties ordered by first significant component
    tie = 1e-10 * max(1.0, np.abs(lam).max())
    keys = np.round(lam / tie)
    order = np.lexsort((firsts, keys))
    return EigenDecomposition(lam[order].copy(), phis[:, order].copy())


def fractional_apply(e: EigenDecomposition, M: SparseMatrix, power: float, x) -> np.ndarray:
    """sum_k (x, phi_k) lambda_k^power phi_k; power = -alpha solves A^alpha v = x."""
    return e.synthesize(e.lambdas ** power * e.coefficients(M, x))


def exact_evolution(e: EigenDecomposition, M: SparseMatrix, delta: float, alpha: float,
                    t: float, w0) -> np.ndarray:
    """w(t) = delta^alpha (t (A - delta) + delta)^-alpha w0, spectrally."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"pseudo-time {t} outside [0, 1]")
    if delta >= e.lambdas[0]:
        raise ValueError(f"delta = {delta} must lie below lambda_1 = {e.lambdas[0]}")
    factor = delta ** alpha * (t * (e.lambdas - delta) + delta) ** (-alpha)
    return e.synthesize(factor * e.coefficients(M, w0))


def lambda_min(e: EigenDecomposition) -> float:
    return float(e.lambdas[0])


def write_spectrum_csv(e: EigenDecomposition, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "lambda"])
        for k, lam in enumerate(e.lambdas, start=1):
            w.writerow([k, repr(float(lam))])


def spectral_truncation(e: EigenDecomposition, M: SparseMatrix, x, modes: int) -> np.ndarray:
    """M-orthogonal projection of x onto the lowest ``modes`` eigenvectors."""
    c = e.coefficients(M, x)
    c[modes:] = 0.0
    return e.synthesize(c)
