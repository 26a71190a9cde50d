"""Symmetric CSR matrices, conjugate gradients and extremal eigenvalue estimates.

Matrix-vector products run through scipy's CSR kernel, which accumulates
each row left to right in storage order; everything else is plain numpy.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps


class ConvergenceError(RuntimeError):
    """An iteration hit its cap before reaching the requested tolerance."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Square matrix in compressed sparse row form.

    Column indices are strictly increasing within each row. Explicit zeros
    are allowed and are kept, so matrices assembled on the same mesh share
    one sparsity pattern and can be combined entrywise without merging.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    _csr: sps.csr_matrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        indptr = np.ascontiguousarray(self.indptr, dtype=np.int64)
        indices = np.ascontiguousarray(self.indices, dtype=np.int64)
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if indptr.shape != (self.n + 1,) or indptr[0] != 0 or indptr[-1] != indices.size:
            raise ValueError("row offsets inconsistent with dimension")
        if indices.shape != data.shape:
            raise ValueError("column index and value arrays differ in length")
        if indices.size:
            if indices.min() < 0 or indices.max() >= self.n:
                raise ValueError("column index out of range")
            step = np.diff(indices)
            row_start = np.zeros(indices.size, dtype=bool)
            row_start[indptr[:-1][np.diff(indptr) > 0]] = True
            if np.any(step[~row_start[1:]] <= 0):
                raise ValueError("column indices must be strictly increasing within a row")
        for arr in (indptr, indices, data):
            arr.setflags(write=False)
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "data", data)
        csr = sps.csr_matrix((data, indices, indptr), shape=(self.n, self.n), copy=False)
        object.__setattr__(self, "_csr", csr)

    @property
    def shape(self):
        return (self.n, self.n)

    @property
    def nnz(self) -> int:
        return self.indices.size

    @classmethod
    def from_coo(cls, n, rows, cols, vals) -> "SparseMatrix":
        """Sum duplicate (row, col) entries in input order and build CSR.

        Duplicates are accumulated sequentially in the order given, so
        mirrored entries (i, j) and (j, i) fed in the same order produce
        bit-identical sums.
        """
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=np.float64).ravel()
        order = np.lexsort((cols, rows))  # stable
        r, c, v = rows[order], cols[order], vals[order]
        if r.size == 0:
            return cls(n, np.zeros(n + 1, dtype=np.int64), r, v)
        new = np.ones(r.size, dtype=bool)
        new[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
        starts = np.flatnonzero(new)
        seg = np.cumsum(new) - 1
        summed = np.zeros(starts.size)
        # sequential left-to-right accumulation per segment
        for k in range(int(np.max(np.bincount(seg)))):
            pos = starts + k
            valid = pos < np.append(starts[1:], r.size)
            summed[valid] += v[pos[valid]]
        ur, uc = r[starts], c[starts]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, ur + 1, 1)
        return cls(n, np.cumsum(indptr), uc, summed)

    @classmethod
    def from_dense(cls, a, keep_zeros=False) -> "SparseMatrix":
        a = np.atleast_2d(np.asarray(a, dtype=np.float64))
        if a.shape[0] != a.shape[1]:
            raise ValueError("matrix must be square")
        mask = np.ones(a.shape, dtype=bool) if keep_zeros else a != 0
        r, c = np.nonzero(mask)
        return cls.from_coo(a.shape[0], r, c, a[r, c])

    @classmethod
    def identity(cls, n) -> "SparseMatrix":
        return cls(n, np.arange(n + 1), np.arange(n), np.ones(n))

    def with_data(self, data) -> "SparseMatrix":
        """Same sparsity pattern, new values."""
        return SparseMatrix(self.n, self.indptr, self.indices, data)

    def same_pattern(self, other: "SparseMatrix") -> bool:
        return (self.n == other.n
                and (self.indptr is other.indptr or np.array_equal(self.indptr, other.indptr))
                and (self.indices is other.indices or np.array_equal(self.indices, other.indices)))

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()

    def transpose(self) -> "SparseMatrix":
        t = self._csr.T.tocsr()
        t.sort_indices()
        return SparseMatrix(self.n, t.indptr, t.indices, t.data)

    def quad(self, x, y=None) -> float:
        """Quadratic (bilinear) form x^T A y."""
        return float(np.dot(x, spmv(self, x if y is None else y)))

    def __matmul__(self, x):
        return spmv(self, x)


def spmv(A: SparseMatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (A.n,):
        raise ValueError(f"dimension mismatch: matrix {A.n}, vector {x.shape}")
    return A._csr @ x


def linear_combine(A: SparseMatrix, a: float, B: SparseMatrix, b: float) -> SparseMatrix:
    """Entrywise ``a*A + b*B`` on the union of the two sparsity patterns."""
    if A.n != B.n:
        raise ValueError(f"dimension mismatch: {A.n} vs {B.n}")
    if A.same_pattern(B):
        return A.with_data(a * A.data + b * B.data)
    rows_a = np.repeat(np.arange(A.n), np.diff(A.indptr))
    rows_b = np.repeat(np.arange(B.n), np.diff(B.indptr))
    return SparseMatrix.from_coo(
        A.n,
        np.concatenate([rows_a, rows_b]),
        np.concatenate([A.indices, B.indices]),
        np.concatenate([a * A.data, b * B.data]),
    )


def cg_solve(A: SparseMatrix, b, tol=1e-10, maxit=None, x0=None,
             preconditioner=None, callback=None):
    """Conjugate gradients for a symmetric positive definite ``A``.

    Stops once ``||b - A x||_2 <= tol * ||b||_2``. ``preconditioner`` may be
    ``None`` or ``"jacobi"``. ``callback(xk)`` is called after every
    iteration with the current iterate.

    Returns ``(x, iterations)``; raises ConvergenceError past ``maxit``.
    """
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (A.n,):
        raise ValueError(f"dimension mismatch: matrix {A.n}, rhs {b.shape}")
    if maxit is None:
        maxit = 10 * A.n + 100
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(A.n), 0
    threshold = tol * bnorm

    if x0 is None:
        x = np.zeros(A.n)
        r = b.copy()
    else:
        x = np.array(x0, dtype=np.float64)
        r = b - spmv(A, x)
    if preconditioner is None:
        inv_diag = None
    elif preconditioner == "jacobi":
        inv_diag = 1.0 / A.diagonal()
    else:
        raise ValueError(f"unknown preconditioner {preconditioner!r}")

    rnorm = np.linalg.norm(r)
    if rnorm <= threshold:
        return x, 0
    z = r if inv_diag is None else inv_diag * r
    p = z.copy()
    rz = np.dot(r, z)
    for it in range(1, maxit + 1):
        q = spmv(A, p)
        pq = np.dot(p, q)
        if pq <= 0.0:
            raise ConvergenceError("matrix is not positive definite", rnorm, it)
        step = rz / pq
        x += step * p
        r -= step * q
        rnorm = np.linalg.norm(r)
        if callback is not None:
            callback(x)
        if rnorm <= threshold:
            return x, it
        z = r if inv_diag is None else inv_diag * r
        rz_new = np.dot(r, z)
        p *= rz_new / rz
        p += z
        rz = rz_new
    raise ConvergenceError(
        f"CG did not converge in {maxit} iterations (relative residual {rnorm / bnorm:.3e})",
        rnorm / bnorm, maxit)


def _start_vector(n):
    # fixed pseudo-random start: avoids symmetric vectors orthogonal to the target mode
    return np.random.default_rng(20180501).uniform(0.5, 1.5, n)


def estimate_operator_norm(S: SparseMatrix, M: SparseMatrix, tol=1e-10, maxit=10000,
                           cg_tol=1e-12) -> float:
    """Largest generalized eigenvalue of (S, M) by power iteration on M^-1 S.

    The Rayleigh quotient x^T S x / x^T M x is returned once its relative
    change between iterations drops below ``tol``. It approaches the
    eigenvalue from below.
    """
    if S.n != M.n:
        raise ValueError("dimension mismatch")
    x = _start_vector(S.n)
    x /= np.sqrt(M.quad(x))
    rho = S.quad(x)
    for _ in range(maxit):
        y = spmv(S, x)
        if not np.any(y):
            return 0.0
        x, _ = cg_solve(M, y, tol=cg_tol, x0=x)
        x /= np.sqrt(M.quad(x))
        rho_new = S.quad(x)
        if abs(rho_new - rho) <= tol * abs(rho_new):
            return float(rho_new)
        rho = rho_new
    raise ConvergenceError(f"power iteration did not converge in {maxit} steps", rho, maxit)


def estimate_lambda_min(K: SparseMatrix, M: SparseMatrix, tol=1e-8, maxit=10000,
                        cg_tol=1e-12) -> float:
    """Smallest generalized eigenvalue of (K, M) by inverse iteration.

    Each step solves ``K x_new = M x`` with CG, so K must be SPD. The
    Rayleigh quotient approaches the eigenvalue from above.
    """
    if K.n != M.n:
        raise ValueError("dimension mismatch")
    x = np.ones(K.n)
    x /= np.sqrt(M.quad(x))
    rho = K.quad(x)
    for _ in range(maxit):
        x, _ = cg_solve(K, spmv(M, x), tol=cg_tol, x0=x / rho)
        x /= np.sqrt(M.quad(x))
        rho_new = K.quad(x)
        if abs(rho_new - rho) <= tol * abs(rho_new):
            return float(rho_new)
        rho = rho_new
    raise ConvergenceError(f"inverse iteration did not converge in {maxit} steps", rho, maxit)
