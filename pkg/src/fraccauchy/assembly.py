"""P1 finite-element matrices for  -div(k grad u) + c u  with Robin boundary term.

Quadrature choices (fixed so results are reproducible):

* diffusion: exact, P1 gradients are constant per triangle; k is sampled
  at the centroid;
* reaction: c sampled at the centroid times the exact P1 mass block. The
  reaction coefficient of the model problem jumps across a circle that is
  not aligned with the mesh;
* source: edge-midpoint rule, exact for quadratics and hence for f in V_h;
* boundary term: trapezoid rule on each boundary edge.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .mesh import Mesh
from .sparse import ConvergenceError, SparseMatrix, cg_solve

Coefficient = Callable[[np.ndarray, np.ndarray], np.ndarray]

_LOCAL_MASS = (np.ones((3, 3)) + np.eye(3)) / 12.0


def constant(value: float) -> Coefficient:
    def fn(x1, x2):
        return np.full(np.broadcast(x1, x2).shape, float(value))
    fn.__name__ = f"constant_{value}"
    return fn


def disc_indicator(inside: float, outside: float, radius: float = 0.5,
                   center=(0.0, 0.0)) -> Coefficient:
    """``inside`` on the closed disc ``|x - center| <= radius``, else ``outside``."""
    cx, cy, r2 = float(center[0]), float(center[1]), float(radius) ** 2

    def fn(x1, x2):
        return np.where((x1 - cx) ** 2 + (x2 - cy) ** 2 <= r2, float(inside), float(outside))
    return fn


@dataclass(frozen=True)
class CoefficientField:
    """Vectorized coefficient callables ``g(x1, x2) -> array``."""

    k: Coefficient
    c: Coefficient
    mu: Coefficient
    f: Coefficient

    def check(self, mesh: Mesh) -> None:
        """Sample the coefficients at the mesh centroids and vertices."""
        pts = np.concatenate([mesh.centroids(), mesh.vertices])
        x1, x2 = pts[:, 0], pts[:, 1]
        if np.any(self.k(x1, x2) <= 0):
            raise ValueError("diffusion coefficient must be positive")
        if np.any(self.c(x1, x2) <= 0):
            raise ValueError("reaction coefficient must be positive")
        if np.any(self.mu(x1, x2) < 0):
            raise ValueError("boundary coefficient must be non-negative")


def model_coefficients() -> CoefficientField:
    """k = 1, c = 100 on the disc x1^2 + x2^2 <= 0.25 (else 1), mu = 0, f = 1."""
    return CoefficientField(k=constant(1.0), c=disc_indicator(100.0, 1.0, 0.5),
                            mu=constant(0.0), f=constant(1.0))


def _pattern(mesh: Mesh):
    """COO index pairs of all triangle-local couplings, triangle-major."""
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1)       # (T, 9): a a a b b b c c c
    cols = np.tile(tri, (1, 3))            # (T, 9): a b c a b c a b c
    return rows.ravel(), cols.ravel()


def _assemble(mesh: Mesh, local: np.ndarray, boundary=None) -> SparseMatrix:
    rows, cols = _pattern(mesh)
    vals = local.reshape(-1)
    if boundary is not None:
        # diagonal trapezoid contributions on edge endpoints
        be, bv = boundary
        rows = np.concatenate([rows, be])
        cols = np.concatenate([cols, be])
        vals = np.concatenate([vals, bv])
    return SparseMatrix.from_coo(mesh.num_vertices, rows, cols, vals)


def _diffusion_local(mesh: Mesh, k: Coefficient) -> np.ndarray:
    g = mesh.basis_gradients()
    xc = mesh.centroids()
    kk = np.asarray(k(xc[:, 0], xc[:, 1]), dtype=float) * mesh.areas()
    return kk[:, None, None] * np.einsum("tad,tbd->tab", g, g)


def _reaction_local(mesh: Mesh, c: Coefficient) -> np.ndarray:
    xc = mesh.centroids()
    cc = np.asarray(c(xc[:, 0], xc[:, 1]), dtype=float) * mesh.areas()
    return cc[:, None, None] * _LOCAL_MASS


def _boundary_terms(mesh: Mesh, mu: Coefficient):
    e = mesh.boundary_edges
    p = mesh.vertices
    length = np.linalg.norm(p[e[:, 1]] - p[e[:, 0]], axis=1)
    m0 = np.asarray(mu(p[e[:, 0], 0], p[e[:, 0], 1]), dtype=float)
    m1 = np.asarray(mu(p[e[:, 1], 0], p[e[:, 1], 1]), dtype=float)
    idx = np.concatenate([e[:, 0], e[:, 1]])
    vals = np.concatenate([0.5 * length * m0, 0.5 * length * m1])
    return idx, vals


def assemble_stiffness(mesh: Mesh, coeffs: CoefficientField) -> SparseMatrix:
    """Matrix of a(u, v) = (k grad u, grad v) + (c u, v) + <mu u, v>_boundary."""
    local = _diffusion_local(mesh, coeffs.k) + _reaction_local(mesh, coeffs.c)
    return _assemble(mesh, local, _boundary_terms(mesh, coeffs.mu))


def assemble_mass(mesh: Mesh) -> SparseMatrix:
    local = mesh.areas()[:, None, None] * _LOCAL_MASS
    # route through the boundary path with zero values so all matrices share a pattern
    be = mesh.boundary_edges.ravel()
    return _assemble(mesh, local, (be, np.zeros(be.size)))


def assemble_seminorm(mesh: Mesh) -> SparseMatrix:
    """Pure Laplacian stiffness (k = 1, c = 0, mu = 0); H1 norm matrix is M + G."""
    zero = constant(0.0)
    return assemble_stiffness(mesh, CoefficientField(constant(1.0), zero, zero, zero))


def load_vector(mesh: Mesh, f: Coefficient) -> np.ndarray:
    """b_i = int f chi_i by the three-point edge-midpoint rule."""
    p = mesh.vertices[mesh.triangles]
    area = mesh.areas()
    b = np.zeros(mesh.num_vertices)
    for a in range(3):
        # chi_a is 1/2 at the midpoints of its two edges and 0 at the third
        m1 = 0.5 * (p[:, a] + p[:, (a + 1) % 3])
        m2 = 0.5 * (p[:, a] + p[:, (a + 2) % 3])
        share = area / 6.0 * (np.asarray(f(m1[:, 0], m1[:, 1]), dtype=float)
                              + np.asarray(f(m2[:, 0], m2[:, 1]), dtype=float))
        np.add.at(b, mesh.triangles[:, a], share)
    return b


def project_rhs(mesh: Mesh, f: Coefficient, M: SparseMatrix, tol=1e-12) -> np.ndarray:
    """L2 projection of f onto the P1 space: solve M psi = b."""
    if M.n != mesh.num_vertices:
        raise ValueError("mass matrix does not match the mesh")
    b = load_vector(mesh, f)
    try:
        psi, _ = cg_solve(M, b, tol=tol, maxit=20 * M.n + 100)
    except ConvergenceError as exc:
        raise ConvergenceError(f"projection failed, mass matrix suspect: {exc}",
                               exc.residual, exc.iterations) from exc
    return psi


@dataclass(frozen=True)
class AssembledSystem:
    K: SparseMatrix
    M: SparseMatrix
    G: SparseMatrix
    psi: np.ndarray


def assemble_system(mesh: Mesh, coeffs: CoefficientField) -> AssembledSystem:
    M = assemble_mass(mesh)
    return AssembledSystem(
        K=assemble_stiffness(mesh, coeffs),
        M=M,
        G=assemble_seminorm(mesh),
        psi=project_rhs(mesh, coeffs.f, M),
    )
