"""Uniform P1 triangulation of the unit square."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Mesh:
    """Triangulation of (0,1)^2 on an (n+1) x (n+1) vertex lattice.

    Vertices are numbered row-major: vertex ``j*(n+1) + i`` sits at
    ``(i/n, j/n)``. Every lattice cell is cut along its lower-left to
    upper-right diagonal, and triangles are stored counterclockwise.
    """

    n: int
    vertices: np.ndarray        # (M_h, 2) float
    triangles: np.ndarray       # (2 n^2, 3) int, counterclockwise
    boundary_edges: np.ndarray  # (4 n, 2) int

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def basis_gradients(self) -> np.ndarray:
        """Gradients of the three nodal basis functions on every triangle.

        Returns an array of shape (num_triangles, 3, 2); entry ``[t, a]`` is
        the (constant) gradient of the hat function of local vertex ``a``.
        """
        p = self.vertices[self.triangles]
        x, y = p[:, :, 0], p[:, :, 1]
        twice_area = 2.0 * self.areas()
        # grad chi_a = (y_b - y_c, x_c - x_b) / (2|T|) for (a, b, c) cyclic
        grads = np.empty(p.shape)
        for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
            grads[:, a, 0] = (y[:, b] - y[:, c]) / twice_area
            grads[:, a, 1] = (x[:, c] - x[:, b]) / twice_area
        return grads

    def locate(self, point) -> tuple[int, np.ndarray]:
        """Triangle containing ``point`` and the point's barycentric coordinates."""
        x1, x2 = float(point[0]), float(point[1])
        if not (0.0 <= x1 <= 1.0 and 0.0 <= x2 <= 1.0):
            raise ValueError(f"point {point!r} lies outside the unit square")
        n = self.n
        i = min(int(x1 * n), n - 1)
        j = min(int(x2 * n), n - 1)
        fx, fy = x1 * n - i, x2 * n - j
        t = 2 * (j * n + i) + (0 if fx >= fy else 1)
        p = self.vertices[self.triangles[t]]
        T = np.array([p[1] - p[0], p[2] - p[0]]).T
        l12 = np.linalg.solve(T, np.array([x1, x2]) - p[0])
        return t, np.array([1.0 - l12.sum(), l12[0], l12[1]])


def build_uniform_mesh(n: int) -> Mesh:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"number of intervals must be a positive integer, got {n!r}")
    n = int(n)
    xs = np.arange(n + 1) / n
    X, Y = np.meshgrid(xs, xs)  # row index = j (x2), column index = i (x1)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    j, i = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    ll = (j * (n + 1) + i).ravel()
    lr = ll + 1
    ul = ll + n + 1
    ur = ul + 1
    lower = np.column_stack([ll, lr, ur])
    upper = np.column_stack([ll, ur, ul])
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)

    side = np.arange(n)
    bottom = np.column_stack([side, side + 1])
    right = np.column_stack([side * (n + 1) + n, (side + 1) * (n + 1) + n])
    top = np.column_stack([n * (n + 1) + side + 1, n * (n + 1) + side])
    left = np.column_stack([(side + 1) * (n + 1), side * (n + 1)])
    boundary_edges = np.concatenate([bottom, right, top, left])

    for arr in (vertices, triangles, boundary_edges):
        arr.setflags(write=False)
    return Mesh(n, vertices, triangles, boundary_edges)


def triangle_geometry(mesh: Mesh, t: int):
    """Return ``(coords, area, grads)`` for triangle ``t``.

    ``coords`` is (3, 2), ``grads`` is (3, 2) with the basis-function
    gradients of the three local vertices.
    """
    if not 0 <= t < mesh.num_triangles:
        raise IndexError(f"triangle index {t} out of range [0, {mesh.num_triangles})")
    p = mesh.vertices[mesh.triangles[t]]
    area = 0.5 * ((p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1])
                  - (p[1, 1] - p[0, 1]) * (p[2, 0] - p[0, 0]))
    grads = np.empty((3, 2))
    for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        grads[a] = ((p[b, 1] - p[c, 1]) / (2 * area), (p[c, 0] - p[b, 0]) / (2 * area))
    return p.copy(), area, grads


def write_mesh_csv(mesh: Mesh, vertices_path, triangles_path) -> None:
    with open(Path(vertices_path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex_id", "x1", "x2"])
        for k, (x1, x2) in enumerate(mesh.vertices):
            w.writerow([k, repr(float(x1)), repr(float(x2))])
    with open(Path(triangles_path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["triangle_id", "v0", "v1", "v2"])
        for k, tri in enumerate(mesh.triangles):
            w.writerow([k, *map(int, tri)])
