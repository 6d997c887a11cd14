"""Uniform P1 triangulations of the unit square and element assembly.

The square is divided into 2^L x 2^L grid cells, each split along the
lower-left to upper-right diagonal, so every triangle has diameter
h = 2^-L * sqrt(2). Node (i, j) sits at (i/2^L, j/2^L) and gets the id
j*(2^L+1) + i.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import build_sparse


@dataclass(frozen=True)
class UnitSquareMesh:
    level: int
    coords: np.ndarray  # (n_nodes, 2)
    triangles: np.ndarray  # (n_tri, 3), positively oriented
    boundary_cycle: np.ndarray  # boundary node ids, counterclockwise from the origin

    @property
    def cells_per_side(self):
        return 2**self.level

    @property
    def spacing(self):
        return 1.0 / self.cells_per_side

    @property
    def h(self):
        """Triangle diameter."""
        return self.spacing * np.sqrt(2.0)

    @property
    def n_nodes(self):
        return self.coords.shape[0]

    def node_id(self, i, j):
        return j * (self.cells_per_side + 1) + i

    def interior_ids(self):
        n = self.cells_per_side
        i, j = np.meshgrid(np.arange(1, n), np.arange(1, n), indexing="xy")
        return (j * (n + 1) + i).ravel()


def unit_square_mesh(level):
    if level < 1:
        raise ValueError("mesh level must be at least 1")
    n = 2**level
    ticks = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(ticks, ticks, indexing="xy")
    coords = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    v00 = (j * (n + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + (n + 1)
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.vstack([lower, upper])

    bottom = np.arange(0, n)
    right = np.arange(0, n) * (n + 1) + n
    top = n * (n + 1) + np.arange(n, 0, -1)
    left = np.arange(n, 0, -1) * (n + 1)
    boundary = np.concatenate([bottom, right, top, left])

    return UnitSquareMesh(level, coords, triangles, boundary)


def p1_matrices(mesh):
    """Full stiffness and mass matrices (exact P1 element integrals)."""
    tri = mesh.triangles
    x = mesh.coords[tri, 0]
    y = mesh.coords[tri, 1]
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    if np.any(det <= 0.0):
        raise ValueError("triangulation contains nonpositively oriented triangles")
    area = 0.5 * det

    # Gradient of barycentric basis a: ( b_a, c_a ) / (2 area)
    b = y[:, [1, 2, 0]] - y[:, [2, 0, 1]]
    c = x[:, [2, 0, 1]] - x[:, [1, 2, 0]]
    ke = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) / (4.0 * area)[:, None, None]

    me_ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    me = area[:, None, None] * me_ref[None, :, :]

    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    shape = (mesh.n_nodes, mesh.n_nodes)
    K = build_sparse(rows, cols, ke.ravel(), shape, symmetric=True)
    M = build_sparse(rows, cols, me.ravel(), shape, symmetric=True)
    return K, M


def chain_p1_mass(n_nodes, length, cyclic=False):
    """1-D P1 mass matrix on a uniform chain (or closed cycle) of edges.

    Nodes are indexed 0..n_nodes-1 along the chain; each edge has the given
    length. A cycle adds the closing edge (n_nodes-1, 0).
    """
    n_edges = n_nodes if cyclic else n_nodes - 1
    a = np.arange(n_edges)
    b = (a + 1) % n_nodes if cyclic else a + 1
    rows = np.concatenate([a, b, a, b])
    cols = np.concatenate([a, b, b, a])
    vals = np.concatenate(
        [
            np.full(n_edges, length / 3.0),
            np.full(n_edges, length / 3.0),
            np.full(n_edges, length / 6.0),
            np.full(n_edges, length / 6.0),
        ]
    )
    return build_sparse(rows, cols, vals, (n_nodes, n_nodes), symmetric=True)
