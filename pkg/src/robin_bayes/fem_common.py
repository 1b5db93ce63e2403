"""Pieces shared by the Laplace and Stokes assemblers."""
from __future__ import annotations

from typing import Callable, Union

import numpy as np

from .mesh import BoundaryTag, Mesh
from .quadrature import edge_rule

BoundaryData = Union[float, tuple, Callable[[np.ndarray], np.ndarray]]


class SolverError(RuntimeError):
    """A linear solve failed or produced a non-finite solution."""


def segment_coordinate(tag: BoundaryTag) -> int:
    """Which coordinate parametrises a boundary segment (0 for x, 1 for y)."""
    return 0 if tag in (BoundaryTag.GammaTop, BoundaryTag.GammaBottom) else 1


def evaluate_boundary(data: BoundaryData, s: np.ndarray, vector: bool = False) -> np.ndarray:
    """Evaluate boundary data at segment coordinates ``s``.

    ``data`` is a constant (scalar, or 2-tuple when ``vector``) or a callable of
    the coordinate along the segment. Vector data comes back with a trailing
    axis of length 2.
    """
    s = np.asarray(s, dtype=float)
    if callable(data):
        out = np.asarray(data(s), dtype=float)
    else:
        out = np.asarray(data, dtype=float)
    shape = s.shape + ((2,) if vector else ())
    out = np.broadcast_to(out, shape).astype(float, copy=True)
    if not np.all(np.isfinite(out)):
        raise ValueError("boundary data is not finite")
    return out


def edge_quadrature(mesh: Mesh, tag: BoundaryTag, n_points: int):
    """Gauss points on every edge carrying ``tag``.

    Returns ``(edges, t, w, s)``: edge endpoints ``(ne, 2)``, reference
    parameters ``(nq,)``, physical weights ``(ne, nq)`` including the edge
    length, and segment coordinates ``(ne, nq)`` of the points.
    """
    edges = mesh.edges_with_tag(tag)
    t, w = edge_rule(n_points)
    p0 = mesh.nodes[edges[:, 0]]
    p1 = mesh.nodes[edges[:, 1]]
    lengths = np.linalg.norm(p1 - p0, axis=1)
    c = segment_coordinate(tag)
    s = p0[:, c, None] + (p1[:, c] - p0[:, c])[:, None] * t[None, :]
    return edges, t, lengths[:, None] * w[None, :], s


def check_positive_beta(beta_values: np.ndarray) -> None:
    if not np.all(np.isfinite(beta_values)):
        raise ValueError("Robin coefficient is not finite")
    if np.any(beta_values <= 0):
        raise ValueError(f"Robin coefficient must be positive, min {beta_values.min():.3g}")


class RobinMass:
    """Boundary mass ``int beta * phi_i * phi_j`` over the tagged edges.

    ``edge_nodes`` lists, per edge, the scalar nodes whose basis functions
    live on it, ordered to match the columns of ``basis`` (basis values at the
    reference Gauss parameters).
    """

    def __init__(self, edge_nodes: np.ndarray, basis: np.ndarray,
                 weights: np.ndarray, s: np.ndarray):
        self.edge_nodes = edge_nodes
        self.basis = basis
        self.weights = weights
        self.s = s

    def beta_at_points(self, beta: BoundaryData) -> np.ndarray:
        values = evaluate_boundary(beta, self.s)
        check_positive_beta(values)
        return values

    def local_matrices(self, beta_q: np.ndarray) -> np.ndarray:
        return np.einsum("eq,qi,qj->eij", beta_q * self.weights, self.basis, self.basis)

    def local_vectors(self, g_q: np.ndarray) -> np.ndarray:
        """``int g * phi_i`` per edge; ``g_q`` may carry a trailing component axis."""
        if g_q.ndim == 2:
            return np.einsum("eq,qi->ei", g_q * self.weights, self.basis)
        return np.einsum("eqc,eq,qi->eic", g_q, self.weights, self.basis)

    def sparse(self, beta_q: np.ndarray, n: int):
        from scipy.sparse import coo_matrix

        loc = self.local_matrices(beta_q)
        rows = np.broadcast_to(self.edge_nodes[:, :, None], loc.shape)
        cols = np.broadcast_to(self.edge_nodes[:, None, :], loc.shape)
        return coo_matrix((loc.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)).tocsr()

    def dense_scatter(self, positions: np.ndarray, size: int):
        """Precompute a scatter into a dense ``size x size`` block.

        ``positions[node]`` is the row of ``node`` in the block, or -1 when the
        node is not part of it. Returns a callable ``beta_q -> dense block``.
        """
        pos = positions[self.edge_nodes]
        flat = pos[:, :, None] * size + pos[:, None, :]
        keep = (pos[:, :, None] >= 0) & (pos[:, None, :] >= 0)
        flat_kept = flat[keep]

        def assemble(beta_q: np.ndarray) -> np.ndarray:
            loc = self.local_matrices(beta_q)
            out = np.bincount(flat_kept, weights=loc[keep], minlength=size * size)
            return out.reshape(size, size)

        return assemble
