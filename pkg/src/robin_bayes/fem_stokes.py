"""Taylor-Hood (P2 velocity / P1 pressure) finite elements for Stokes flow.

Solves ``-Δu + ∇p = f``, ``div u = 0`` with unit viscosity and natural
conditions everywhere: traction ``∂_ν u - p ν = h`` on top, ``= t_side`` on
the sides (zero in the experiments) and ``∂_ν u - p ν + β u = g`` on the
bottom (``g = 0`` in the experiments). The viscous term uses the full
gradient, ``∫ ∇u : ∇v``.

Unknowns are blocked as ``[u_x (P2 nodes), u_y (P2 nodes), p (vertices)]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fem_common import BoundaryData, RobinMass, SolverError, evaluate_boundary, edge_quadrature
from .fem_laplace import _check_points, _p1_gradients
from .mesh import BoundaryTag, Mesh, unique_edges
from .quadrature import triangle_rule

EDGE_POINTS = 4

BodyForce = Union[tuple, np.ndarray, Callable[[np.ndarray, np.ndarray], np.ndarray]]


@dataclass(frozen=True, eq=False)
class P2Space:
    """Quadratic Lagrange nodes: the mesh vertices followed by edge midpoints."""

    mesh: Mesh
    nodes: np.ndarray  # (n2, 2)
    cells: np.ndarray  # (n_tri, 6): 3 vertices, then midpoints opposite each vertex
    edges: np.ndarray  # (n_edges, 2) sorted vertex pairs

    @classmethod
    def build(cls, mesh: Mesh) -> "P2Space":
        edges, tri_edges = unique_edges(mesh.triangles)
        nv = mesh.n_nodes
        mids = 0.5 * (mesh.nodes[edges[:, 0]] + mesh.nodes[edges[:, 1]])
        nodes = np.vstack([mesh.nodes, mids])
        cells = np.hstack([mesh.triangles, nv + tri_edges])
        return cls(mesh, nodes, cells, edges)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    def midpoint_of(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """P2 node index of the midpoint of vertex pairs ``(a, b)``."""
        n = self.mesh.n_nodes
        keys = self.edges[:, 0] * n + self.edges[:, 1]
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        idx = np.searchsorted(keys, lo * n + hi)
        if np.any(keys[np.clip(idx, 0, len(keys) - 1)] != lo * n + hi):
            raise KeyError("vertex pair is not a mesh edge")
        return n + idx

    def edge_nodes(self, tag: BoundaryTag) -> np.ndarray:
        """``(ne, 3)`` P2 nodes (start, midpoint, end) of each tagged edge."""
        e = self.mesh.edges_with_tag(tag)
        return np.column_stack([e[:, 0], self.midpoint_of(e[:, 0], e[:, 1]), e[:, 1]])


def _p2_values(bary: np.ndarray) -> np.ndarray:
    """P2 basis values at barycentric points ``(nq, 3) -> (nq, 6)``."""
    l0, l1, l2 = bary.T
    return np.column_stack([
        l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
        4 * l1 * l2, 4 * l2 * l0, 4 * l0 * l1,
    ])


def _p2_gradients(bary: np.ndarray, g: np.ndarray) -> np.ndarray:
    """P2 basis gradients ``(n_tri, nq, 6, 2)`` from P1 gradients ``g`` ``(n_tri, 3, 2)``."""
    L = bary[None, :, :, None]  # (1, nq, 3, 1)
    G = g[:, None, :, :]  # (t, 1, 3, 2)
    vert = (4 * L - 1) * G
    pairs = [(1, 2), (2, 0), (0, 1)]
    mid = [4 * (L[:, :, j] * G[:, :, i] + L[:, :, i] * G[:, :, j]) for i, j in pairs]
    return np.concatenate([vert, np.stack(mid, axis=2)], axis=2)


def _edge_p2_basis(t: np.ndarray) -> np.ndarray:
    return np.column_stack([(1 - t) * (1 - 2 * t), 4 * t * (1 - t), t * (2 * t - 1)])


@dataclass(frozen=True, eq=False)
class VectorField:
    space: P2Space
    values: np.ndarray  # (n2, 2)

    @property
    def mesh(self) -> Mesh:
        return self.space.mesh


@dataclass(frozen=True, eq=False)
class PressureField:
    mesh: Mesh
    values: np.ndarray  # (n_vertices,)


@dataclass(frozen=True, eq=False)
class StokesSystem:
    """Parameter-independent Taylor-Hood operators on one mesh."""

    space: P2Space
    stiffness: sp.csr_matrix  # scalar P2 Laplacian (n2, n2)
    divergence: sp.csr_matrix  # (n1, 2 * n2), entries -∫ q div v
    robin: RobinMass

    @classmethod
    def build(cls, mesh: Mesh) -> "StokesSystem":
        space = P2Space.build(mesh)
        bary, w = triangle_rule()
        g, area = _p1_gradients(mesh)
        dphi = _p2_gradients(bary, g)  # (t, q, 6, 2)
        wa = w[None, :] * area[:, None]
        cells = space.cells
        n2, n1 = space.n_nodes, mesh.n_nodes

        kloc = np.einsum("tq,tqik,tqjk->tij", wa, dphi, dphi)
        rows = np.broadcast_to(cells[:, :, None], kloc.shape).ravel()
        cols = np.broadcast_to(cells[:, None, :], kloc.shape).ravel()
        K = sp.coo_matrix((kloc.ravel(), (rows, cols)), shape=(n2, n2)).tocsr()

        blocks = []
        for c in range(2):
            bloc = -np.einsum("tq,qa,tqj->taj", wa, bary, dphi[..., c])
            r = np.broadcast_to(mesh.triangles[:, :, None], bloc.shape).ravel()
            cc = np.broadcast_to(cells[:, None, :], bloc.shape).ravel()
            blocks.append(sp.coo_matrix((bloc.ravel(), (r, cc)), shape=(n1, n2)).tocsr())
        B = sp.hstack(blocks).tocsr()

        edges, t, we, s = edge_quadrature(mesh, BoundaryTag.GammaBottom, EDGE_POINTS)
        robin = RobinMass(space.edge_nodes(BoundaryTag.GammaBottom), _edge_p2_basis(t), we, s)
        return cls(space, K, B, robin)

    @property
    def n_velocity(self) -> int:
        return 2 * self.space.n_nodes

    @property
    def n_dofs(self) -> int:
        return self.n_velocity + self.space.mesh.n_nodes

    def saddle_matrix(self, robin_scalar: sp.spmatrix) -> sp.csr_matrix:
        A = sp.kron(sp.identity(2, format="csr"), self.stiffness + robin_scalar)
        return sp.bmat([[A, self.divergence.T], [self.divergence, None]], format="csr")

    def matrix(self, beta: BoundaryData) -> sp.csr_matrix:
        beta_q = self.robin.beta_at_points(beta)
        return self.saddle_matrix(self.robin.sparse(beta_q, self.space.n_nodes))

    def _edge_load(self, tag: BoundaryTag, data: BoundaryData) -> np.ndarray:
        mesh = self.space.mesh
        edges, t, w, s = edge_quadrature(mesh, tag, EDGE_POINTS)
        mass = RobinMass(self.space.edge_nodes(tag), _edge_p2_basis(t), w, s)
        loc = mass.local_vectors(evaluate_boundary(data, s, vector=True))  # (ne, 3, 2)
        n2 = self.space.n_nodes
        out = np.zeros(self.n_dofs)
        for c in range(2):
            out[c * n2:(c + 1) * n2] += np.bincount(
                mass.edge_nodes.ravel(), weights=loc[..., c].ravel(), minlength=n2)
        return out

    def load(self, h: BoundaryData, f: BodyForce = (0.0, 0.0), *,
             side_traction: Optional[Mapping[BoundaryTag, BoundaryData]] = None,
             robin_rhs: Optional[BoundaryData] = None) -> np.ndarray:
        mesh = self.space.mesh
        n2 = self.space.n_nodes
        b = self._edge_load(BoundaryTag.GammaTop, h)
        for tag, data in (side_traction or {}).items():
            if tag not in (BoundaryTag.GammaLeft, BoundaryTag.GammaRight):
                raise ValueError(f"side traction given for {tag!r}")
            b += self._edge_load(tag, data)
        if robin_rhs is not None:
            b += self._edge_load(BoundaryTag.GammaBottom, robin_rhs)

        bary, w = triangle_rule()
        _, area = _p1_gradients(mesh)
        phi = _p2_values(bary)
        if callable(f):
            xq = np.einsum("qk,tkd->tqd", bary, mesh.nodes[mesh.triangles])
            fq = np.asarray(f(xq[..., 0], xq[..., 1]), dtype=float)  # (t, q, 2)
        else:
            fq = np.broadcast_to(np.asarray(f, dtype=float), (mesh.n_triangles, len(w), 2))
        loc = np.einsum("tqc,q,qi,t->tic", fq, w, phi, area)
        cells = self.space.cells.ravel()
        for c in range(2):
            b[c * n2:(c + 1) * n2] += np.bincount(cells, weights=loc[..., c].ravel(), minlength=n2)
        return b

    def split(self, x: np.ndarray) -> tuple[VectorField, PressureField]:
        n2 = self.space.n_nodes
        u = np.column_stack([x[:n2], x[n2:2 * n2]])
        return VectorField(self.space, u), PressureField(self.space.mesh, x[2 * n2:].copy())


def solve_stokes(mesh: Mesh, beta: BoundaryData, h: BoundaryData, f: BodyForce = (0.0, 0.0), *,
                 side_traction: Optional[Mapping[BoundaryTag, BoundaryData]] = None,
                 robin_rhs: Optional[BoundaryData] = None,
                 system: Optional[StokesSystem] = None) -> tuple[VectorField, PressureField]:
    """Taylor-Hood solution of the Robin/traction Stokes problem.

    ``h`` (top traction) and ``beta`` are constants or callables of ``x``;
    ``f`` is a constant 2-vector or a callable ``(x, y) -> (..., 2)``. The
    pressure is not normalised: traction conditions fix its level.
    """
    system = system or StokesSystem.build(mesh)
    A = system.matrix(beta).tocsc()
    b = system.load(h, f, side_traction=side_traction, robin_rhs=robin_rhs)
    try:
        x = spla.splu(A).solve(b)
    except RuntimeError as exc:
        raise SolverError(f"saddle-point solve failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SolverError("saddle-point solve produced non-finite values")
    if np.linalg.norm(A @ x - b) > 1e-9 * max(np.linalg.norm(b), 1e-300):
        raise SolverError("saddle-point residual above tolerance")
    return system.split(x)


def p2_top_trace_matrix(space: P2Space, points) -> sp.csr_matrix:
    """Sparse ``(len(points), n2)`` quadratic interpolation along the top edge."""
    mesh = space.mesh
    x = _check_points(mesh, points)
    en = space.edge_nodes(BoundaryTag.GammaTop)
    x0 = space.nodes[en[:, 0], 0]
    x1 = space.nodes[en[:, 2], 0]
    flip = x0 > x1
    en[flip] = en[flip][:, ::-1]
    x0, x1 = np.minimum(x0, x1), np.maximum(x0, x1)
    order = np.argsort(x0)
    en, x0, x1 = en[order], x0[order], x1[order]
    k = np.clip(np.searchsorted(x0, x, side="right") - 1, 0, len(x0) - 1)
    t = (x - x0[k]) / (x1[k] - x0[k])
    rows = np.repeat(np.arange(len(x)), 3)
    return sp.csr_matrix((_edge_p2_basis(t).ravel(), (rows, en[k].ravel())),
                         shape=(len(x), space.n_nodes))


def velocity_trace_on_gamma(field: VectorField, points) -> np.ndarray:
    """P2 interpolation of both velocity components along the top edge, ``(n, 2)``."""
    return p2_top_trace_matrix(field.space, points) @ field.values


def stokes_errors(u: VectorField, p: PressureField, u_exact, p_exact) -> tuple[float, float]:
    """L2 errors of velocity and pressure against callables of ``(x, y)``.

    ``u_exact`` returns ``(..., 2)``.
    """
    mesh = u.mesh
    bary, w = triangle_rule()
    _, area = _p1_gradients(mesh)
    xq = np.einsum("qk,tkd->tqd", bary, mesh.nodes[mesh.triangles])
    X, Y = xq[..., 0], xq[..., 1]
    uh = np.einsum("qi,tic->tqc", _p2_values(bary), u.values[u.space.cells])
    ph = np.einsum("qk,tk->tq", bary, p.values[mesh.triangles])
    du = ((uh - u_exact(X, Y)) ** 2).sum(axis=-1)
    dp = (ph - p_exact(X, Y)) ** 2
    wa = w[None, :] * area[:, None]
    return float(np.sqrt((du * wa).sum())), float(np.sqrt((dp * wa).sum()))
