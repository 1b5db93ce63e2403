"""P1 finite elements for the Laplace problem with a Robin bottom boundary.

Solves ``-Δu = f`` in the rectangle with ``∂_ν u = h`` on the top edge,
``u = 0`` on both sides and ``∂_ν u + β u = 0`` on the bottom edge. The
experiments use ``f = 0``; the source term exists for manufactured-solution
checks.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fem_common import (
    BoundaryData,
    RobinMass,
    SolverError,
    edge_quadrature,
    evaluate_boundary,
)
from .mesh import BoundaryTag, Mesh, boundary_nodes, dirichlet_nodes
from .quadrature import triangle_rule

EDGE_POINTS = 2


@dataclass(frozen=True, eq=False)
class ScalarField:
    mesh: Mesh
    values: np.ndarray


def _p1_gradients(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Constant basis gradients ``(n_tri, 3, 2)`` and triangle areas."""
    p = mesh.nodes[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    # rows of the inverse Jacobian give grad(lambda_1), grad(lambda_2)
    g1 = np.column_stack([d2[:, 1], -d2[:, 0]]) / det[:, None]
    g2 = np.column_stack([-d1[:, 1], d1[:, 0]]) / det[:, None]
    grads = np.stack([-g1 - g2, g1, g2], axis=1)
    return grads, 0.5 * det


def p1_stiffness(mesh: Mesh) -> sp.csr_matrix:
    grads, area = _p1_gradients(mesh)
    loc = np.einsum("tik,tjk->tij", grads, grads) * area[:, None, None]
    tri = mesh.triangles
    rows = np.broadcast_to(tri[:, :, None], loc.shape).ravel()
    cols = np.broadcast_to(tri[:, None, :], loc.shape).ravel()
    n = mesh.n_nodes
    return sp.coo_matrix((loc.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def p1_source_load(mesh: Mesh, f: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
    bary, w = triangle_rule()
    p = mesh.nodes[mesh.triangles]
    _, area = _p1_gradients(mesh)
    xq = np.einsum("qk,tkd->tqd", bary, p)
    fq = np.asarray(f(xq[..., 0], xq[..., 1]), dtype=float)
    loc = np.einsum("tq,q,qi,t->ti", fq, w, bary, area)
    return np.bincount(mesh.triangles.ravel(), weights=loc.ravel(), minlength=mesh.n_nodes)


def p1_edge_mass(mesh: Mesh, tag: BoundaryTag = BoundaryTag.GammaBottom,
                 n_points: int = EDGE_POINTS) -> RobinMass:
    edges, t, w, s = edge_quadrature(mesh, tag, n_points)
    basis = np.column_stack([1.0 - t, t])
    return RobinMass(edges, basis, w, s)


def p1_edge_load(mesh: Mesh, tag: BoundaryTag, h: BoundaryData,
                 n_points: int = EDGE_POINTS) -> np.ndarray:
    mass = p1_edge_mass(mesh, tag, n_points)
    loc = mass.local_vectors(evaluate_boundary(h, mass.s))
    return np.bincount(mass.edge_nodes.ravel(), weights=loc.ravel(), minlength=mesh.n_nodes)


@dataclass(frozen=True, eq=False)
class LaplaceSystem:
    """Parameter-independent pieces of the Laplace discretisation."""

    mesh: Mesh
    stiffness: sp.csr_matrix
    robin: RobinMass
    free: np.ndarray  # non-Dirichlet node indices

    @classmethod
    def build(cls, mesh: Mesh) -> "LaplaceSystem":
        fixed = dirichlet_nodes(mesh)
        free = np.setdiff1d(np.arange(mesh.n_nodes), fixed)
        return cls(mesh, p1_stiffness(mesh), p1_edge_mass(mesh), free)

    def load(self, h: BoundaryData,
             source: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None) -> np.ndarray:
        b = p1_edge_load(self.mesh, BoundaryTag.GammaTop, h)
        if source is not None:
            b = b + p1_source_load(self.mesh, source)
        return b

    def matrix(self, beta: BoundaryData) -> sp.csr_matrix:
        beta_q = self.robin.beta_at_points(beta)
        return (self.stiffness + self.robin.sparse(beta_q, self.mesh.n_nodes)).tocsr()


def solve_laplace(mesh: Mesh, beta: BoundaryData, h: BoundaryData, *,
                  source: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
                  system: Optional[LaplaceSystem] = None) -> ScalarField:
    """P1 Galerkin solution with exact nodal elimination of the side nodes.

    ``beta`` and ``h`` are constants or callables of ``x`` on the bottom and
    top edges. Raises ``ValueError`` for a non-positive ``beta`` and
    ``SolverError`` when the sparse solve breaks down.
    """
    system = system or LaplaceSystem.build(mesh)
    A = system.matrix(beta)
    b = system.load(h, source)
    free = system.free
    A_ff = A[free][:, free].tocsc()
    b_f = b[free]
    try:
        u_f = spla.splu(A_ff).solve(b_f)
    except RuntimeError as exc:
        raise SolverError(f"Laplace solve failed: {exc}") from exc
    if not np.all(np.isfinite(u_f)):
        raise SolverError("Laplace solve produced non-finite values")
    scale = max(np.linalg.norm(b_f), 1e-300)
    if np.linalg.norm(A_ff @ u_f - b_f) > 1e-10 * scale:
        raise SolverError("Laplace solve residual above tolerance")
    values = np.zeros(mesh.n_nodes)
    values[free] = u_f
    values.setflags(write=False)
    return ScalarField(mesh, values)


def _check_points(mesh: Mesh, points) -> np.ndarray:
    x = np.atleast_1d(np.asarray(points, dtype=float))
    if x.ndim != 1:
        raise ValueError("points must be a 1-d sequence of x-coordinates")
    if np.any(~np.isfinite(x)) or np.any(x < 0) or np.any(x > mesh.Lx):
        raise ValueError(f"trace points must lie in [0, {mesh.Lx}]")
    return x


def p1_top_trace_matrix(mesh: Mesh, points) -> sp.csr_matrix:
    """Sparse ``(len(points), n_nodes)`` piecewise-linear interpolation on the top edge."""
    x = _check_points(mesh, points)
    top = boundary_nodes(mesh, BoundaryTag.GammaTop)
    xt = mesh.nodes[top, 0]
    k = np.clip(np.searchsorted(xt, x, side="right") - 1, 0, len(xt) - 2)
    t = (x - xt[k]) / (xt[k + 1] - xt[k])
    rows = np.repeat(np.arange(len(x)), 2)
    cols = np.column_stack([top[k], top[k + 1]]).ravel()
    vals = np.column_stack([1.0 - t, t]).ravel()
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(x), mesh.n_nodes))


def trace_on_gamma(field: ScalarField, points) -> np.ndarray:
    """Interpolate the nodal values linearly along the top edge."""
    return p1_top_trace_matrix(field.mesh, points) @ field.values


def p1_errors(mesh: Mesh, values: np.ndarray, exact, exact_grad=None) -> tuple[float, float]:
    """L2 error and (if ``exact_grad`` is given) H1-seminorm error against exact fields."""
    bary, w = triangle_rule()
    grads, area = _p1_gradients(mesh)
    p = mesh.nodes[mesh.triangles]
    xq = np.einsum("qk,tkd->tqd", bary, p)
    uh = np.einsum("qk,tk->tq", bary, values[mesh.triangles])
    diff = uh - exact(xq[..., 0], xq[..., 1])
    l2 = float(np.sqrt(np.einsum("tq,q,t->", diff**2, w, area)))
    if exact_grad is None:
        return l2, float("nan")
    gh = np.einsum("tkd,tk->td", grads, values[mesh.triangles])
    gx, gy = exact_grad(xq[..., 0], xq[..., 1])
    dg = (gh[:, None, 0] - gx) ** 2 + (gh[:, None, 1] - gy) ** 2
    h1 = float(np.sqrt(np.einsum("tq,q,t->", dg, w, area)))
    return l2, h1
