"""Structured triangular meshes of a rectangle with tagged boundary edges."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class BoundaryTag(enum.IntEnum):
    """Boundary segments of the rectangle.

    ``GammaTop`` is the observed surface, ``GammaBottom`` carries the Robin
    condition, and the two sides together form the Dirichlet/Neumann part.
    """

    GammaTop = 0
    GammaBottom = 1
    GammaLeft = 2
    GammaRight = 3


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray  # (n_nodes, 2)
    triangles: np.ndarray  # (n_tri, 3), counter-clockwise
    boundary_edges: np.ndarray  # (n_bedges, 2)
    boundary_tags: np.ndarray  # (n_bedges,) BoundaryTag values
    nx: int
    ny: int
    Lx: float
    Ly: float

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def edges_with_tag(self, tag: BoundaryTag) -> np.ndarray:
        return self.boundary_edges[self.boundary_tags == tag]

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def to_text(self) -> str:
        """Plain node/element listing, for debugging only."""
        lines = [f"nodes {self.n_nodes}"]
        lines += [f"{i} {x!r} {y!r}" for i, (x, y) in enumerate(self.nodes)]
        lines.append(f"triangles {self.n_triangles}")
        lines += [f"{i} {a} {b} {c}" for i, (a, b, c) in enumerate(self.triangles)]
        return "\n".join(lines) + "\n"


def build_rect_mesh(nx: int, ny: int, Lx: float, Ly: float) -> Mesh:
    """Triangulate ``(0, Lx) x (0, Ly)`` with ``nx * ny`` cells, two triangles each.

    Nodes are numbered row-major (``j * (nx + 1) + i``) and every cell is split
    along its lower-left to upper-right diagonal.
    """
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ValueError(f"element counts must be positive integers, got {nx}, {ny}")
    if not (Lx > 0 and Ly > 0):
        raise ValueError(f"side lengths must be positive, got {Lx}, {Ly}")
    nx, ny, Lx, Ly = int(nx), int(ny), float(Lx), float(Ly)

    xs = np.linspace(0.0, Lx, nx + 1)  # exact endpoints
    ys = np.linspace(0.0, Ly, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny))
    a = (jj * (nx + 1) + ii).ravel()
    b, c, d = a + 1, a + nx + 2, a + nx + 1
    triangles = np.empty((2 * nx * ny, 3), dtype=np.int64)
    triangles[0::2] = np.column_stack([a, b, c])
    triangles[1::2] = np.column_stack([a, c, d])

    i = np.arange(nx)
    j = np.arange(ny)
    top0 = ny * (nx + 1)
    edges = [
        (np.column_stack([i, i + 1]), BoundaryTag.GammaBottom),
        (np.column_stack([top0 + i, top0 + i + 1]), BoundaryTag.GammaTop),
        (np.column_stack([j * (nx + 1), (j + 1) * (nx + 1)]), BoundaryTag.GammaLeft),
        (np.column_stack([j * (nx + 1) + nx, (j + 1) * (nx + 1) + nx]), BoundaryTag.GammaRight),
    ]
    boundary_edges = np.concatenate([e for e, _ in edges]).astype(np.int64)
    boundary_tags = np.concatenate([np.full(len(e), int(t)) for e, t in edges])

    for arr in (nodes, triangles, boundary_edges, boundary_tags):
        arr.setflags(write=False)
    return Mesh(nodes, triangles, boundary_edges, boundary_tags, nx, ny, Lx, Ly)


def boundary_nodes(mesh: Mesh, tag: BoundaryTag) -> np.ndarray:
    """Node indices on a tagged segment, sorted along it, corners included."""
    idx = np.unique(mesh.edges_with_tag(tag))
    coord = 0 if tag in (BoundaryTag.GammaTop, BoundaryTag.GammaBottom) else 1
    return idx[np.argsort(mesh.nodes[idx, coord], kind="stable")]


def dirichlet_nodes(mesh: Mesh) -> np.ndarray:
    """Side nodes, corners included; these carry ``u = 0`` in the Laplace model."""
    return np.union1d(boundary_nodes(mesh, BoundaryTag.GammaLeft),
                      boundary_nodes(mesh, BoundaryTag.GammaRight))


def unique_edges(triangles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """All edges of a triangulation.

    Returns ``(edges, tri_edges)`` where ``edges`` is ``(n_edges, 2)`` with
    sorted endpoints and ``tri_edges[t, k]`` is the edge opposite local vertex
    ``k`` of triangle ``t``.
    """
    local = np.array([[1, 2], [2, 0], [0, 1]])
    all_edges = np.sort(triangles[:, local].reshape(-1, 2), axis=1)
    edges, inverse = np.unique(all_edges, axis=0, return_inverse=True)
    return edges, inverse.reshape(-1, 3)
