"""Forward map, synthetic data and Gaussian log-likelihood.

The forward map sends coefficients ``θ`` to the surface trace of the PDE
solution with Robin coefficient ``β = m_β + exp(θ)`` on the bottom edge.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fem_common import SolverError
from .fem_laplace import LaplaceSystem, p1_top_trace_matrix, solve_laplace, trace_on_gamma
from .fem_stokes import StokesSystem, p2_top_trace_matrix, solve_stokes, velocity_trace_on_gamma
from .mesh import BoundaryTag, Mesh, boundary_nodes, build_rect_mesh
from .prior import basis_matrix, coeffs_from_json, coeffs_to_json, eval_theta

LAPLACE = "laplace"
STOKES = "stokes"


@dataclass(frozen=True)
class Sinusoid:
    """Surface load ``amplitude * (sin(frequency * π * x) + offset)``."""

    amplitude: float = 10.0
    frequency: float = 12.0
    offset: float = 1.0

    def __call__(self, x):
        return self.amplitude * (np.sin(self.frequency * np.pi * np.asarray(x, dtype=float)) + self.offset)


@dataclass(frozen=True)
class ModelSpec:
    """Which PDE is observed, with its fixed data.

    For Stokes the surface traction is ``(h(x), 0)`` and ``rho_g`` is the
    constant body force.
    """

    kind: str = LAPLACE
    h: Sinusoid = field(default_factory=Sinusoid)
    rho_g: tuple = (5.0, 5.0)
    m_beta: float = 0.0

    def __post_init__(self):
        if self.kind not in (LAPLACE, STOKES):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if isinstance(self.h, dict):
            object.__setattr__(self, "h", Sinusoid(**self.h))
        object.__setattr__(self, "rho_g", tuple(float(v) for v in self.rho_g))
        if len(self.rho_g) != 2 or not all(map(math.isfinite, self.rho_g)):
            raise ValueError("rho_g must be a finite 2-vector")
        if not (self.m_beta >= 0 and math.isfinite(self.m_beta)):
            raise ValueError("m_beta must be a finite non-negative number")

    @property
    def value_dim(self) -> int:
        return 1 if self.kind == LAPLACE else 2

    def surface_load(self):
        if self.kind == LAPLACE:
            return self.h
        return lambda x: np.stack([self.h(x), np.zeros_like(np.asarray(x, dtype=float))], axis=-1)

    def beta(self, coeffs, Lx: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
        coeffs = np.asarray(coeffs, dtype=float)
        return lambda x: self.m_beta + np.exp(eval_theta(coeffs, np.clip(np.asarray(x) / Lx, 0.0, 1.0)))

    def describe(self) -> dict:
        return {"kind": self.kind, "rho_g": list(self.rho_g)}


def forward(model: ModelSpec, mesh: Mesh, coeffs, points) -> np.ndarray:
    """One PDE solve, then the surface trace at every point.

    Returns ``(n,)`` for Laplace and ``(n, 2)`` for Stokes.
    """
    beta = model.beta(coeffs, mesh.Lx)
    if model.kind == LAPLACE:
        return trace_on_gamma(solve_laplace(mesh, beta, model.h), points)
    u, _ = solve_stokes(mesh, beta, model.surface_load(), model.rho_g)
    return velocity_trace_on_gamma(u, points)


class ReducedForward:
    """Fast repeated evaluation of the forward map at fixed observation points.

    Only the Robin block depends on ``θ``, so the parameter-independent part
    of the system is condensed exactly onto the bottom-edge unknowns once.
    Each call then assembles the small Robin block, solves a dense SPD system
    and maps the result to the observation points. Agrees with
    :func:`forward` to round-off.
    """

    def __init__(self, model: ModelSpec, mesh: Mesh, points, *, chunk: int = 256):
        self.model = model
        self.mesh = mesh
        self.points = np.asarray(points, dtype=float)
        if model.kind == LAPLACE:
            system = LaplaceSystem.build(mesh)
            A = system.stiffness
            b = system.load(model.h)
            P = p1_top_trace_matrix(mesh, self.points)
            free = system.free
            bottom = np.intersect1d(boundary_nodes(mesh, BoundaryTag.GammaBottom), free)
            A, b, P = A[free][:, free], b[free], P[:, free]
            local = np.full(mesh.n_nodes, -1)
            local[free] = np.arange(len(free))
            robin_rows = local[bottom]
            scalar_nodes = bottom
            n_scalar = mesh.n_nodes
        else:
            system = StokesSystem.build(mesh)
            n2 = system.space.n_nodes
            A = system.saddle_matrix(sp.csr_matrix((n2, n2)))
            b = system.load(model.surface_load(), model.rho_g)
            Pt = p2_top_trace_matrix(system.space, self.points)
            z = sp.csr_matrix((len(self.points), n2 + mesh.n_nodes))
            P = sp.vstack([sp.hstack([Pt, z]), sp.hstack([sp.csr_matrix(Pt.shape), Pt,
                                                          sp.csr_matrix((len(self.points), mesh.n_nodes))])]).tocsr()
            scalar_nodes = np.unique(system.robin.edge_nodes)
            robin_rows = np.concatenate([scalar_nodes, n2 + scalar_nodes])
            n_scalar = n2
        self._condense(A.tocsr(), b, P.tocsr(), robin_rows, chunk)

        positions = np.full(n_scalar, -1)
        positions[scalar_nodes] = np.arange(len(scalar_nodes))
        self._robin_block = system.robin.dense_scatter(positions, len(scalar_nodes))
        self._n_comp = 1 if model.kind == LAPLACE else 2
        self._quad_x = system.robin.s.ravel() / mesh.Lx
        self._quad_shape = system.robin.s.shape

    def _condense(self, A, b, P, B, chunk):
        n = A.shape[0]
        I = np.setdiff1d(np.arange(n), B)
        A_II = A[I][:, I].tocsc()
        A_IB = A[I][:, B].toarray()
        A_BI = A[B][:, I]
        P_I, P_B = P[:, I], P[:, B].toarray()
        try:
            lu = spla.splu(A_II)
        except RuntimeError as exc:
            raise SolverError(f"interior block is singular: {exc}") from exc
        x_b = lu.solve(b[I])
        nB = len(B)
        S = A[B][:, B].toarray()
        M = -P_B
        for start in range(0, nB, chunk):
            cols = slice(start, min(start + chunk, nB))
            X = lu.solve(np.asfortranarray(A_IB[:, cols]))
            S[:, cols] -= A_BI @ X
            M[:, cols] += P_I @ X
        self._S = 0.5 * (S + S.T)
        self._g = b[B] - A_BI @ x_b
        self._c = P_I @ x_b
        self._M = M

    def beta_at_quadrature(self, coeffs) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=float)
        if not hasattr(self, "_basis") or self._basis.shape[1] != coeffs.size:
            self._basis = basis_matrix(coeffs.size // 2, self._quad_x)
        with np.errstate(over="ignore"):
            beta = self.model.m_beta + np.exp(self._basis @ coeffs)
        return beta.reshape(self._quad_shape)

    def __call__(self, coeffs) -> np.ndarray:
        beta_q = self.beta_at_quadrature(coeffs)
        if not np.all(np.isfinite(beta_q)) or np.any(beta_q <= 0):
            raise SolverError("Robin coefficient overflowed or vanished")
        R = self._robin_block(beta_q)
        if self._n_comp == 2:
            R = np.kron(np.eye(2), R)
        try:
            factor = sla.cho_factor(self._S + R, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"condensed Robin system not positive definite: {exc}") from exc
        x_B = sla.cho_solve(factor, self._g, check_finite=False)
        pred = self._c - self._M @ x_B
        if not np.all(np.isfinite(pred)):
            raise SolverError("forward map produced non-finite values")
        if self._n_comp == 2:
            pred = pred.reshape(2, -1).T
        return pred


@dataclass(frozen=True, eq=False)
class Dataset:
    model: ModelSpec
    mesh_shape: tuple  # (nx, ny, Lx, Ly)
    points: np.ndarray
    values: np.ndarray
    sigma_noise: float
    seed: int
    theta0: Optional[np.ndarray] = None

    def __post_init__(self):
        if len(self.points) != len(self.values):
            raise ValueError("points and values differ in length")
        if self.sigma_noise < 0:
            raise ValueError("sigma_noise must be non-negative")

    @property
    def N(self) -> int:
        return len(self.points)

    def mesh(self) -> Mesh:
        return build_rect_mesh(*self.mesh_shape)

    def to_dict(self) -> dict:
        nx, ny, Lx, Ly = self.mesh_shape
        return {
            "model": self.model.describe(),
            "mesh": {"nx": int(nx), "ny": int(ny), "Lx": float(Lx), "Ly": float(Ly)},
            "m_beta": float(self.model.m_beta),
            "h_descriptor": {"family": "sinusoid", **asdict(self.model.h)},
            "sigma_noise": float(self.sigma_noise),
            "seed": int(self.seed),
            "theta0": None if self.theta0 is None else coeffs_to_json(self.theta0),
            "points": [float(p) for p in self.points],
            "values": np.asarray(self.values, dtype=float).tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "Dataset":
        h = dict(d["h_descriptor"])
        if h.pop("family", "sinusoid") != "sinusoid":
            raise ValueError("only sinusoid surface loads are supported")
        model = ModelSpec(kind=d["model"]["kind"], h=Sinusoid(**h),
                          rho_g=tuple(d["model"]["rho_g"]), m_beta=d["m_beta"])
        m = d["mesh"]
        theta0 = d.get("theta0")
        return cls(model, (m["nx"], m["ny"], m["Lx"], m["Ly"]),
                   np.asarray(d["points"], dtype=float), np.asarray(d["values"], dtype=float),
                   float(d["sigma_noise"]), int(d["seed"]),
                   None if theta0 is None else coeffs_from_json(theta0))

    @classmethod
    def from_json(cls, text: str) -> "Dataset":
        return cls.from_dict(json.loads(text))


def generate_data(model: ModelSpec, mesh: Mesh, coeffs0, N: int, sigma_noise: float,
                  seed: int) -> Dataset:
    """Uniform random surface points and noisy forward values.

    ``sigma_noise = 0`` gives noiseless data (for testing).
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    if sigma_noise < 0:
        raise ValueError("sigma_noise must be non-negative")
    rng = np.random.default_rng(seed)
    points = rng.uniform(0.0, mesh.Lx, size=N)
    while np.any(points == 0.0):  # keep points strictly inside (0, Lx)
        points[points == 0.0] = rng.uniform(0.0, mesh.Lx, size=int(np.sum(points == 0.0)))
    clean = forward(model, mesh, coeffs0, points)
    noise = rng.standard_normal(clean.shape)
    return Dataset(model, (mesh.nx, mesh.ny, mesh.Lx, mesh.Ly), points, clean + sigma_noise * noise,
                   float(sigma_noise), int(seed), np.asarray(coeffs0, dtype=float).copy())


def log_likelihood(dataset: Dataset, predictions) -> float:
    """``-1/(2σ²) Σ |Y_i - pred_i|²`` with the Euclidean norm per observation."""
    pred = np.asarray(predictions, dtype=float)
    values = np.asarray(dataset.values, dtype=float)
    if pred.shape != values.shape:
        raise ValueError(f"predictions shape {pred.shape} does not match data {values.shape}")
    if dataset.sigma_noise <= 0:
        raise ValueError("log-likelihood needs a positive noise level")
    return -0.5 * float(np.sum((values - pred) ** 2)) / dataset.sigma_noise**2


def make_loglik(dataset: Dataset, mesh: Optional[Mesh] = None) -> Callable[[np.ndarray], float]:
    """``θ -> log-likelihood`` using the condensed forward map on ``mesh``.

    Defaults to the mesh the data were generated on.
    """
    fwd = ReducedForward(dataset.model, mesh or dataset.mesh(), dataset.points)

    def loglik(coeffs) -> float:
        return log_likelihood(dataset, fwd(coeffs))

    loglik.forward = fwd
    return loglik
