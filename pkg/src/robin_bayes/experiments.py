"""Desk-scale experiments: convergence in N, delayed acceptance vs single level, Stokes smoke.

Each function returns plain rows so scripts can print tables and tests can
assert on them.
"""
from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .analysis import mc_standard_error, posterior_mean, reconstruction_error, summarize
from .mcmc import LITERAL, SINGLE, TWO_LEVEL, ChainConfig, run_chain
from .mesh import build_rect_mesh
from .observation import LAPLACE, STOKES, ModelSpec, Sinusoid, generate_data
from .prior import Family, PriorSpec

THETA0 = np.array([-0.6, 0.7, 2.0, 0.1, -0.08])


@dataclass(frozen=True)
class ConvergenceRow:
    family: str
    N: int
    seed: int
    acceptance: float
    error: float
    coverage: float
    seconds: float


def _convergence_job(family: str, N: int, seed: int, iterations: int, mesh_shape: tuple,
                     sigma: float) -> ConvergenceRow:
    t0 = time.perf_counter()
    mesh = build_rect_mesh(*mesh_shape)
    ds = generate_data(ModelSpec(LAPLACE), mesh, THETA0, N, sigma, seed)
    cfg = ChainConfig(iterations=iterations, burn_in=iterations // 5, thinning=10, seed=100 + seed)
    rec = run_chain(cfg, PriorSpec(Family(family)), ds)
    s = summarize(rec, THETA0)
    return ConvergenceRow(family, N, seed, rec.acceptance_rate, s.errors["theta_L2"], s.coverage,
                          time.perf_counter() - t0)


def convergence_in_n(families=("matern", "squared_exp"), Ns=(100, 1000), seeds=(0, 1, 2), *,
                     iterations: int = 200_000, mesh_shape=(100, 20, 1.0, 0.2), sigma: float = 0.1,
                     workers: int = 1) -> list[ConvergenceRow]:
    """Posterior-mean θ error on (0.05, 0.95) for every (prior, N, noise seed).

    The chain seed is ``100 + seed`` so data and chain streams never coincide.
    """
    jobs = [(f, N, s, iterations, tuple(mesh_shape), sigma) for f in families for N in Ns for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_convergence_job, *zip(*jobs)))
    return [_convergence_job(*j) for j in jobs]


def median_errors(rows) -> dict:
    """``{(family, N): median error}``."""
    keys = sorted({(r.family, r.N) for r in rows})
    return {k: float(np.median([r.error for r in rows if (r.family, r.N) == k])) for k in keys}


def comparison_table(rows) -> str:
    lines = [f"{'prior':<12} {'N':>5} {'seed':>4} {'accept':>7} {'L2 error':>9} {'coverage':>8}"]
    for r in rows:
        lines.append(f"{r.family:<12} {r.N:>5} {r.seed:>4} {r.acceptance:>7.3f} {r.error:>9.4f} {r.coverage:>8.3f}")
    lines.append("")
    lines.append(f"{'prior':<12} {'N':>5} {'median L2 error':>16}")
    for (fam, N), med in median_errors(rows).items():
        lines.append(f"{fam:<12} {N:>5} {med:>16.4f}")
    return "\n".join(lines)


@dataclass(frozen=True)
class SamplerComparison:
    mode: str
    mean: np.ndarray
    mcse: np.ndarray
    acceptance: float
    n_fine_evals: int
    seconds: float


def compare_samplers(modes=(SINGLE, TWO_LEVEL, LITERAL), *, fine=(40, 8), coarse=(20, 4), N: int = 50,
                     sigma: float = 0.1, data_seed: int = 0, chain_seed: int = 5,
                     iterations: int = 200_000, family: str = "matern") -> list[SamplerComparison]:
    """Run each sampler on one Laplace dataset generated on the fine mesh."""
    fine_mesh = build_rect_mesh(*fine, 1.0, 0.2)
    coarse_mesh = build_rect_mesh(*coarse, 1.0, 0.2)
    ds = generate_data(ModelSpec(LAPLACE), fine_mesh, THETA0, N, sigma, data_seed)
    cfg = ChainConfig(iterations=iterations, burn_in=iterations // 5, thinning=1, seed=chain_seed)
    out = []
    for mode in modes:
        t0 = time.perf_counter()
        rec = run_chain(cfg, PriorSpec(Family(family)), ds, fine_mesh, mode=mode,
                        coarse_mesh=coarse_mesh if mode != SINGLE else None)
        out.append(SamplerComparison(mode, posterior_mean(rec),
                                     np.array([mc_standard_error(c) for c in rec.samples.T]),
                                     rec.acceptance_rate, rec.n_fine_evals, time.perf_counter() - t0))
    return out


def z_scores(a: SamplerComparison, b: SamplerComparison) -> np.ndarray:
    return (a.mean - b.mean) / np.sqrt(a.mcse**2 + b.mcse**2)


@dataclass(frozen=True)
class StokesSmoke:
    acceptance: float
    posterior_error: float
    prior_error: float
    n_failed: int
    n_fine_evals: int
    mean: np.ndarray
    seconds: float

    def as_dict(self) -> dict:
        d = asdict(self)
        d["mean"] = self.mean.tolist()
        return d


def stokes_smoke(*, fine=(100, 20), coarse=(50, 10), N: int = 100, sigma: float = 0.5,
                 rho_g=(5.0, 5.0), data_seed: int = 0, chain_seed: int = 1,
                 iterations: int = 50_000, mode: str = TWO_LEVEL) -> StokesSmoke:
    """Scaled two-level Stokes run with a squared-exponential prior.

    The prior-mean error is the error of θ ≡ 0, the reconstruction one gets
    with no data.
    """
    t0 = time.perf_counter()
    fine_mesh = build_rect_mesh(*fine, 1.0, 0.2)
    model = ModelSpec(STOKES, Sinusoid(), tuple(rho_g))
    ds = generate_data(model, fine_mesh, THETA0, N, sigma, data_seed)
    cfg = ChainConfig(iterations=iterations, burn_in=iterations // 5, thinning=10, seed=chain_seed)
    rec = run_chain(cfg, PriorSpec(Family.SquaredExp), ds, fine_mesh, mode=mode,
                    coarse_mesh=build_rect_mesh(*coarse, 1.0, 0.2) if mode != SINGLE else None)
    mean = posterior_mean(rec)
    return StokesSmoke(rec.acceptance_rate, reconstruction_error(mean, THETA0),
                       reconstruction_error(np.zeros_like(THETA0), THETA0), rec.n_failed,
                       rec.n_fine_evals, mean, time.perf_counter() - t0)
