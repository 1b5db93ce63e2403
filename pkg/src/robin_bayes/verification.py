"""Built-in verification suites: manufactured solutions and Monte Carlo checks.

Each check returns a :class:`CheckResult`; :func:`run_suite` aggregates them.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
import sympy as sym

from .mesh import BoundaryTag, build_rect_mesh

LADDER = ((20, 4), (40, 8), (80, 16))
LX, LY = 1.0, 0.2


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    values: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.detail} ({self.seconds:.1f}s)"


def observed_orders(errors) -> list[float]:
    e = np.asarray(errors, dtype=float)
    return list(np.log2(e[:-1] / e[1:]))


# -- manufactured solutions -------------------------------------------------

@lru_cache(maxsize=None)
def laplace_manufactured():
    """Exact solution vanishing on the sides with a positive Robin coefficient."""
    x, y = sym.symbols("x y")
    u = sym.sin(sym.pi * x) * sym.exp(y * (1 + x))
    f = -(sym.diff(u, x, 2) + sym.diff(u, y, 2))
    h = sym.diff(u, y).subs(y, LY)  # outward normal (0, 1) on top
    beta = sym.simplify(sym.diff(u, y) / u).subs(y, 0)  # -∂_ν u / u with ν = (0, -1)
    lam = lambda e, *v: sym.lambdify(v, e, "numpy")
    return {
        "u": _broadcast(lam(u, x, y)),
        "grad": (_broadcast(lam(sym.diff(u, x), x, y)), _broadcast(lam(sym.diff(u, y), x, y))),
        "f": _broadcast(lam(f, x, y)),
        "h": _broadcast(lam(h, x)),
        "beta": _broadcast(lam(beta, x)),
    }


@lru_cache(maxsize=None)
def stokes_manufactured():
    """Divergence-free velocity from a stream function plus a smooth pressure."""
    x, y = sym.symbols("x y")
    psi = sym.cos(sym.pi * x) * sym.sin(2 * y) + x**2 * y
    u = sym.Matrix([sym.diff(psi, y), -sym.diff(psi, x)])
    p = sym.sin(sym.pi * x) * sym.cos(y) + x
    beta = 1 + x
    grad = u.jacobian([x, y])
    lap = sym.Matrix([sym.diff(u[i], x, 2) + sym.diff(u[i], y, 2) for i in range(2)])
    f = -lap + sym.Matrix([sym.diff(p, x), sym.diff(p, y)])

    def traction(nu):
        nu = sym.Matrix(nu)
        return grad * nu - p * nu

    top = traction([0, 1]).subs(y, LY)
    left = traction([-1, 0]).subs(x, 0)
    right = traction([1, 0]).subs(x, LX)
    robin = (traction([0, -1]) + beta * u).subs(y, 0)

    def vec(expr, *v):
        fns = [_broadcast(sym.lambdify(v, e, "numpy")) for e in expr]
        return lambda *a: np.stack([fn(*a) for fn in fns], axis=-1)

    return {
        "u": vec(u, x, y),
        "p": _broadcast(sym.lambdify((x, y), p, "numpy")),
        "f": vec(f, x, y),
        "h": vec(top, x),
        "left": vec(left, y),
        "right": vec(right, y),
        "robin": vec(robin, x),
        "beta": _broadcast(sym.lambdify(x, beta, "numpy")),
    }


def _broadcast(fn: Callable) -> Callable:
    def wrapped(*args):
        args = [np.asarray(a, dtype=float) for a in args]
        shape = np.broadcast_shapes(*(a.shape for a in args))
        return np.broadcast_to(np.asarray(fn(*args), dtype=float), shape)
    return wrapped


def laplace_mms_errors(ladder=LADDER, stiffness_perturbation: float = 0.0):
    """L2 and H1 errors of the P1 solver over a refinement ladder.

    ``stiffness_perturbation`` scales one diagonal stiffness entry (the node
    nearest the domain centre) by ``1 + stiffness_perturbation``; it exists so
    the suite can be shown to catch a broken assembly.
    """
    from .fem_laplace import LaplaceSystem, p1_errors, solve_laplace

    ms = laplace_manufactured()
    l2, h1 = [], []
    for nx, ny in ladder:
        mesh = build_rect_mesh(nx, ny, LX, LY)
        system = LaplaceSystem.build(mesh)
        if stiffness_perturbation:
            K = system.stiffness.tolil()
            c = int(np.argmin(np.linalg.norm(mesh.nodes - [LX / 2, LY / 2], axis=1)))
            K[c, c] = K[c, c] * (1.0 + stiffness_perturbation)
            system = LaplaceSystem(mesh, K.tocsr(), system.robin, system.free)
        field_ = solve_laplace(mesh, ms["beta"], ms["h"], source=ms["f"], system=system)
        e0, e1 = p1_errors(mesh, field_.values, ms["u"], lambda X, Y: (ms["grad"][0](X, Y), ms["grad"][1](X, Y)))
        l2.append(e0)
        h1.append(e1)
    return l2, h1


def stokes_mms_errors(ladder=LADDER):
    """Velocity/pressure L2 errors and divergence residuals over a ladder."""
    from .fem_stokes import StokesSystem, solve_stokes, stokes_errors

    ms = stokes_manufactured()
    eu, ep, div = [], [], []
    for nx, ny in ladder:
        mesh = build_rect_mesh(nx, ny, LX, LY)
        system = StokesSystem.build(mesh)
        u, p = solve_stokes(
            mesh, ms["beta"], ms["h"], ms["f"], system=system,
            side_traction={BoundaryTag.GammaLeft: ms["left"], BoundaryTag.GammaRight: ms["right"]},
            robin_rhs=ms["robin"])
        a, b = stokes_errors(u, p, ms["u"], ms["p"])
        eu.append(a)
        ep.append(b)
        flat = np.concatenate([u.values[:, 0], u.values[:, 1]])
        div.append(float(np.linalg.norm(system.divergence @ flat)))
    return eu, ep, div


# -- Monte Carlo checks -----------------------------------------------------

def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        result = fn(*args, **kwargs)
        result.seconds = time.perf_counter() - t0
        return result
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_timed
def check_laplace_mms(stiffness_perturbation: float = 0.0) -> CheckResult:
    l2, h1 = laplace_mms_errors(stiffness_perturbation=stiffness_perturbation)
    o2, o1 = observed_orders(l2), observed_orders(h1)
    ok = min(o2) >= 1.8 and min(o1) >= 0.9
    return CheckResult("fem-laplace MMS", ok,
                       f"L2 orders {np.round(o2, 3).tolist()} (need >= 1.8), "
                       f"H1 orders {np.round(o1, 3).tolist()} (need >= 0.9)",
                       {"l2": l2, "h1": h1, "l2_orders": o2, "h1_orders": o1})


@_timed
def check_stokes_mms() -> CheckResult:
    eu, ep, div = stokes_mms_errors()
    ou, op = observed_orders(eu), observed_orders(ep)
    ok = min(ou) >= 2.5 and min(op) >= 1.5 and max(div) <= 1e-8
    return CheckResult("fem-stokes MMS", ok,
                       f"velocity orders {np.round(ou, 3).tolist()} (need >= 2.5), "
                       f"pressure orders {np.round(op, 3).tolist()} (need >= 1.5), "
                       f"max divergence residual {max(div):.2e} (need <= 1e-8)",
                       {"velocity": eu, "pressure": ep, "divergence": div})


@_timed
def check_prior(n_draws: int = 100_000, seed: int = 2024) -> CheckResult:
    """Coefficient variances and pointwise covariances of both prior families."""
    from .prior import Family, PriorSpec, basis_matrix, covariance, sample_coeffs

    rng = np.random.default_rng(seed)
    failures, worst = [], 0.0
    for spec in (PriorSpec(Family.Matern, alpha=1.0, K=2), PriorSpec(Family.SquaredExp, r=1.0, K=2)):
        draws = sample_coeffs(spec, rng, size=n_draws)
        target = spec.std() ** 2
        se = target * np.sqrt(2.0 / (n_draws - 1))
        z = np.abs(draws.var(axis=0, ddof=1) - target) / se
        worst = max(worst, float(z.max()))
        if np.any(z > 3):
            failures.append(f"{spec.family.value} variance z={z.max():.2f}")
        pairs = rng.uniform(0, 1, size=(5, 2))
        fx = draws @ basis_matrix(spec.K, pairs[:, 0]).T
        fy = draws @ basis_matrix(spec.K, pairs[:, 1]).T
        prod = (fx - fx.mean(0)) * (fy - fy.mean(0))
        emp = prod.sum(0) / (n_draws - 1)
        se_c = prod.std(0, ddof=1) / np.sqrt(n_draws)
        zc = np.abs(emp - covariance(spec, pairs[:, 0], pairs[:, 1])) / se_c
        worst = max(worst, float(zc.max()))
        if np.any(zc > 3):
            failures.append(f"{spec.family.value} covariance z={zc.max():.2f}")
    return CheckResult("prior Monte Carlo", not failures,
                       f"max |z| = {worst:.2f} (need <= 3)" + (f"; {failures}" if failures else ""),
                       {"max_z": worst})


@_timed
def check_pcn_prior_invariance(n_steps: int = 100_000, step: float = 0.5, seed: int = 7) -> CheckResult:
    """Flat likelihood: the chain must reproduce the prior and AR(1) correlation."""
    from .analysis import autocorrelation, effective_sample_size
    from .mcmc import ChainConfig, sample
    from .prior import Family, PriorSpec

    spec = PriorSpec(Family.Matern, alpha=1.0, K=2)
    cfg = ChainConfig(iterations=n_steps, burn_in=0, seed=seed)
    rec = sample(cfg, spec, lambda th: 0.0, np.zeros(spec.dim), step=step)
    x = rec.samples
    target = spec.std() ** 2
    sq = (x - x.mean(0)) ** 2
    se = np.array([sq[:, j].std(ddof=1) / np.sqrt(effective_sample_size(sq[:, j])) for j in range(spec.dim)])
    z = np.abs(sq.mean(0) - target) / se
    lag1 = np.array([autocorrelation(x[:, j])[1] for j in range(spec.dim)])
    expect = np.sqrt(1 - step**2)
    ok = bool(np.all(z <= 3) and np.all(np.abs(lag1 - expect) <= 0.02) and rec.acceptance_rate == 1.0)
    return CheckResult("pCN prior invariance", ok,
                       f"variance max |z| = {z.max():.2f} (need <= 3), lag-1 autocorrelation "
                       f"{np.round(lag1, 4).tolist()} vs {expect:.4f} +- 0.02",
                       {"z": z.tolist(), "lag1": lag1.tolist()})


def linear_gaussian_problem(seed: int = 3, n_obs: int = 10, sigma: float = 0.5):
    """Random linear forward map with a Matérn prior; returns the closed-form posterior too."""
    from .prior import Family, PriorSpec, sample_coeffs

    spec = PriorSpec(Family.Matern, alpha=1.0, K=2)
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n_obs, spec.dim))
    truth = sample_coeffs(spec, rng)
    y = A @ truth + sigma * rng.standard_normal(n_obs)
    precision = A.T @ A / sigma**2 + np.diag(spec.std() ** -2.0)
    cov = np.linalg.inv(precision)
    mean = cov @ A.T @ y / sigma**2

    def loglik(theta):
        r = y - A @ theta
        return -0.5 * float(r @ r) / sigma**2

    return spec, loglik, mean, cov


@_timed
def check_conjugate(n_steps: int = 200_000, seed: int = 11) -> CheckResult:
    """pCN against the exact Gaussian posterior of a linear model."""
    from .analysis import mc_standard_error
    from .mcmc import ChainConfig, sample

    spec, loglik, mean, cov = linear_gaussian_problem()
    burn = n_steps // 10
    cfg = ChainConfig(iterations=n_steps + burn, burn_in=burn, gamma0=0.02, seed=seed)
    rec = sample(cfg, spec, loglik, np.zeros(spec.dim))
    x = rec.samples
    se_mean = np.array([mc_standard_error(x[:, j]) for j in range(spec.dim)])
    z_mean = np.abs(x.mean(0) - mean) / se_mean
    sq = (x - x.mean(0)) ** 2
    se_var = np.array([mc_standard_error(sq[:, j]) for j in range(spec.dim)])
    z_var = np.abs(sq.mean(0) - np.diag(cov)) / se_var
    ok = bool(np.all(z_mean <= 3) and np.all(z_var <= 3))
    return CheckResult("conjugate Gaussian oracle", ok,
                       f"mean max |z| = {z_mean.max():.2f}, variance max |z| = {z_var.max():.2f} "
                       f"(need <= 3), acceptance {rec.acceptance_rate:.3f}",
                       {"z_mean": z_mean.tolist(), "z_var": z_var.tolist()})


SUITES = {
    "fem": (check_laplace_mms, check_stokes_mms),
    "prior": (check_prior,),
    "mcmc": (check_pcn_prior_invariance, check_conjugate),
}


def run_suite(name: str, **overrides) -> list[CheckResult]:
    """Run ``fem``, ``prior``, ``mcmc`` or ``all``.

    ``overrides`` is a harness hook: ``stiffness_perturbation`` reaches the
    Laplace MMS check.
    """
    names = list(SUITES) if name == "all" else [name]
    if any(n not in SUITES for n in names):
        raise ValueError(f"unknown suite {name!r}")
    results = []
    for n in names:
        for check in SUITES[n]:
            if check is check_laplace_mms and "stiffness_perturbation" in overrides:
                results.append(check(overrides["stiffness_perturbation"]))
            else:
                results.append(check())
    return results
