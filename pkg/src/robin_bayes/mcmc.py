"""Adaptive preconditioned Crank-Nicolson sampling, single- and two-level.

The proposal ``θ' = sqrt(1 - s²) θ + s ξ`` with ``ξ`` a prior draw keeps the
Gaussian prior invariant, so acceptance only involves likelihood ratios. The
two-level variant screens each proposal with a coarse-mesh likelihood and
applies a second-stage correction so the fine-mesh posterior stays exactly
invariant; ``literal`` mode drops that correction.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .fem_common import SolverError
from .prior import PriorSpec, sample_coeffs

logger = logging.getLogger(__name__)

LogLik = Callable[[np.ndarray], float]

SINGLE = "single"
TWO_LEVEL = "two-level"
LITERAL = "literal-two-level"
MODES = (SINGLE, TWO_LEVEL, LITERAL)

STEP_MIN = 1e-12


class ChainAborted(RuntimeError):
    """Too many proposals failed the forward solve."""


@dataclass(frozen=True)
class ChainConfig:
    iterations: int = 50_000
    burn_in: int = 10_000
    gamma0: float = 1e-7
    target_accept: float = 0.33
    adapt_interval: int = 1000
    adapt_gain: float = 2.0
    thinning: int = 1
    seed: int = 0
    init: str = "truth"  # "truth" (plus N(0, init_shift²) noise) or "prior"
    init_shift: float = 0.5

    def __post_init__(self):
        if self.iterations < 1 or self.burn_in < 0 or self.burn_in >= self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")
        if not self.gamma0 > 0 or initial_step(self.gamma0) > 1:
            raise ValueError("gamma0 must lie in (0, 1/2]")
        if not 0 < self.target_accept < 1:
            raise ValueError("target_accept must lie in (0, 1)")
        if self.adapt_interval < 1 or self.thinning < 1 or not self.adapt_gain > 0:
            raise ValueError("adapt_interval, thinning and adapt_gain must be positive")
        if self.init not in ("truth", "prior"):
            raise ValueError(f"unknown init {self.init!r}")


def initial_step(gamma0: float) -> float:
    return math.sqrt(2.0 * gamma0)


@dataclass(frozen=True)
class ChainState:
    theta: np.ndarray
    loglik: float
    step: float
    accept_count_window: int = 0
    accepted: bool = False
    loglik_coarse: Optional[float] = None
    fine_evaluated: bool = False
    failed: bool = False


@dataclass
class ChainRecord:
    """Post-burn-in, thinned samples with aligned per-sample bookkeeping."""

    iterations: np.ndarray
    samples: np.ndarray  # (n, dim)
    logliks: np.ndarray
    accept_flags: np.ndarray
    step_trace: np.ndarray
    acceptance_rate: float = float("nan")  # over every post-burn-in proposal
    n_failed: int = 0
    n_fine_evals: int = 0
    n_coarse_accepted: int = 0
    stats: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.samples)


def _accept(log_ratio: float, rng: np.random.Generator) -> bool:
    # a uniform is drawn only when the move is not certain to be accepted
    if log_ratio >= 0:
        return True
    if not math.isfinite(log_ratio):
        return False
    return math.log(rng.random()) < log_ratio


def pcn_propose(theta: np.ndarray, step: float, spec: PriorSpec, rng: np.random.Generator) -> np.ndarray:
    xi = sample_coeffs(spec, rng)
    return math.sqrt(max(0.0, 1.0 - step * step)) * theta + step * xi


def _safe_eval(fn: LogLik, theta: np.ndarray) -> float:
    try:
        value = float(fn(theta))
    except (SolverError, ValueError, np.linalg.LinAlgError) as exc:
        logger.warning("forward solve failed, rejecting proposal: %s", exc)
        return -math.inf
    return value if math.isfinite(value) else -math.inf


def pcn_step(state: ChainState, spec: PriorSpec, loglik_fn: LogLik,
             rng: np.random.Generator) -> ChainState:
    """One Metropolis-Hastings step with a pCN proposal."""
    prop = pcn_propose(state.theta, state.step, spec, rng)
    ll = _safe_eval(loglik_fn, prop)
    failed = ll == -math.inf
    if _accept(ll - state.loglik, rng):
        return replace(state, theta=prop, loglik=ll, accepted=True, failed=failed,
                       accept_count_window=state.accept_count_window + 1, fine_evaluated=True)
    return replace(state, accepted=False, failed=failed, fine_evaluated=True)


def two_level_step(state: ChainState, spec: PriorSpec, coarse_loglik: LogLik, fine_loglik: LogLik,
                   rng: np.random.Generator, literal: bool = False) -> ChainState:
    """Delayed-acceptance step: coarse screen, fine evaluation only on a pass.

    The second-stage log ratio is ``Δℓ_fine - Δℓ_coarse``; with ``literal``
    it is just ``Δℓ_fine``, which does not target the fine posterior.
    """
    if state.loglik_coarse is None:
        raise ValueError("two-level state needs a cached coarse log-likelihood")
    prop = pcn_propose(state.theta, state.step, spec, rng)
    llc = _safe_eval(coarse_loglik, prop)
    d_coarse = llc - state.loglik_coarse
    if not _accept(d_coarse, rng):
        return replace(state, accepted=False, failed=llc == -math.inf, fine_evaluated=False)
    llf = _safe_eval(fine_loglik, prop)
    d_fine = llf - state.loglik
    log_ratio = d_fine if literal else d_fine - d_coarse
    if llf == -math.inf:
        log_ratio = -math.inf
    if _accept(log_ratio, rng):
        return replace(state, theta=prop, loglik=llf, loglik_coarse=llc, accepted=True,
                       failed=False, fine_evaluated=True,
                       accept_count_window=state.accept_count_window + 1)
    return replace(state, accepted=False, failed=llf == -math.inf, fine_evaluated=True)


def adapt_step(step: float, observed_accept: float, target: float, gain: float) -> float:
    """Multiplicative controller ``step * exp(gain * (observed - target))``, clamped to (0, 1]."""
    new = step * math.exp(gain * (observed_accept - target))
    return min(1.0, max(STEP_MIN, new))


def sample(config: ChainConfig, spec: PriorSpec, loglik_fn: LogLik, init: np.ndarray, *,
           coarse_loglik: Optional[LogLik] = None, mode: str = SINGLE,
           rng: Optional[np.random.Generator] = None,
           step: Optional[float] = None) -> ChainRecord:
    """Run a chain from ``init``.

    The step size adapts every ``adapt_interval`` iterations during burn-in
    and is frozen afterwards. ``step`` overrides the initial ``sqrt(2 γ0)``.
    Aborts with :class:`ChainAborted` once more than half of at least 100
    proposals have failed the forward solve.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if mode != SINGLE and coarse_loglik is None:
        raise ValueError("two-level modes need a coarse log-likelihood")
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    theta = np.asarray(init, dtype=float).copy()
    ll = _safe_eval(loglik_fn, theta)
    if ll == -math.inf:
        raise ChainAborted("forward solve failed at the initial state")
    state = ChainState(theta, ll, step if step is not None else initial_step(config.gamma0),
                       loglik_coarse=None if mode == SINGLE else _safe_eval(coarse_loglik, theta))

    n_keep = len(range(config.burn_in, config.iterations, config.thinning))
    its = np.empty(n_keep, dtype=np.int64)
    samples = np.empty((n_keep, theta.size))
    logliks = np.empty(n_keep)
    flags = np.empty(n_keep, dtype=bool)
    steps = np.empty(n_keep)
    k = n_failed = n_fine = n_coarse_acc = post_acc = 0
    for i in range(config.iterations):
        if mode == SINGLE:
            state = pcn_step(state, spec, loglik_fn, rng)
        else:
            state = two_level_step(state, spec, coarse_loglik, loglik_fn, rng, literal=mode == LITERAL)
            n_coarse_acc += state.fine_evaluated
        n_fine += state.fine_evaluated
        n_failed += state.failed
        if n_failed > 50 and n_failed > 0.5 * (i + 1):
            raise ChainAborted(f"{n_failed} of {i + 1} proposals failed the forward solve")
        if i >= config.burn_in:
            post_acc += state.accepted
            if (i - config.burn_in) % config.thinning == 0:
                its[k], samples[k], logliks[k] = i, state.theta, state.loglik
                flags[k], steps[k] = state.accepted, state.step
                k += 1
        elif (i + 1) % config.adapt_interval == 0:
            rate = state.accept_count_window / config.adapt_interval
            new_step = adapt_step(state.step, rate, config.target_accept, config.adapt_gain)
            logger.debug("iteration %d: acceptance %.3f, step %.3g -> %.3g", i + 1, rate, state.step, new_step)
            state = replace(state, step=new_step, accept_count_window=0)
    n_post = config.iterations - config.burn_in
    return ChainRecord(its, samples, logliks, flags, steps,
                       acceptance_rate=post_acc / n_post, n_failed=n_failed,
                       n_fine_evals=n_fine, n_coarse_accepted=n_coarse_acc)


def initial_state(config: ChainConfig, spec: PriorSpec, truth: Optional[np.ndarray],
                  rng: np.random.Generator) -> np.ndarray:
    """Ground truth plus an ``N(0, init_shift²)`` shift per coefficient, or a prior draw."""
    if config.init == "prior" or truth is None:
        return sample_coeffs(spec, rng)
    truth = np.asarray(truth, dtype=float)
    return truth + config.init_shift * rng.standard_normal(truth.shape)


def run_chain(config: ChainConfig, spec: PriorSpec, dataset, mesh=None, init=None, *,
              mode: str = SINGLE, coarse_mesh=None) -> ChainRecord:
    """Sample the posterior for a dataset.

    ``mesh`` defaults to the data mesh; two-level modes need ``coarse_mesh``.
    ``init`` defaults to :func:`initial_state` from the dataset's ground truth,
    drawn from the chain's own seeded stream.
    """
    from .observation import make_loglik

    rng = np.random.default_rng(config.seed)
    if init is None:
        init = initial_state(config, spec, dataset.theta0, rng)
    fine = make_loglik(dataset, mesh)
    coarse = make_loglik(dataset, coarse_mesh) if mode != SINGLE else None
    if mode != SINGLE and coarse_mesh is None:
        raise ValueError("two-level modes need a coarse mesh")
    return sample(config, spec, fine, init, coarse_loglik=coarse, mode=mode, rng=rng)
