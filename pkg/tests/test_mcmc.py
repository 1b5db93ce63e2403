import math

import numpy as np
import pytest

from robin_bayes.analysis import mc_standard_error
from robin_bayes.fem_common import SolverError
from robin_bayes.mcmc import (
    LITERAL,
    TWO_LEVEL,
    ChainAborted,
    ChainConfig,
    ChainState,
    adapt_step,
    pcn_propose,
    pcn_step,
    sample,
    two_level_step,
)
from robin_bayes.prior import Family, PriorSpec, sample_coeffs
from robin_bayes.verification import check_conjugate, check_pcn_prior_invariance

SPEC = PriorSpec(Family.Matern, alpha=1.0, K=2)
SCALAR = PriorSpec(Family.Matern, alpha=1.0, K=0)


def quad(center, precision):
    return lambda th: -0.5 * precision * float(np.sum((np.asarray(th) - center) ** 2))


def test_unit_step_is_independent_prior_draw():
    theta = np.full(5, 3.0)
    a = pcn_propose(theta, 1.0, SPEC, np.random.default_rng(1))
    b = sample_coeffs(SPEC, np.random.default_rng(1))
    np.testing.assert_array_equal(a, b)


def test_flat_likelihood_accepts_everything():
    state = ChainState(np.zeros(5), 0.0, 0.3)
    rng = np.random.default_rng(0)
    for _ in range(50):
        state = pcn_step(state, SPEC, lambda th: 0.0, rng)
        assert state.accepted
    assert state.accept_count_window == 50


def test_prior_invariance():
    assert check_pcn_prior_invariance(n_steps=50_000).passed


def test_conjugate_oracle():
    assert check_conjugate(n_steps=100_000).passed


def test_adapt_step_examples():
    assert adapt_step(0.1, 0.33, 0.33, 1.0) == 0.1
    assert adapt_step(0.1, 1.0, 0.33, 1.0) == pytest.approx(0.1 * math.exp(0.67))
    assert adapt_step(0.9, 1.0, 0.33, 1.0) == 1.0
    assert adapt_step(0.1, 0.0, 0.33, 1.0) < 0.1
    assert adapt_step(1e-12, 0.0, 0.33, 5.0) == 1e-12
    steps = [adapt_step(0.05, a, 0.33, 2.0) for a in np.linspace(0, 1, 11)]
    assert np.all(np.diff(steps) > 0)


@pytest.mark.parametrize("iterations, burn, thin, expected", [(11, 10, 1, 1), (200, 100, 10, 10), (100, 0, 7, 15)])
def test_record_bookkeeping(iterations, burn, thin, expected):
    cfg = ChainConfig(iterations=iterations, burn_in=burn, thinning=thin, adapt_interval=10)
    rec = sample(cfg, SPEC, quad(0.0, 1.0), np.zeros(5))
    assert len(rec) == expected
    assert len(rec.logliks) == len(rec.accept_flags) == len(rec.step_trace) == len(rec.iterations) == expected
    assert rec.iterations[0] == burn


def test_deterministic():
    cfg = ChainConfig(iterations=3000, burn_in=1000, adapt_interval=100, seed=5)
    a = sample(cfg, SPEC, quad(0.3, 4.0), np.zeros(5))
    b = sample(cfg, SPEC, quad(0.3, 4.0), np.zeros(5))
    np.testing.assert_array_equal(a.samples, b.samples)
    np.testing.assert_array_equal(a.step_trace, b.step_trace)


def test_adaptation_frozen_after_burn_in():
    cfg = ChainConfig(iterations=20_000, burn_in=10_000, adapt_interval=500, gamma0=1e-7, seed=2)
    rec = sample(cfg, SPEC, quad(0.0, 50.0), np.zeros(5))
    assert np.all(rec.step_trace == rec.step_trace[0])
    assert rec.step_trace[0] > math.sqrt(2e-7)
    assert 0.2 < rec.acceptance_rate < 0.5


def test_invalid_config():
    with pytest.raises(ValueError):
        ChainConfig(iterations=10, burn_in=10)
    with pytest.raises(ValueError):
        ChainConfig(target_accept=1.0)


def _run_paths(step_fn, n=300, seed=9):
    rng = np.random.default_rng(seed)
    state = ChainState(np.zeros(5), 0.0, 0.4, loglik_coarse=0.0)
    path = []
    for _ in range(n):
        state = step_fn(state, rng)
        path.append(state.theta.copy())
    return np.array(path)


def test_two_level_equal_levels_is_pcn():
    fine = quad(0.5, 3.0)
    a = _run_paths(lambda s, r: pcn_step(s, SPEC, fine, r))
    b = _run_paths(lambda s, r: two_level_step(s, SPEC, fine, fine, r))
    np.testing.assert_array_equal(a, b)


def test_two_level_flat_coarse_is_pcn():
    fine = quad(-0.2, 2.0)
    a = _run_paths(lambda s, r: pcn_step(s, SPEC, fine, r))
    b = _run_paths(lambda s, r: two_level_step(s, SPEC, lambda th: 0.0, fine, r))
    np.testing.assert_array_equal(a, b)


def test_stage_two_certain_when_levels_agree():
    fine = quad(0.5, 3.0)
    rng = np.random.default_rng(3)
    state = ChainState(np.zeros(5), fine(np.zeros(5)), 0.5, loglik_coarse=fine(np.zeros(5)))
    for _ in range(200):
        new = two_level_step(state, SPEC, fine, fine, rng)
        if new.fine_evaluated:
            assert new.accepted
        state = new


def test_delayed_acceptance_exact_where_literal_is_biased():
    # prior N(0, 1); fine likelihood N(1, 1/4); coarse screen centred elsewhere
    fine, coarse = quad(1.0, 4.0), quad(0.2, 4.0)
    post_mean = 4.0 / 5.0
    cfg = ChainConfig(iterations=120_000, burn_in=20_000, adapt_interval=1000, gamma0=0.1, seed=4)
    exact = sample(cfg, SCALAR, fine, np.zeros(1), coarse_loglik=coarse, mode=TWO_LEVEL)
    se = mc_standard_error(exact.samples[:, 0])
    assert abs(exact.samples.mean() - post_mean) <= 3 * se
    literal = sample(cfg, SCALAR, fine, np.zeros(1), coarse_loglik=coarse, mode=LITERAL)
    se_l = mc_standard_error(literal.samples[:, 0])
    assert abs(literal.samples.mean() - post_mean) > 5 * se_l
    assert exact.n_fine_evals < cfg.iterations


def test_solver_failure_is_rejection():
    def flaky(th):
        if th[0] > 0.5:
            raise SolverError("boom")
        return 0.0
    cfg = ChainConfig(iterations=2000, burn_in=0, gamma0=0.3, seed=1)
    rec = sample(cfg, SCALAR, flaky, np.zeros(1))
    assert rec.n_failed > 0
    assert np.all(rec.samples[:, 0] <= 0.5)


def test_persistent_failure_aborts():
    def broken(th):
        if np.any(th != 0):
            raise SolverError("always")
        return 0.0
    with pytest.raises(ChainAborted):
        sample(ChainConfig(iterations=500, burn_in=0), SPEC, broken, np.zeros(5))
