import numpy as np

from robin_bayes.experiments import (
    ConvergenceRow,
    comparison_table,
    compare_samplers,
    convergence_in_n,
    median_errors,
    stokes_smoke,
    z_scores,
)


def test_convergence_rows_cover_every_combination():
    rows = convergence_in_n(("matern",), (5, 10), (0, 1), iterations=200, mesh_shape=(10, 2, 1.0, 0.2))
    assert [(r.N, r.seed) for r in rows] == [(5, 0), (5, 1), (10, 0), (10, 1)]
    assert all(np.isfinite(r.error) and 0 <= r.coverage <= 1 for r in rows)


def test_median_and_table():
    rows = [ConvergenceRow("matern", N, s, 0.3, e, 1.0, 0.0)
            for N, s, e in [(100, 0, 3.0), (100, 1, 1.0), (100, 2, 2.0), (1000, 0, 0.5)]]
    assert median_errors(rows) == {("matern", 100): 2.0, ("matern", 1000): 0.5}
    table = comparison_table(rows)
    assert "median" in table and table.count("\n") >= 7


def test_sampler_comparison_runs_all_modes():
    res = compare_samplers(fine=(10, 2), coarse=(5, 1), N=5, iterations=300)
    assert [r.mode for r in res] == ["single", "two-level", "literal-two-level"]
    assert res[0].n_fine_evals == 300 and res[1].n_fine_evals <= 300
    assert z_scores(res[1], res[0]).shape == (5,)


def test_stokes_smoke_small():
    res = stokes_smoke(fine=(10, 2), coarse=(5, 1), N=5, iterations=200)
    assert np.isfinite(res.posterior_error) and res.prior_error > 0
    assert set(res.as_dict()) >= {"acceptance", "posterior_error", "prior_error", "mean"}
