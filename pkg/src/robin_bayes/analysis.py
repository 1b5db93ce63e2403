"""Posterior summaries, reconstruction errors and sampler diagnostics."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .mcmc import ChainRecord
from .prior import basis_matrix, coeffs_to_json

ERROR_GRID = 1000


def _samples(record) -> np.ndarray:
    s = record.samples if isinstance(record, ChainRecord) else np.asarray(record, dtype=float)
    if s.ndim != 2 or len(s) == 0:
        raise ValueError("record holds no samples")
    return s


def posterior_mean(record) -> np.ndarray:
    """Coefficient-wise mean of the recorded samples."""
    return _samples(record).mean(axis=0)


def beta_curves(samples: np.ndarray, grid, m_beta: float = 0.0) -> np.ndarray:
    """``β_s(x) = m_β + exp(θ_s(x))`` for every sample, shape ``(n_samples, len(grid))``."""
    grid = np.asarray(grid, dtype=float)
    if np.any(grid < 0) or np.any(grid > 1):
        raise ValueError("grid must lie in [0, 1]")
    samples = np.atleast_2d(samples)
    return m_beta + np.exp(samples @ basis_matrix(samples.shape[1] // 2, grid).T)


def credible_band(record, grid, level: float = 0.95,
                  transform: Optional[Callable[[np.ndarray], np.ndarray]] = None):
    """Pointwise equal-tailed band at ``level``.

    ``transform`` maps a ``(n_samples, len(grid))`` array of θ-curves to the
    quantity of interest; it defaults to ``exp`` (the Robin coefficient with
    ``m_β = 0``).
    """
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    s = _samples(record)
    grid = np.asarray(grid, dtype=float)
    if np.any(grid < 0) or np.any(grid > 1):
        raise ValueError("grid must lie in [0, 1]")
    theta_curves = s @ basis_matrix(s.shape[1] // 2, grid).T
    curves = np.exp(theta_curves) if transform is None else transform(theta_curves)
    lower = np.quantile(curves, (1 - level) / 2, axis=0)
    upper = np.quantile(curves, (1 + level) / 2, axis=0)
    return lower, upper


def reconstruction_error(mean_coeffs, truth, epsilon: float = 0.05, norm: str = "L2") -> float:
    """Distance between two θ-curves on ``(ε, 1-ε)``.

    ``Linf`` takes the maximum over a 1000-point uniform grid; ``L2`` uses
    the composite trapezoid rule on the same grid.
    """
    if not 0 <= epsilon < 0.5:
        raise ValueError("epsilon must lie in [0, 1/2)")
    diff = np.asarray(mean_coeffs, dtype=float) - np.asarray(truth, dtype=float)
    grid = np.linspace(epsilon, 1 - epsilon, ERROR_GRID)
    d = basis_matrix(diff.size // 2, grid) @ diff
    if norm == "Linf":
        return float(np.max(np.abs(d)))
    if norm == "L2":
        return float(math.sqrt(np.trapezoid(d * d, grid)))
    raise ValueError(f"unknown norm {norm!r}")


def autocorrelation(series) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    n = len(x)
    x = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n] / n
    return acov / acov[0]


def effective_sample_size(series) -> float:
    """``N / (1 + 2 Σ ρ_t)`` truncated by Geyer's initial positive sequence.

    A constant series has ESS 1.
    """
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < 10:
        raise ValueError("ESS needs at least 10 values")
    if np.ptp(x) == 0:
        return 1.0
    rho = autocorrelation(x)
    tau = -1.0
    for m in range(0, n // 2):
        pair = rho[2 * m] + rho[2 * m + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
    return float(n / max(tau, 1.0 / n))


def mc_standard_error(series) -> float:
    x = np.asarray(series, dtype=float)
    return float(x.std(ddof=1) / math.sqrt(effective_sample_size(x)))


@dataclass
class PosteriorSummary:
    mean_coeffs: np.ndarray
    grid: np.ndarray
    beta_mean_curve: np.ndarray
    band_lower: np.ndarray
    band_upper: np.ndarray
    errors: dict
    diagnostics: dict
    truth: Optional[np.ndarray] = None
    level: float = 0.95
    m_beta: float = 0.0
    coverage: Optional[float] = field(default=None)

    def to_json(self) -> str:
        d = {
            "mean_coeffs": coeffs_to_json(self.mean_coeffs),
            "truth": None if self.truth is None else coeffs_to_json(self.truth),
            "errors": {k: float(v) for k, v in self.errors.items()},
            "diagnostics": _plain(self.diagnostics),
            "level": self.level,
            "m_beta": self.m_beta,
            "coverage": self.coverage,
        }
        return json.dumps(d, indent=1, sort_keys=True) + "\n"

    def band_csv(self) -> str:
        truth = (beta_curves(self.truth, self.grid, self.m_beta)[0]
                 if self.truth is not None else np.full(len(self.grid), np.nan))
        return _csv(["x", "lower", "mean", "upper", "truth"],
                    zip(self.grid, self.band_lower, self.beta_mean_curve, self.band_upper, truth))


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def summarize(record: ChainRecord, truth=None, *, m_beta: float = 0.0, epsilon: float = 0.05,
              level: float = 0.95, grid_size: int = 200) -> PosteriorSummary:
    """Posterior mean, β band on ``(ε, 1-ε)``, errors against ``truth`` and diagnostics."""
    s = _samples(record)
    mean = posterior_mean(s)
    grid = np.linspace(epsilon, 1 - epsilon, grid_size)
    lower, upper = credible_band(s, grid, level, transform=lambda t: m_beta + np.exp(t))
    errors, coverage = {}, None
    if truth is not None:
        truth = np.asarray(truth, dtype=float)
        errors = {
            "theta_L2": reconstruction_error(mean, truth, epsilon, "L2"),
            "theta_Linf": reconstruction_error(mean, truth, epsilon, "Linf"),
        }
        fine = np.linspace(epsilon, 1 - epsilon, ERROR_GRID)
        db = beta_curves(mean, fine, m_beta)[0] - beta_curves(truth, fine, m_beta)[0]
        errors["beta_L2"] = float(math.sqrt(np.trapezoid(db * db, fine)))
        errors["beta_Linf"] = float(np.max(np.abs(db)))
        tb = beta_curves(truth, grid, m_beta)[0]
        coverage = float(np.mean((tb >= lower) & (tb <= upper)))
    diagnostics = {
        "n_samples": len(s),
        "ess": [effective_sample_size(s[:, j]) if len(s) >= 10 else float("nan") for j in range(s.shape[1])],
    }
    if isinstance(record, ChainRecord):
        diagnostics["acceptance_rate"] = record.acceptance_rate
        diagnostics["n_failed"] = record.n_failed
        diagnostics["n_fine_evals"] = record.n_fine_evals
    return PosteriorSummary(mean, grid, beta_curves(mean, grid, m_beta)[0], lower, upper,
                            errors, diagnostics, truth, level, m_beta, coverage)


def histogram_csv(record) -> str:
    """Raw samples, one column per coefficient, for external histogramming."""
    s = _samples(record)
    K = s.shape[1] // 2
    return _csv([f"theta_{k}" for k in range(-K, K + 1)], s)


def trace_csv(record: ChainRecord) -> str:
    K = record.samples.shape[1] // 2
    header = ["iteration"] + [f"theta_{k}" for k in range(-K, K + 1)] + ["loglik", "step", "accepted"]
    rows = [[int(i), *map(float, th), float(ll), float(st), int(a)]
            for i, th, ll, st, a in zip(record.iterations, record.samples, record.logliks,
                                         record.step_trace, record.accept_flags)]
    return _csv(header, rows)


def read_trace_csv(text: str, **record_fields) -> ChainRecord:
    """Inverse of :func:`trace_csv`; extra ChainRecord fields pass through."""
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    n_coef = len(header) - 4
    if n_coef < 1 or n_coef % 2 != 1 or header[0] != "iteration" or header[-3:] != ["loglik", "step", "accepted"]:
        raise ValueError("not a chain trace CSV")
    data = np.array(body, dtype=float).reshape(len(body), len(header))
    return ChainRecord(data[:, 0].astype(int), data[:, 1:1 + n_coef], data[:, -3],
                       data[:, -1].astype(bool), data[:, -2], **record_fields)
