"""Truncated trigonometric-series Gaussian priors on the log Robin coefficient.

Coefficient vectors are plain float arrays ordered ``k = -K, ..., K`` with
basis ``sin(2πkx)`` for ``k > 0``, ``cos(2πkx)`` for ``k < 0`` and ``1`` for
``k = 0`` on the unit interval.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np


class Family(str, enum.Enum):
    Matern = "matern"
    SquaredExp = "squared_exp"


@dataclass(frozen=True)
class PriorSpec:
    """Prior family and hyperparameters.

    ``alpha`` is used by the Matérn family, ``r`` by the squared-exponential
    one. ``rescale_n`` switches on the sample-size dependent shrinkage with
    that ``N``; ``None`` means no rescaling.
    """

    family: Family = Family.Matern
    alpha: float = 1.0
    r: float = 1.0
    K: int = 2
    rescale_n: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if int(self.K) != self.K or self.K < 0:
            raise ValueError(f"truncation K must be a non-negative integer, got {self.K}")
        if self.family is Family.Matern and not self.alpha > 0.5:
            raise ValueError(f"Matérn smoothness must exceed 1/2, got {self.alpha}")
        if self.family is Family.SquaredExp and not self.r > 0:
            raise ValueError(f"squared-exponential decay must be positive, got {self.r}")
        if self.rescale_n is not None and self.rescale_n < 2:
            raise ValueError("rescaling needs N >= 2")

    @property
    def dim(self) -> int:
        return 2 * self.K + 1

    @property
    def ks(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    def weights(self) -> np.ndarray:
        return np.array([weight(self, int(k)) for k in self.ks])

    def std(self) -> np.ndarray:
        """Marginal standard deviation of each coefficient."""
        return rescale_factor(self, self.rescale_n) * self.weights()


def weight(spec: PriorSpec, k: int) -> float:
    if abs(k) > spec.K:
        raise ValueError(f"|k| = {abs(k)} exceeds truncation K = {spec.K}")
    if spec.family is Family.Matern:
        return (1.0 + k * k) ** (-spec.alpha / 2.0)
    return math.exp(-spec.r * k * k / 2.0)


def rescale_factor(spec: PriorSpec, N: Optional[float] = None) -> float:
    """Shrinkage ``N^(-1/(4α+2))`` (Matérn) or ``1/log N`` (squared exponential).

    Returns 1 when rescaling is off, i.e. when ``spec.rescale_n`` is ``None``
    and no ``N`` is passed.
    """
    if N is None:
        N = spec.rescale_n
        if N is None:
            return 1.0
    if N < 2:
        raise ValueError(f"rescaling needs N >= 2, got {N}")
    if spec.family is Family.Matern:
        return float(N) ** (-1.0 / (4.0 * spec.alpha + 2.0))
    return 1.0 / math.log(N)


def sample_coeffs(spec: PriorSpec, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """Draw coefficient vectors ``kappa * w_k * g_k``; ``size`` adds a leading axis."""
    shape = (spec.dim,) if size is None else (size, spec.dim)
    return rng.standard_normal(shape) * spec.std()


def basis_matrix(K: int, x) -> np.ndarray:
    """Basis values ``(len(x), 2K+1)``, columns ordered ``k = -K..K``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ks = np.arange(-K, K + 1)
    arg = 2.0 * np.pi * np.abs(ks)[None, :] * x[:, None]
    return np.where(ks > 0, np.sin(arg), np.where(ks < 0, np.cos(arg), 1.0))


def _check_unit(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x < 0) or np.any(x > 1):
        raise ValueError("evaluation points must lie in [0, 1]")
    return x


def eval_theta(coeffs, x):
    """Evaluate the truncated series at ``x`` (scalar or array in [0, 1])."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.ndim != 1 or coeffs.size % 2 != 1:
        raise ValueError("coefficient vector must have odd length 2K+1")
    x = _check_unit(x)
    out = basis_matrix(coeffs.size // 2, x.ravel()) @ coeffs
    return float(out[0]) if x.ndim == 0 else out.reshape(x.shape)


def covariance(spec: PriorSpec, x, y):
    """Prior covariance of the field values at ``x`` and ``y``."""
    x, y = _check_unit(x), _check_unit(y)
    bx = basis_matrix(spec.K, np.ravel(x))
    by = basis_matrix(spec.K, np.ravel(y))
    out = (bx * spec.std() ** 2 * by).sum(axis=1)
    return float(out[0]) if np.ndim(x) == 0 and np.ndim(y) == 0 else out


def coeffs_to_json(coeffs) -> list:
    return [float(c) for c in np.asarray(coeffs, dtype=float)]


def coeffs_from_json(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size % 2 != 1 or not np.all(np.isfinite(arr)):
        raise ValueError("coefficient vector must be a flat array of odd length")
    return arr
