"""Quadrature rules on the reference triangle and on boundary edges."""
from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def triangle_rule() -> tuple[np.ndarray, np.ndarray]:
    """7-point rule exact for polynomials of degree 5.

    Returns barycentric coordinates ``(7, 3)`` and weights summing to 1 (to be
    scaled by the triangle area).
    """
    a1, b1, w1 = 0.059715871789770, 0.470142064105115, 0.132394152788506
    a2, b2, w2 = 0.797426985353087, 0.101286507323456, 0.125939180544827
    bary = np.array([
        [1 / 3, 1 / 3, 1 / 3],
        [a1, b1, b1], [b1, a1, b1], [b1, b1, a1],
        [a2, b2, b2], [b2, a2, b2], [b2, b2, a2],
    ])
    weights = np.array([0.225, w1, w1, w1, w2, w2, w2])
    return bary, weights


@lru_cache(maxsize=None)
def edge_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre on [0, 1]: parameters ``t`` and weights summing to 1."""
    xi, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (xi + 1.0), 0.5 * w
