"""Gauss-type quadrature on the reference triangle and reference interval."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

__all__ = ["QuadratureRule", "triangle_rule", "interval_rule"]


@dataclass(frozen=True)
class QuadratureRule:
    """Points and weights exact for polynomials up to ``degree``.

    Triangle rules carry barycentric points (Q, 3) with weights summing to 1/2,
    the reference area; interval rules carry parameters in [0, 1] (Q,) with
    weights summing to 1.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int


@lru_cache(maxsize=None)
def interval_rule(degree: int) -> QuadratureRule:
    n = max(1, degree // 2 + 1)
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadratureRule(0.5 * (x + 1.0), 0.5 * w, degree)


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> QuadratureRule:
    """Collapsed (Duffy) product of Gauss-Legendre and Gauss-Jacobi(1, 0)."""
    n = max(1, degree // 2 + 1)
    a, wa = np.polynomial.legendre.leggauss(n)
    b, wb = roots_jacobi(n, 1.0, 0.0)
    u = 0.5 * (a + 1.0)
    v = 0.5 * (b + 1.0)
    wu = 0.5 * wa
    wv = 0.25 * wb
    U, V = np.meshgrid(u, v, indexing="ij")
    W = np.outer(wu, wv)
    xi = (U * (1.0 - V)).ravel()
    eta = V.ravel()
    pts = np.column_stack([1.0 - xi - eta, xi, eta])
    return QuadratureRule(pts, W.ravel(), degree)
