"""Smooth manufactured problem on the unit square used for convergence studies.

u = sin(πt) sin(πx) sin(πy) with ψ = sin(πt) cos(πx) cos(πy); the forcing
makes u solve  u_t - Δu - ∇·(u∇ψ) = f  with u = 0 on the boundary.
"""

import numpy as np

from .potential import manufactured_potential

__all__ = ["exact_solution", "exact_gradient", "forcing", "manufactured_potential"]

pi = np.pi


def exact_solution(x, y, t):
    return np.sin(pi * t) * np.sin(pi * x) * np.sin(pi * y)


def exact_gradient(x, y, t):
    s = np.sin(pi * t)
    return np.stack([pi * s * np.cos(pi * x) * np.sin(pi * y), pi * s * np.sin(pi * x) * np.cos(pi * y)], -1)


def forcing(x, y, t):
    s = np.sin(pi * t)
    sx, cx, sy, cy = np.sin(pi * x), np.cos(pi * x), np.sin(pi * y), np.cos(pi * y)
    return pi * np.cos(pi * t) * sx * sy + 2 * pi**2 * s * sx * sy + 4 * pi**2 * s**2 * sx * cx * sy * cy
