"""Drift potentials: closed-form (value, gradient, Laplacian) or a discrete Field."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .space import Field

__all__ = [
    "AnalyticPotential",
    "DiscretePotential",
    "constant_potential",
    "linear_potential",
    "sine_ridge_potential",
    "manufactured_potential",
    "polynomial_potential",
]


@dataclass(frozen=True)
class AnalyticPotential:
    """ψ given by vectorised callables of ``(x, y, t)``.

    ``gradient`` returns an array with a trailing axis of length 2.
    """

    value: Callable
    gradient: Callable
    laplacian: Callable
    time_dependent: bool = False
    name: str = "analytic"

    is_discrete = False

    def value_at(self, cells, bary, xy, t):
        return np.broadcast_to(self.value(xy[..., 0], xy[..., 1], t), xy.shape[:-1])

    def gradient_at(self, cells, bary, xy, t):
        return np.broadcast_to(self.gradient(xy[..., 0], xy[..., 1], t), xy.shape)

    def laplacian_at(self, cells, bary, xy, t):
        return np.broadcast_to(self.laplacian(xy[..., 0], xy[..., 1], t), xy.shape[:-1])

    def __neg__(self):
        v, g, lap = self.value, self.gradient, self.laplacian
        return AnalyticPotential(
            lambda x, y, t: -v(x, y, t),
            lambda x, y, t: -g(x, y, t),
            lambda x, y, t: -lap(x, y, t),
            self.time_dependent,
            f"-{self.name}",
        )


@dataclass(frozen=True, eq=False)
class DiscretePotential:
    """ψ_h as a dG Field, optionally scaled by ``sign`` (used for ``-ψ_h``)."""

    field: Field
    sign: float = 1.0

    is_discrete = True
    time_dependent = False

    @property
    def degree(self) -> int:
        return self.field.space.degree

    def value_at(self, cells, bary, xy, t):
        return self.sign * self.field.values(cells, bary)

    def gradient_at(self, cells, bary, xy, t):
        return self.sign * self.field.gradients(cells, bary)

    def laplacian_at(self, cells, bary, xy, t):
        return self.sign * self.field.laplacians(cells, bary)

    def __neg__(self):
        return DiscretePotential(self.field, -self.sign)


def _const(c):
    return lambda x, y, t: np.full(np.broadcast(x, y).shape, float(c))


def constant_potential(c: float = 0.0) -> AnalyticPotential:
    return AnalyticPotential(
        _const(c),
        lambda x, y, t: np.zeros(np.broadcast(x, y).shape + (2,)),
        _const(0.0),
        name=f"constant({c})",
    )


def linear_potential(a: float, b: float, c: float = 0.0) -> AnalyticPotential:
    """ψ = a x + b y + c."""
    return AnalyticPotential(
        lambda x, y, t: a * x + b * y + c,
        lambda x, y, t: np.stack(np.broadcast_arrays(a + 0.0 * np.asarray(x), b + 0.0 * np.asarray(y)), -1),
        _const(0.0),
        name=f"linear({a}, {b})",
    )


def polynomial_potential(coeffs: dict[tuple[int, int], float]) -> AnalyticPotential:
    """ψ = Σ c_ij x^i y^j from a ``{(i, j): c}`` mapping."""
    items = [(int(i), int(j), float(c)) for (i, j), c in coeffs.items()]

    def value(x, y, t):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return sum((c * x**i * y**j for i, j, c in items), np.zeros_like(x))

    def gradient(x, y, t):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        gx = sum((c * i * x ** max(i - 1, 0) * y**j for i, j, c in items if i), np.zeros_like(x))
        gy = sum((c * j * x**i * y ** max(j - 1, 0) for i, j, c in items if j), np.zeros_like(x))
        return np.stack([gx, gy], -1)

    def laplacian(x, y, t):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        lx = sum((c * i * (i - 1) * x ** max(i - 2, 0) * y**j for i, j, c in items if i > 1), np.zeros_like(x))
        ly = sum((c * j * (j - 1) * x**i * y ** max(j - 2, 0) for i, j, c in items if j > 1), np.zeros_like(x))
        return lx + ly

    return AnalyticPotential(value, gradient, laplacian, name="polynomial")


def sine_ridge_potential(amplitude: float = 100.0) -> AnalyticPotential:
    """ψ = A sin(π(2x - 1/2)); Δψ = -4π² ψ."""
    k = 2.0 * np.pi

    def value(x, y, t):
        return amplitude * np.sin(k * x - 0.5 * np.pi) + 0.0 * y

    def gradient(x, y, t):
        gx = amplitude * k * np.cos(k * x - 0.5 * np.pi)
        return np.stack(np.broadcast_arrays(gx, np.zeros_like(y, dtype=float)), -1)

    def laplacian(x, y, t):
        return -(k**2) * value(x, y, t)

    return AnalyticPotential(value, gradient, laplacian, name=f"sine_ridge({amplitude})")


def manufactured_potential() -> AnalyticPotential:
    """ψ = sin(πt) cos(πx) cos(πy)."""
    pi = np.pi

    def value(x, y, t):
        return np.sin(pi * t) * np.cos(pi * x) * np.cos(pi * y)

    def gradient(x, y, t):
        s = np.sin(pi * t)
        return np.stack(
            [-pi * s * np.sin(pi * x) * np.cos(pi * y), -pi * s * np.cos(pi * x) * np.sin(pi * y)], -1
        )

    def laplacian(x, y, t):
        return -2.0 * pi**2 * value(x, y, t)

    return AnalyticPotential(value, gradient, laplacian, time_dependent=True, name="manufactured")
