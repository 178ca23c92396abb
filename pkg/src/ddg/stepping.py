"""Backward Euler and Crank-Nicolson steps for the dG drift-diffusion scheme."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .forms import (
    assemble_load,
    assemble_mass,
    assemble_sip,
    assemble_upwind,
    dirichlet_values,
    eliminate_matrix,
    eliminate_rhs,
)
from .linsolve import LinearSolver
from .space import Field, Space

__all__ = [
    "StepConfig",
    "StepOperator",
    "StepSystem",
    "step_backward_euler",
    "step_crank_nicolson",
]

SCHEMES = ("backward-euler", "crank-nicolson")


@dataclass(frozen=True)
class StepConfig:
    tau: float
    sigma: float = 10.0
    mu: float = 1.0
    scheme: str = "backward-euler"
    forcing: Optional[Callable] = None
    dirichlet: Optional[Callable] = None

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.mu < 0:
            raise ValueError("mu must be non-negative")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")

    def psi_time(self, t_new: float) -> float:
        """Time at which the potential and the forcing are sampled."""
        return t_new - 0.5 * self.tau if self.scheme == "crank-nicolson" else t_new


@dataclass
class StepSystem:
    """One time step in algebraic form before and after Dirichlet elimination.

    ``matrix``/``rhs`` are the raw system; ``reduced``/``reduced_rhs`` carry
    the strong boundary values; ``boundary_values`` are indexed like
    ``flatnonzero(space.boundary_mask)``.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    reduced: sp.csr_matrix
    reduced_rhs: np.ndarray
    boundary_values: np.ndarray
    solver: LinearSolver


class StepOperator:
    """Caches the mass and SIP matrices, and upwind matrices of time-independent potentials.

    Eliminated system matrices and their factorisations are reused while the
    potential does not change.
    """

    def __init__(self, space: Space, cfg: StepConfig, solver_method: str = "auto"):
        self.space = space
        self.cfg = cfg
        self.solver_method = solver_method
        self.mass = assemble_mass(space)
        self.sip = assemble_sip(space, cfg.sigma)
        self._cache_key = None
        self._cache = None

    def upwind(self, psi, t):
        return assemble_upwind(self.space, psi, self.cfg.mu, t)

    def _operators(self, psi, t_new):
        key = (id(psi), self.cfg.psi_time(t_new) if psi.time_dependent else None)
        if self._cache_key == key and self._cache is not None:
            return self._cache
        cfg = self.cfg
        drift = self.sip + self.upwind(psi, cfg.psi_time(t_new))
        if cfg.scheme == "backward-euler":
            lhs = self.mass + cfg.tau * drift
            prev = self.mass
        else:
            lhs = self.mass + 0.5 * cfg.tau * drift
            prev = self.mass - 0.5 * cfg.tau * drift
        lhs = sp.csr_matrix(lhs)
        reduced = eliminate_matrix(lhs, self.space.boundary_mask)
        solver = LinearSolver(reduced, method=self.solver_method)
        self._cache_key = key
        self._cache = (lhs, sp.csr_matrix(prev), reduced, solver, psi)
        return self._cache

    def system(self, u_prev: Field, psi, t_new: float) -> StepSystem:
        if u_prev.space is not self.space:
            raise ValueError("u_prev lives in a different space")
        cfg = self.cfg
        lhs, prev, reduced, solver, _ = self._operators(psi, t_new)
        rhs = prev @ u_prev.coeffs
        if cfg.forcing is not None:
            rhs = rhs + cfg.tau * assemble_load(self.space, cfg.forcing, cfg.psi_time(t_new))
        mask = self.space.boundary_mask
        if cfg.dirichlet is None:
            g = np.zeros(int(mask.sum()))
        else:
            g = dirichlet_values(self.space, cfg.dirichlet, t_new)
        return StepSystem(lhs, rhs, reduced, eliminate_rhs(lhs, rhs, mask, g), g, solver)

    def step(self, u_prev: Field, psi, t_new: float) -> Field:
        s = self.system(u_prev, psi, t_new)
        return Field(self.space, s.solver.solve(s.reduced_rhs))


def _check_scheme(cfg: StepConfig, scheme: str) -> StepConfig:
    if cfg.scheme == scheme:
        return cfg
    return StepConfig(cfg.tau, cfg.sigma, cfg.mu, scheme, cfg.forcing, cfg.dirichlet)


def step_backward_euler(u_prev: Field, psi, cfg: StepConfig, t_new: float) -> Field:
    """Solve (M + τ(A + B)) u = M u_prev + τ L(t_new) with strong boundary values."""
    op = StepOperator(u_prev.space, _check_scheme(cfg, "backward-euler"))
    return op.step(u_prev, psi, t_new)


def step_crank_nicolson(u_prev: Field, psi, cfg: StepConfig, t_new: float) -> Field:
    """Solve (M + τ/2 (A + B)) u = (M - τ/2 (A + B)) u_prev + τ L(t_new - τ/2)."""
    op = StepOperator(u_prev.space, _check_scheme(cfg, "crank-nicolson"))
    return op.step(u_prev, psi, t_new)
