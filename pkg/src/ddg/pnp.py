"""Decoupled Poisson-Nernst-Planck steps built from the drift-diffusion solver."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .bounds import ExtragradConfig, constrained_step, make_bounds
from .forms import assemble_load, assemble_mass, assemble_sip, eliminate_matrix
from .linsolve import LinearSolver
from .potential import DiscretePotential
from .space import Field, Space
from .stepping import StepConfig, StepOperator

__all__ = ["PnpState", "PnpConfig", "PnpStepper", "solve_poisson", "pnp_step", "background_charge"]


@dataclass(frozen=True)
class PnpState:
    rho: Field
    nu: Field
    psi: Field
    t: float = 0.0

    def __post_init__(self):
        if not (self.rho.space is self.nu.space is self.psi.space):
            raise ValueError("rho, nu and psi must share one space")

    @property
    def space(self) -> Space:
        return self.rho.space


@dataclass(frozen=True)
class PnpConfig:
    """``constrained=False`` selects the plain dG step for both species."""

    eps: float
    charge: Optional[Callable]
    step: StepConfig
    ecfg: ExtragradConfig = field(default_factory=ExtragradConfig)
    bounds_kind: str = "positivity"
    constrained: bool = True

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.step.dirichlet is not None:
            raise ValueError("PNP concentrations use homogeneous boundary values")


def background_charge(x, y=None, t=None):
    """-1 on the left half of the unit square, +1 on the right."""
    x = np.asarray(x, dtype=float)
    return np.where(x < 0.5, -1.0, 1.0)


class _Poisson:
    def __init__(self, space: Space, eps: float, sigma: float):
        self.space = space
        self.eps = eps
        self.mass = assemble_mass(space)
        mat = eps * assemble_sip(space, sigma)
        self.solver = LinearSolver(eliminate_matrix(mat, space.boundary_mask))

    def solve(self, rho: Field, nu: Field, charge) -> Field:
        rhs = self.mass @ (rho.coeffs - nu.coeffs)
        if charge is not None:
            rhs = rhs + assemble_load(self.space, charge)
        rhs[self.space.boundary_mask] = 0.0
        return Field(self.space, self.solver.solve(rhs))


def solve_poisson(space: Space, rho: Field, nu: Field, charge, eps: float, sigma: float) -> Field:
    """ε a_sip(ψ, χ) = (ρ - ν + charge, χ) with ψ = 0 on the boundary."""
    if rho.space is not space or nu.space is not space:
        raise ValueError("rho and nu must live in the given space")
    if not eps > 0:
        raise ValueError("eps must be positive")
    return _Poisson(space, eps, sigma).solve(rho, nu, charge)


class PnpStepper:
    """Keeps the mass, SIP and Poisson factorisations across steps."""

    def __init__(self, space: Space, cfg: PnpConfig):
        self.space = space
        self.cfg = cfg
        self.op_rho = StepOperator(space, cfg.step)
        self.op_nu = StepOperator(space, cfg.step)
        # both operators share mass and SIP
        self.op_nu.mass = self.op_rho.mass
        self.op_nu.sip = self.op_rho.sip
        self.poisson = _Poisson(space, cfg.eps, cfg.step.sigma)
        self.last_info: dict = {}

    def initial_state(self, rho0: Field, nu0: Field) -> PnpState:
        return PnpState(rho0, nu0, self.poisson.solve(rho0, nu0, self.cfg.charge), 0.0)

    def _advance(self, u: Field, psi, op: StepOperator, t_new: float, info: dict) -> Field:
        cfg = self.cfg
        if not cfg.constrained:
            return op.step(u, psi, t_new)
        bounds = make_bounds(cfg.bounds_kind, u, self.space)
        return constrained_step(u, psi, cfg.step, bounds, cfg.ecfg, t_new, operator=op, info=info)

    def step(self, state: PnpState) -> PnpState:
        if state.space is not self.space:
            raise ValueError("state lives in a different space")
        t_new = state.t + self.cfg.step.tau
        psi = DiscretePotential(state.psi)
        info_rho: dict = {}
        info_nu: dict = {}
        rho = self._advance(state.rho, psi, self.op_rho, t_new, info_rho)
        nu = self._advance(state.nu, -psi, self.op_nu, t_new, info_nu)
        self.last_info = {"rho": info_rho, "nu": info_nu}
        return PnpState(rho, nu, self.poisson.solve(rho, nu, self.cfg.charge), t_new)


def pnp_step(state: PnpState, cfg: PnpConfig, stepper: Optional[PnpStepper] = None) -> PnpState:
    """Advance ρ with ψ^{n-1}, ν with -ψ^{n-1}, then refresh ψ from the new concentrations."""
    stepper = stepper if stepper is not None else PnpStepper(state.space, cfg)
    return stepper.step(state)
