"""Nodal box constraints, the clamp projection, and the extragradient VI solver."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .space import Field, Space
from .stepping import StepConfig, StepOperator

__all__ = [
    "Bounds",
    "ExtragradConfig",
    "ExtragradientError",
    "make_bounds",
    "project_nodal",
    "extragradient_solve",
    "constrained_step",
    "vi_certificate",
    "BOUND_KINDS",
]

BOUND_KINDS = ("positivity", "two-sided", "time-varying-upper")


@dataclass(frozen=True, eq=False)
class Bounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape:
            raise ValueError("lower and upper bounds differ in length")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def __len__(self):
        return len(self.lower)

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def pinned(self, dofs, values) -> "Bounds":
        """Copy with ``dofs`` fixed to ``values`` (both bounds)."""
        lo = self.lower.copy()
        hi = self.upper.copy()
        lo[dofs] = values
        hi[dofs] = values
        return Bounds(lo, hi)


@dataclass(frozen=True)
class ExtragradConfig:
    """Extragradient parameters.

    ``norm`` selects the increment norm used for termination: ``"l2"``,
    ``"linf"``, or ``"L2"`` (the mass-matrix norm, which needs ``mass``).
    """

    gamma: float = 1e-5
    tol: float = 1e-6
    max_iter: int = 10**6
    norm: str = "l2"
    mass: Optional[sp.spmatrix] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.norm not in ("l2", "linf", "L2"):
            raise ValueError(f"unknown norm {self.norm!r}")
        if self.norm == "L2" and self.mass is None:
            raise ValueError("the L2 norm needs a mass matrix")


class ExtragradientError(RuntimeError):
    def __init__(self, iterations, increment):
        super().__init__(f"extragradient did not converge in {iterations} iterations (last increment {increment:.3e})")
        self.iterations = iterations
        self.increment = increment


def make_bounds(kind: str, u0: Field, space: Optional[Space] = None) -> Bounds:
    """Box constraints at every Lagrange node.

    ``positivity`` gives [0, inf); ``two-sided`` gives [0, max u0]; the
    ``time-varying-upper`` kind uses the maximum of whatever field is passed
    in (the caller refreshes it from the previous constrained iterate).
    """
    space = space or u0.space
    n = space.num_dofs
    lower = np.zeros(n)
    if kind == "positivity":
        upper = np.full(n, np.inf)
    elif kind in ("two-sided", "time-varying-upper"):
        upper = np.full(n, float(u0.coeffs.max()))
    else:
        raise ValueError(f"unknown bounds kind {kind!r}; expected one of {BOUND_KINDS}")
    return Bounds(lower, upper)


def project_nodal(x, bounds: Bounds) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != bounds.lower.shape:
        raise ValueError("vector and bounds differ in length")
    return np.clip(x, bounds.lower, bounds.upper)


def _norm(v, cfg: ExtragradConfig):
    if cfg.norm == "l2":
        return float(np.linalg.norm(v))
    if cfg.norm == "linf":
        return float(np.abs(v).max()) if len(v) else 0.0
    return float(np.sqrt(max(v @ (cfg.mass @ v), 0.0)))


def extragradient_solve(matrix, rhs, bounds: Bounds, x0, cfg: ExtragradConfig = ExtragradConfig()):
    """Korpelevich extragradient for the box VI  <S x - r, v - x> >= 0 (``matrix`` S, ``rhs`` r).

    Iterates
        v = P(u - γ(S u - r)),  u⁺ = P(u - γ(S v - r))
    from ``P(x0)`` and stops once ``||u⁺ - u|| < tol``.  Returns ``(x, iterations)``.
    """
    S = sp.csr_matrix(matrix)
    r = np.asarray(rhs, dtype=float)
    lo, hi = bounds.lower, bounds.upper
    u = np.clip(np.asarray(x0, dtype=float), lo, hi)
    g = cfg.gamma
    inc = np.inf
    for it in range(1, cfg.max_iter + 1):
        v = np.clip(u - g * (S @ u - r), lo, hi)
        u_new = np.clip(u - g * (S @ v - r), lo, hi)
        inc = _norm(u_new - u, cfg)
        u = u_new
        if inc < cfg.tol:
            return u, it
        if not np.isfinite(inc):
            # diverged (gamma too large or the VI is not monotone); stop early
            raise ExtragradientError(it, inc)
    raise ExtragradientError(cfg.max_iter, inc)


def vi_certificate(matrix, rhs, bounds: Bounds, x, samples: int = 100, rng=None) -> float:
    """Smallest ``<S x - r, v - x>`` over random feasible ``v``.

    Each ``v`` draws every free component uniformly in its box (in
    ``[lower, lower + 2 max(1, |x|)]`` for unbounded boxes); a VI solution gives
    values >= 0 up to round-off.
    """
    rng = np.random.default_rng(rng)
    r = sp.csr_matrix(matrix) @ x - np.asarray(rhs, dtype=float)
    lo, hi = bounds.lower, bounds.upper
    span = np.where(np.isfinite(hi), hi - lo, 2.0 * max(1.0, float(np.abs(x).max(initial=0.0))))
    worst = np.inf
    for _ in range(samples):
        v = lo + span * rng.random(len(x))
        worst = min(worst, float(r @ (v - x)))
    return worst


def constrained_step(
    u_prev: Field,
    psi,
    cfg: StepConfig,
    bounds: Bounds,
    ecfg: ExtragradConfig = ExtragradConfig(),
    t_new: float = 0.0,
    operator: Optional[StepOperator] = None,
    info: Optional[dict] = None,
) -> Field:
    """One nodally bound-preserving step.

    Assembles the unconstrained system of ``cfg.scheme``, seeds extragradient
    with its solution, and pins Dirichlet DOFs to their boundary values.
    ``info`` (if given) receives the unconstrained solution, the algebraic
    system, and the iteration count.
    """
    space = u_prev.space
    op = operator if operator is not None else StepOperator(space, cfg)
    system = op.system(u_prev, psi, t_new)
    seed = system.solver.solve(system.reduced_rhs)
    bnd = np.flatnonzero(space.boundary_mask)
    box = bounds.pinned(bnd, system.boundary_values)
    x, iters = extragradient_solve(system.reduced, system.reduced_rhs, box, seed, ecfg)
    if info is not None:
        info.update(unconstrained=seed, system=system, bounds=box, iterations=iters)
    return Field(space, x)
