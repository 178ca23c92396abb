"""Norms, energies and discrete-identity residuals for dG fields."""

from __future__ import annotations

import numpy as np

from .forms import ANALYTIC_EXTRA_DEGREE, assemble_upwind, boundary_facet_data, facet_data, facet_drift
from .space import Field

__all__ = [
    "l2_norm",
    "sip_norm",
    "energy_norm",
    "error_energy_norm",
    "boundary_energy_change",
    "upwind_energy_identity_residual",
    "upwind_energy_identity_terms",
]


def _degree(field: Field, extra: int = ANALYTIC_EXTRA_DEGREE) -> int:
    return 2 * field.space.degree + extra


def _cell_terms(field: Field, degree: int):
    _, xy, w, phi, dphi = field.space.tabulate(degree)
    c = field.cell_coeffs()
    vals = np.einsum("qm,cm->cq", phi, c)
    grads = np.einsum("cqmd,cm->cqd", dphi, c)
    return xy, w, vals, grads


def _facet_jumps(field: Field, fd):
    c = field.cell_coeffs()
    wa = np.einsum("fqm,fm->fq", fd.phi_a, c[fd.cells_a])
    wb = np.einsum("fqm,fm->fq", fd.phi_b, c[fd.cells_b])
    return wa - wb, 0.5 * (wa + wb)


def l2_norm(field: Field) -> float:
    _, w, vals, _ = _cell_terms(field, 2 * field.space.degree)
    return float(np.sqrt((w * vals**2).sum()))


def sip_norm(field: Field, sigma: float) -> float:
    """sqrt(||∇_h w||² + Σ_F σ/h_F ||⦗w⦘||²_F)."""
    p = field.space.degree
    _, w, _, grads = _cell_terms(field, 2 * p)
    total = (w * (grads**2).sum(-1)).sum()
    if len(field.space.mesh.interior_facets):
        fd = facet_data(field.space, 2 * p)
        jump, _ = _facet_jumps(field, fd)
        total += (fd.weights * (sigma / fd.h)[:, None] * jump**2).sum()
    return float(np.sqrt(total))


def energy_norm(field: Field, tau, sigma, mu, psi, t=0.0, star: bool = False) -> float:
    """|||w|||² = ||w||² + τ||w||²_sip + (τμ/2)|| |∇ψ·n|^½ ⦗w⦘ ||²; ``star`` adds τ|| |∇ψ·n|^½ {w} ||²."""
    total = l2_norm(field) ** 2 + tau * sip_norm(field, sigma) ** 2
    if len(field.space.mesh.interior_facets):
        fd = facet_data(field.space, _degree(field))
        jump, avg = _facet_jumps(field, fd)
        bn = np.abs(facet_drift(fd, psi, t))
        total += 0.5 * tau * mu * (fd.weights * bn * jump**2).sum()
        if star:
            total += tau * (fd.weights * bn * avg**2).sum()
    return float(np.sqrt(total))


def error_energy_norm(field: Field, exact, grad_exact, t, tau, sigma, mu, psi, degree=None) -> float:
    """Energy norm of ``exact - field``; the exact solution has no interior jumps."""
    degree = degree if degree is not None else _degree(field)
    xy, w, vals, grads = _cell_terms(field, degree)
    e = exact(xy[..., 0], xy[..., 1], t) - vals
    ge = grad_exact(xy[..., 0], xy[..., 1], t) - grads
    total = (w * e**2).sum() + tau * (w * (ge**2).sum(-1)).sum()
    if len(field.space.mesh.interior_facets):
        fd = facet_data(field.space, degree)
        jump, _ = _facet_jumps(field, fd)
        bn = np.abs(facet_drift(fd, psi, t))
        total += tau * (fd.weights * (sigma / fd.h)[:, None] * jump**2).sum()
        total += 0.5 * tau * mu * (fd.weights * bn * jump**2).sum()
    return float(np.sqrt(total))


def boundary_energy_change(u_new: Field, u_prev: Field, tau, psi, t) -> float:
    """½||u_new||² - ½||u_prev||² - τ ∮ (u ∇u·n + ½ u² ∇ψ·n) ds, traces of u_new.

    The signed value is returned (no square root).
    """
    if u_new.space is not u_prev.space:
        raise ValueError("fields live in different spaces")
    space = u_new.space
    change = 0.5 * l2_norm(u_new) ** 2 - 0.5 * l2_norm(u_prev) ** 2
    if len(space.mesh.boundary_facets):
        cells, _, xy, w, n, bary, phi, dphi = boundary_facet_data(space, _degree(u_new))
        c = u_new.cell_coeffs()[cells]
        u = np.einsum("fqm,fm->fq", phi, c)
        du = np.einsum("fqmd,fm->fqd", dphi, c)
        dun = np.einsum("fqd,fd->fq", du, n)
        gpsi = psi.gradient_at(cells[:, None], bary, xy, t)
        psin = np.einsum("fqd,fd->fq", gpsi, n)
        change -= tau * (w * (u * dun + 0.5 * u**2 * psin)).sum()
    return float(change)


def upwind_energy_identity_terms(field: Field, psi, mu, t=0.0, degree=None):
    """Return (wᵀBw, Σ_K -½∫ w² Δψ, (μ/2) Σ_F ∫ |∇ψ·n| ⦗w⦘²)."""
    space = field.space
    if degree is None:
        degree = 2 * space.degree + (space.degree if psi.is_discrete else ANALYTIC_EXTRA_DEGREE)
    B = assemble_upwind(space, psi, mu, t, degree=degree)
    c = field.coeffs
    lhs = float(c @ (B @ c))
    rule, xy, w, phi, _ = space.tabulate(degree)
    nc = space.mesh.num_cells
    cells = np.broadcast_to(np.arange(nc)[:, None], w.shape)
    bary = np.broadcast_to(rule.points, (nc,) + rule.points.shape)
    lap = psi.laplacian_at(cells, bary, xy, t)
    vals = np.einsum("qm,cm->cq", phi, field.cell_coeffs())
    cell = float(-0.5 * (w * vals**2 * lap).sum())
    facet = 0.0
    if len(space.mesh.interior_facets):
        fd = facet_data(space, degree)
        jump, _ = _facet_jumps(field, fd)
        facet = float(0.5 * mu * (fd.weights * np.abs(facet_drift(fd, psi, t)) * jump**2).sum())
    return lhs, cell, facet


def upwind_energy_identity_residual(field: Field, psi, mu, t=0.0, degree=None) -> float:
    """|wᵀBw - (Σ_K -½∫w²Δψ + (μ/2) Σ_F ∫|∇ψ·n|⦗w⦘²)| for a field vanishing on ∂Ω."""
    lhs, cell, facet = upwind_energy_identity_terms(field, psi, mu, t, degree)
    return abs(lhs - (cell + facet))
