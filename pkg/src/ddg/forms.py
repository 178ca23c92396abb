"""Assembly of the dG mass, SIP diffusion and upwind drift forms.

Matrices are ``scipy.sparse.csr_matrix`` with rows indexing test functions and
columns trial functions, so that ``A @ u`` realises ``a_h(u_h, φ_i)``.
Only interior facets carry facet terms; boundary values are imposed strongly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh
from .quadrature import interval_rule
from .space import Space, basis_gradients, basis_values

__all__ = [
    "FacetData",
    "facet_data",
    "boundary_facet_data",
    "cell_degree",
    "facet_drift",
    "assemble_mass",
    "assemble_sip",
    "assemble_upwind",
    "assemble_load",
    "apply_strong_dirichlet",
    "dirichlet_values",
]

ANALYTIC_EXTRA_DEGREE = 4


def cell_degree(space: Space, psi=None) -> int:
    if psi is None:
        return 2 * space.degree
    extra = space.degree if psi.is_discrete else ANALYTIC_EXTRA_DEGREE
    return 2 * space.degree + extra


def _bary_in(mesh: Mesh, cells, xy):
    inv = mesh.inverse_jacobians[cells]
    v0 = mesh.cell_coords[cells, 0]
    ref = np.einsum("...ij,...qj->...qi", inv, xy - v0[..., None, :])
    return np.concatenate([1.0 - ref.sum(-1, keepdims=True), ref], axis=-1)


@dataclass(frozen=True)
class FacetData:
    """Per-facet quadrature data on the owner (``a``) and neighbour (``b``) sides.

    ``normal`` is the owner's outward unit normal; ``weights`` include the
    facet length.  ``phi_*`` are (F, Q, m) and ``dphi_*`` (F, Q, m, 2).
    """

    cells_a: np.ndarray
    cells_b: np.ndarray
    xy: np.ndarray
    weights: np.ndarray
    normal: np.ndarray
    bary_a: np.ndarray
    bary_b: np.ndarray
    phi_a: np.ndarray
    phi_b: np.ndarray
    dphi_a: np.ndarray
    dphi_b: np.ndarray
    h: np.ndarray


def facet_data(space: Space, degree: int) -> FacetData:
    mesh = space.mesh
    f = mesh.interior_facets
    ca, ea, cb = f[:, 0], f[:, 1], f[:, 2]
    rule = interval_rule(degree)
    start, end = mesh.edge_endpoints(ca, ea)
    s = rule.points
    xy = start[:, None, :] + s[None, :, None] * (end - start)[:, None, :]
    length = np.linalg.norm(end - start, axis=-1)
    w = length[:, None] * rule.weights[None, :]
    ba = _bary_in(mesh, ca, xy)
    bb = _bary_in(mesh, cb, xy)
    p = space.degree
    lga = mesh.barycentric_gradients[ca][:, None]
    lgb = mesh.barycentric_gradients[cb][:, None]
    return FacetData(
        ca, cb, xy, w, mesh.outward_normals(ca, ea), ba, bb,
        basis_values(p, ba), basis_values(p, bb),
        basis_gradients(p, ba, lga), basis_gradients(p, bb, lgb),
        mesh.facet_h,
    )


def boundary_facet_data(space: Space, degree: int):
    """Quadrature on boundary facets: (cells, markers, xy, weights, normal, bary, phi, dphi)."""
    mesh = space.mesh
    bf = mesh.boundary_facets
    c, e = bf[:, 0], bf[:, 1]
    rule = interval_rule(degree)
    start, end = mesh.edge_endpoints(c, e)
    xy = start[:, None, :] + rule.points[None, :, None] * (end - start)[:, None, :]
    w = np.linalg.norm(end - start, axis=-1)[:, None] * rule.weights[None, :]
    bary = _bary_in(mesh, c, xy)
    lg = mesh.barycentric_gradients[c][:, None]
    return (c, bf[:, 2], xy, w, mesh.outward_normals(c, e), bary,
            basis_values(space.degree, bary), basis_gradients(space.degree, bary, lg))


def _cell_blocks(space: Space, blocks: np.ndarray) -> sp.csr_matrix:
    dofs = space.cell_dofs
    m = space.dofs_per_cell
    rows = np.repeat(dofs, m, axis=1).ravel()
    cols = np.tile(dofs, (1, m)).ravel()
    n = space.num_dofs
    return sp.csr_matrix((blocks.ravel(), (rows, cols)), shape=(n, n))


def _facet_blocks(space: Space, fd: FacetData, blocks: np.ndarray) -> sp.csr_matrix:
    dofs = np.concatenate([space.cell_dofs[fd.cells_a], space.cell_dofs[fd.cells_b]], axis=1)
    k = dofs.shape[1]
    rows = np.repeat(dofs, k, axis=1).ravel()
    cols = np.tile(dofs, (1, k)).ravel()
    n = space.num_dofs
    return sp.csr_matrix((blocks.ravel(), (rows, cols)), shape=(n, n))


def _finish(mat: sp.csr_matrix) -> sp.csr_matrix:
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def assemble_mass(space: Space, degree: int | None = None) -> sp.csr_matrix:
    _, _, w, phi, _ = space.tabulate(degree if degree is not None else 2 * space.degree)
    blocks = np.einsum("cq,qi,qj->cij", w, phi, phi)
    return _finish(_cell_blocks(space, blocks))


def _sides(fd: FacetData):
    """Scalar jump, average, and average normal derivative, each (F, Q, 2m)."""
    jump = np.concatenate([fd.phi_a, -fd.phi_b], axis=-1)
    avg = 0.5 * np.concatenate([fd.phi_a, fd.phi_b], axis=-1)
    n = fd.normal[:, None, None, :]
    dn = 0.5 * np.concatenate([(fd.dphi_a * n).sum(-1), (fd.dphi_b * n).sum(-1)], axis=-1)
    return jump, avg, dn


def assemble_sip(space: Space, sigma: float, degree: int | None = None) -> sp.csr_matrix:
    """Symmetric interior penalty form with penalty weight σ / min(h_a, h_b)."""
    if degree is None:
        degree = 2 * space.degree
    _, _, w, _, dphi = space.tabulate(max(degree - 2, 0))
    cell = np.einsum("cq,cqid,cqjd->cij", w, dphi, dphi)
    mat = _cell_blocks(space, cell)
    if len(space.mesh.interior_facets):
        fd = facet_data(space, degree)
        jump, _, dn = _sides(fd)
        pen = (sigma / fd.h)[:, None]
        blk = -np.einsum("fq,fqi,fqj->fij", fd.weights, dn, jump)
        blk = blk + blk.transpose(0, 2, 1)
        blk += np.einsum("fq,fqi,fqj->fij", fd.weights * pen, jump, jump)
        mat = mat + _facet_blocks(space, fd, blk)
    return _finish(sp.csr_matrix(mat))


def _facet_grad_psi(space: Space, fd: FacetData, psi, t):
    ga = psi.gradient_at(fd.cells_a[:, None], fd.bary_a, fd.xy, t)
    if psi.is_discrete:
        gb = psi.gradient_at(fd.cells_b[:, None], fd.bary_b, fd.xy, t)
        return 0.5 * (ga + gb)
    return ga


def facet_drift(fd: FacetData, psi, t: float = 0.0) -> np.ndarray:
    """∇ψ·n on interior facet quadrature points, with n the owner normal."""
    return np.einsum("fqd,fd->fq", _facet_grad_psi(None, fd, psi, t), fd.normal)


def assemble_upwind(space: Space, psi, mu: float, t: float = 0.0, degree: int | None = None) -> sp.csr_matrix:
    """Upwinded drift form b_h(w, v) for the potential ``psi`` at time ``t``.

    For a discrete potential the facet value of ∇ψ·n is the average of the
    two one-sided traces.
    """
    if degree is None:
        degree = cell_degree(space, psi)
    nc = space.mesh.num_cells
    rule, xy, w, phi, dphi = space.tabulate(degree)
    bary = np.broadcast_to(rule.points, (nc,) + rule.points.shape)
    cells = np.broadcast_to(np.arange(nc)[:, None], w.shape)
    g = psi.gradient_at(cells, bary, xy, t)  # (C, Q, 2)
    gdv = np.einsum("cqd,cqid->cqi", g, dphi)
    cell = np.einsum("cq,cqi,qj->cij", w, gdv, phi)
    mat = _cell_blocks(space, cell)
    if len(space.mesh.interior_facets):
        fd = facet_data(space, degree)
        jump, avg, _ = _sides(fd)
        bn = facet_drift(fd, psi, t)
        blk = -np.einsum("fq,fqi,fqj->fij", fd.weights * bn, jump, avg)
        blk += np.einsum("fq,fqi,fqj->fij", fd.weights * (0.5 * mu * np.abs(bn)), jump, jump)
        mat = mat + _facet_blocks(space, fd, blk)
    return _finish(sp.csr_matrix(mat))


def assemble_load(space: Space, source, t: float = 0.0, degree: int | None = None) -> np.ndarray:
    """Entries ∫ source(x, y, t) φ_i."""
    if degree is None:
        degree = 2 * space.degree + ANALYTIC_EXTRA_DEGREE
    _, xy, w, phi, _ = space.tabulate(degree)
    fq = np.broadcast_to(np.asarray(source(xy[..., 0], xy[..., 1], t), dtype=float), w.shape)
    return np.einsum("cq,cq,qi->ci", w, fq, phi).ravel()


def dirichlet_values(space: Space, data, t: float) -> np.ndarray:
    """``data(x, y, t, marker)`` at the boundary DOF nodes, in the order of ``flatnonzero(boundary_mask)``."""
    idx = np.flatnonzero(space.boundary_mask)
    xy = space.node_coords[idx]
    markers = space.boundary_dof_markers[idx]
    vals = np.asarray(data(xy[:, 0], xy[:, 1], t, markers), dtype=float)
    return np.broadcast_to(vals, idx.shape).copy()


def eliminate_matrix(matrix: sp.spmatrix, mask: np.ndarray) -> sp.csr_matrix:
    """Zero the rows and columns of masked DOFs and put ones on their diagonal."""
    keep = sp.diags((~mask).astype(float))
    out = keep @ sp.csr_matrix(matrix) @ keep + sp.diags(mask.astype(float))
    return _finish(sp.csr_matrix(out))


def eliminate_rhs(matrix: sp.spmatrix, rhs: np.ndarray, mask: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Move the known boundary values to the right-hand side and keep them at masked rows."""
    known = np.zeros(len(rhs))
    known[mask] = values
    out = rhs - matrix @ known
    out[mask] = values
    return out


def apply_strong_dirichlet(matrix, rhs, space: Space, data=None, t: float = 0.0):
    """Impose the boundary values ``data`` at every boundary DOF by symmetric row/column elimination.

    ``data(x, y, t, marker)`` receives the smallest marker among the boundary
    facets containing the node; ``None`` means homogeneous data.
    """
    mask = space.boundary_mask
    if data is None:
        values = np.zeros(int(mask.sum()))
    else:
        values = dirichlet_values(space, data, t)
    return eliminate_matrix(matrix, mask), eliminate_rhs(matrix, np.asarray(rhs, float), mask, values)
