"""Discontinuous Lagrange spaces of degree 1 and 2 on triangles."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .mesh import EDGE_VERTICES, Mesh
from .quadrature import triangle_rule

__all__ = [
    "Space",
    "Field",
    "create_space",
    "reference_nodes",
    "basis_values",
    "basis_gradients",
    "interpolate",
    "l2_project",
    "evaluate",
    "nodal_extrema",
]


def reference_nodes(p: int) -> np.ndarray:
    """Barycentric Lagrange nodes; P2 adds midpoints of the edges opposite vertices 0, 1, 2."""
    verts = np.eye(3)
    if p == 1:
        return verts
    if p == 2:
        mids = 0.5 * (verts[EDGE_VERTICES[:, 0]] + verts[EDGE_VERTICES[:, 1]])
        return np.vstack([verts, mids])
    raise ValueError(f"unsupported degree {p}; expected 1 or 2")


def basis_values(p: int, bary) -> np.ndarray:
    lam = np.asarray(bary, dtype=float)
    if p == 1:
        return lam.copy()
    if p == 2:
        i, j = EDGE_VERTICES[:, 0], EDGE_VERTICES[:, 1]
        vert = lam * (2.0 * lam - 1.0)
        edge = 4.0 * lam[..., i] * lam[..., j]
        return np.concatenate([vert, edge], axis=-1)
    raise ValueError(f"unsupported degree {p}; expected 1 or 2")


def basis_dlambda(p: int, bary) -> np.ndarray:
    """Derivatives of each basis function w.r.t. the three barycentrics, shape (..., m, 3)."""
    lam = np.asarray(bary, dtype=float)
    shape = lam.shape[:-1]
    if p == 1:
        return np.broadcast_to(np.eye(3), shape + (3, 3)).copy()
    if p == 2:
        out = np.zeros(shape + (6, 3))
        for k in range(3):
            out[..., k, k] = 4.0 * lam[..., k] - 1.0
        for e, (i, j) in enumerate(EDGE_VERTICES):
            out[..., 3 + e, i] = 4.0 * lam[..., j]
            out[..., 3 + e, j] = 4.0 * lam[..., i]
        return out
    raise ValueError(f"unsupported degree {p}; expected 1 or 2")


def basis_gradients(p: int, bary, lam_grads) -> np.ndarray:
    """Physical basis gradients.

    ``bary`` is (..., 3) and ``lam_grads`` the matching per-cell barycentric
    gradients (..., 3, 2) broadcastable against it; returns (..., m, 2).
    """
    d = basis_dlambda(p, bary)
    return np.einsum("...mk,...kd->...md", d, lam_grads)


@dataclass(frozen=True, eq=False)
class Space:
    mesh: Mesh
    degree: int

    def __post_init__(self):
        if self.degree not in (1, 2):
            raise ValueError(f"unsupported degree {self.degree}; expected 1 or 2")

    @property
    def dofs_per_cell(self) -> int:
        return (self.degree + 1) * (self.degree + 2) // 2

    @property
    def num_dofs(self) -> int:
        return self.mesh.num_cells * self.dofs_per_cell

    @cached_property
    def cell_dofs(self) -> np.ndarray:
        return np.arange(self.num_dofs).reshape(self.mesh.num_cells, self.dofs_per_cell)

    @cached_property
    def ref_nodes(self) -> np.ndarray:
        return reference_nodes(self.degree)

    @cached_property
    def node_coords(self) -> np.ndarray:
        xy = np.einsum("mk,ckd->cmd", self.ref_nodes, self.mesh.cell_coords)
        return xy.reshape(-1, 2)

    @cached_property
    def _boundary_info(self):
        m = self.dofs_per_cell
        mask = np.zeros(self.num_dofs, dtype=bool)
        marker = np.full(self.num_dofs, np.iinfo(np.int64).max, dtype=np.int64)
        bf = self.mesh.boundary_facets
        # a node lies on local edge e iff its barycentric coordinate e vanishes
        on_edge = np.isclose(self.ref_nodes, 0.0, atol=1e-12)  # (m, 3)
        for e in range(3):
            sel = bf[bf[:, 1] == e]
            if not len(sel):
                continue
            local = np.flatnonzero(on_edge[:, e])
            dofs = (sel[:, :1] * m + local[None, :]).ravel()
            tags = np.repeat(sel[:, 2], len(local))
            mask[dofs] = True
            np.minimum.at(marker, dofs, tags)
        marker[~mask] = -1
        return mask, marker

    @property
    def boundary_mask(self) -> np.ndarray:
        return self._boundary_info[0]

    @property
    def boundary_dof_markers(self) -> np.ndarray:
        """Marker of each boundary DOF (smallest tag among its facets); -1 elsewhere."""
        return self._boundary_info[1]

    def cell_of_dof(self, dofs) -> np.ndarray:
        return np.asarray(dofs) // self.dofs_per_cell

    def tabulate(self, degree: int):
        """Quadrature data on every cell for a rule of the given degree.

        Returns (rule, xy (cells, Q, 2), weights (cells, Q), phi (Q, m), dphi (cells, Q, m, 2)).
        """
        rule = triangle_rule(degree)
        mesh = self.mesh
        xy = np.einsum("qk,ckd->cqd", rule.points, mesh.cell_coords)
        w = 2.0 * mesh.areas[:, None] * rule.weights[None, :]
        phi = basis_values(self.degree, rule.points)
        dphi = basis_gradients(self.degree, rule.points[None], mesh.barycentric_gradients[:, None])
        return rule, xy, w, phi, dphi


def create_space(mesh: Mesh, p: int) -> Space:
    return Space(mesh, int(p))


@dataclass(eq=False)
class Field:
    space: Space
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.num_dofs,):
            raise ValueError(f"expected {self.space.num_dofs} coefficients, got {self.coeffs.shape}")

    @classmethod
    def zeros(cls, space: Space) -> "Field":
        return cls(space, np.zeros(space.num_dofs))

    def copy(self) -> "Field":
        return Field(self.space, self.coeffs.copy())

    def cell_coeffs(self) -> np.ndarray:
        return self.coeffs.reshape(self.space.mesh.num_cells, self.space.dofs_per_cell)

    def values(self, cells, bary) -> np.ndarray:
        """Field values at barycentric points, one point per listed cell."""
        cells = np.asarray(cells)
        phi = basis_values(self.space.degree, bary)
        return np.einsum("...m,...m->...", phi, self.cell_coeffs()[cells])

    def gradients(self, cells, bary) -> np.ndarray:
        cells = np.asarray(cells)
        lg = self.space.mesh.barycentric_gradients[cells]
        dphi = basis_gradients(self.space.degree, bary, lg)
        return np.einsum("...md,...m->...d", dphi, self.cell_coeffs()[cells])

    def laplacians(self, cells, bary) -> np.ndarray:
        """Broken Laplacian; zero for P1, piecewise constant for P2."""
        cells = np.asarray(cells)
        if self.space.degree == 1:
            return np.zeros(np.broadcast_shapes(cells.shape, np.shape(bary)[:-1]))
        lg = self.space.mesh.barycentric_gradients[cells]  # (..., 3, 2)
        gg = np.einsum("...kd,...ld->...kl", lg, lg)
        hess = np.zeros((6, 3, 3))
        for k in range(3):
            hess[k, k, k] = 4.0
        for e, (i, j) in enumerate(EDGE_VERTICES):
            hess[3 + e, i, j] = hess[3 + e, j, i] = 4.0
        lap = np.einsum("mkl,...kl->...m", hess, gg)
        val = np.einsum("...m,...m->...", lap, self.cell_coeffs()[cells])
        return np.broadcast_to(val, np.broadcast_shapes(val.shape, np.shape(bary)[:-1])).copy()


def interpolate(space: Space, f, inward: float = 1e-8) -> Field:
    """Lagrange interpolant of ``f(x, y)``.

    Each node is sampled at ``node + inward * (centroid - node)`` so that data
    discontinuous along mesh lines is taken from the owning cell.
    """
    nodes = space.node_coords.reshape(space.mesh.num_cells, space.dofs_per_cell, 2)
    if inward:
        nodes = nodes + inward * (space.mesh.centroids[:, None, :] - nodes)
    nodes = nodes.reshape(-1, 2)
    vals = np.broadcast_to(np.asarray(f(nodes[:, 0], nodes[:, 1]), dtype=float), (space.num_dofs,))
    return Field(space, vals.copy())


def l2_project(space: Space, f, degree: int | None = None) -> Field:
    """Element-wise L2 projection of ``f(x, y)`` (the dG mass matrix is block diagonal)."""
    if degree is None:
        degree = 2 * space.degree + 4
    _, xy, w, phi, _ = space.tabulate(degree)
    fq = np.broadcast_to(np.asarray(f(xy[..., 0], xy[..., 1]), dtype=float), w.shape)
    mass = np.einsum("cq,qi,qj->cij", w, phi, phi)
    rhs = np.einsum("cq,cq,qi->ci", w, fq, phi)
    try:
        c = np.linalg.solve(mass, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("singular local mass matrix; the mesh is corrupt") from exc
    return Field(space, c.ravel())


def evaluate(field: Field, cell: int, point) -> float:
    nc = field.space.mesh.num_cells
    if not 0 <= cell < nc:
        raise IndexError(f"cell {cell} out of range for mesh with {nc} cells")
    return float(field.values(np.int64(cell), np.asarray(point, float)))


def nodal_extrema(field: Field) -> tuple[float, float]:
    return float(field.coeffs.min()), float(field.coeffs.max())
