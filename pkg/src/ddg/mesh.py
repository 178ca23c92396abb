"""Conforming triangular meshes with facet connectivity.

Local edge ``e`` of a cell is the edge opposite local vertex ``e``; it runs
from vertex ``(e + 1) % 3`` to vertex ``(e + 2) % 3``.  Interior facets are
stored once, owned by the lower cell index, and every facet quantity (normal,
scalar jump sign) is expressed in the owner's orientation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

__all__ = [
    "Mesh",
    "MeshError",
    "build_uniform_square",
    "from_cells",
    "read_mesh",
    "write_mesh",
    "validate",
]

EDGE_VERTICES = np.array([[1, 2], [2, 0], [0, 1]])


class MeshError(ValueError):
    """Malformed mesh input or topology."""


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    cells: np.ndarray
    interior_facets: np.ndarray
    boundary_facets: np.ndarray
    h: np.ndarray = field(repr=False)

    @property
    def num_cells(self) -> int:
        return len(self.cells)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @cached_property
    def cell_coords(self) -> np.ndarray:
        """Vertex coordinates per cell, shape (cells, 3, 2)."""
        return self.vertices[self.cells]

    @cached_property
    def jacobians(self) -> np.ndarray:
        c = self.cell_coords
        return np.stack([c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]], axis=-1)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.det(self.jacobians)

    @cached_property
    def areas(self) -> np.ndarray:
        return np.abs(self.signed_areas)

    @cached_property
    def inverse_jacobians(self) -> np.ndarray:
        return np.linalg.inv(self.jacobians)

    @cached_property
    def barycentric_gradients(self) -> np.ndarray:
        """Physical gradients of the barycentric coordinates, shape (cells, 3, 2)."""
        inv = self.inverse_jacobians
        g1, g2 = inv[:, 0, :], inv[:, 1, :]
        return np.stack([-(g1 + g2), g1, g2], axis=1)

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.cell_coords.mean(axis=1)

    def edge_endpoints(self, cells, edges) -> tuple[np.ndarray, np.ndarray]:
        """Start and end coordinates of local edges, following cell orientation."""
        cells = np.asarray(cells)
        edges = np.asarray(edges)
        coords = self.cell_coords[cells]
        idx = EDGE_VERTICES[edges]
        start = np.take_along_axis(coords, idx[..., :1, None], axis=-2)[..., 0, :]
        end = np.take_along_axis(coords, idx[..., 1:, None], axis=-2)[..., 0, :]
        return start, end

    def outward_normals(self, cells, edges) -> np.ndarray:
        start, end = self.edge_endpoints(cells, edges)
        t = end - start
        n = np.stack([t[..., 1], -t[..., 0]], axis=-1)
        return n / np.linalg.norm(n, axis=-1, keepdims=True)

    def edge_lengths(self, cells, edges) -> np.ndarray:
        start, end = self.edge_endpoints(cells, edges)
        return np.linalg.norm(end - start, axis=-1)

    @cached_property
    def facet_h(self) -> np.ndarray:
        """Penalty length scale per interior facet: min of the two cell diameters."""
        f = self.interior_facets
        return np.minimum(self.h[f[:, 0]], self.h[f[:, 2]])

    @property
    def boundary_markers(self) -> set[int]:
        return set(np.unique(self.boundary_facets[:, 2]).tolist())


def _cell_diameters(vertices, cells):
    c = vertices[cells]
    e = c[:, EDGE_VERTICES[:, 1]] - c[:, EDGE_VERTICES[:, 0]]
    return np.linalg.norm(e, axis=-1).max(axis=1)


def _connectivity(cells):
    """Pair up cell edges; returns (interior, boundary, multiplicity errors)."""
    nc = len(cells)
    ekeys = np.sort(cells[:, EDGE_VERTICES], axis=-1).reshape(-1, 2)
    owner = np.repeat(np.arange(nc), 3)
    local = np.tile(np.arange(3), nc)
    uniq, inverse, counts = np.unique(ekeys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    order = np.lexsort((owner, inverse))
    first = np.searchsorted(inverse[order], np.arange(len(uniq)))

    bad = np.flatnonzero(counts > 2)
    bnd = np.flatnonzero(counts == 1)
    itr = np.flatnonzero(counts == 2)

    a = order[first[itr]]
    b = order[first[itr] + 1]
    interior = np.stack([owner[a], local[a], owner[b], local[b]], axis=1)
    boundary = np.stack([owner[order[first[bnd]]], local[order[first[bnd]]]], axis=1)
    return interior.astype(np.int64), boundary.astype(np.int64), uniq[bad]


def from_cells(vertices, cells, markers=None, default_marker=0) -> Mesh:
    """Build a Mesh from vertices and CCW cells, rebuilding all connectivity.

    ``markers`` maps ``(cell, local_edge)`` to an integer boundary tag; boundary
    facets without an entry get ``default_marker``.
    """
    vertices = np.ascontiguousarray(vertices, dtype=float)
    cells = np.ascontiguousarray(cells, dtype=np.int64)
    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise MeshError("vertices must have shape (N, 2)")
    if cells.ndim != 2 or cells.shape[1] != 3:
        raise MeshError("cells must have shape (M, 3)")
    if cells.size and (cells.min() < 0 or cells.max() >= len(vertices)):
        raise MeshError("cell references a vertex index out of range")

    c = vertices[cells]
    e1, e2 = c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]
    area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    inverted = np.flatnonzero(area <= 0)
    if len(inverted):
        raise MeshError(f"inverted or degenerate cell {int(inverted[0])} (signed area {area[inverted[0]]:.3e})")

    interior, boundary, bad = _connectivity(cells)
    if len(bad):
        i, j = bad[0]
        raise MeshError(f"non-manifold facet ({i}, {j}) shared by more than two cells")

    tags = np.full(len(boundary), default_marker, dtype=np.int64)
    if markers:
        lookup = {(int(k), int(e)): i for i, (k, e) in enumerate(boundary)}
        for (k, e), m in markers.items():
            try:
                tags[lookup[(int(k), int(e))]] = int(m)
            except KeyError:
                raise MeshError(f"boundary entry ({k}, {e}) is not a boundary facet") from None
    bfacets = np.column_stack([boundary, tags]) if len(boundary) else np.zeros((0, 3), np.int64)
    return Mesh(vertices, cells, interior, bfacets, _cell_diameters(vertices, cells))


def build_uniform_square(n: int, pattern: str = "right-diagonal", extent=(0.0, 1.0, 0.0, 1.0)) -> Mesh:
    """Uniform n-by-n triangulation of a rectangle ``(x0, x1, y0, y1)``.

    ``right-diagonal`` splits each square along the diagonal through its lower
    left and upper right corners; ``criss-cross`` splits it into four by its
    centre.  Boundary facets are tagged 1 (bottom), 2 (right), 3 (top), 4 (left).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    x0, x1, y0, y1 = map(float, extent)
    if not (x1 > x0 and y1 > y0):
        raise ValueError("degenerate extent")
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    j, i = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    i, j = i.ravel(), j.ravel()
    sw = j * (n + 1) + i
    se = sw + 1
    nw = sw + (n + 1)
    ne = nw + 1

    if pattern == "right-diagonal":
        cells = np.empty((2 * n * n, 3), dtype=np.int64)
        cells[0::2] = np.column_stack([sw, se, ne])
        cells[1::2] = np.column_stack([sw, ne, nw])
    elif pattern == "criss-cross":
        centres = np.column_stack([(xs[i] + xs[i + 1]) / 2, (ys[j] + ys[j + 1]) / 2])
        ctr = len(verts) + np.arange(n * n)
        verts = np.vstack([verts, centres])
        cells = np.empty((4 * n * n, 3), dtype=np.int64)
        cells[0::4] = np.column_stack([sw, se, ctr])
        cells[1::4] = np.column_stack([se, ne, ctr])
        cells[2::4] = np.column_stack([ne, nw, ctr])
        cells[3::4] = np.column_stack([nw, sw, ctr])
    else:
        raise ValueError(f"unknown pattern {pattern!r}")

    mesh = from_cells(verts, cells)
    mid = 0.5 * sum(mesh.edge_endpoints(mesh.boundary_facets[:, 0], mesh.boundary_facets[:, 1]))
    tol = 1e-12 * max(x1 - x0, y1 - y0)
    tags = np.select(
        [np.abs(mid[:, 1] - y0) < tol, np.abs(mid[:, 0] - x1) < tol, np.abs(mid[:, 1] - y1) < tol],
        [1, 2, 3],
        default=4,
    )
    mesh.boundary_facets[:, 2] = tags
    return mesh


def _tokens(path):
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].split()
            if line:
                yield lineno, line


def read_mesh(path) -> Mesh:
    """Read the line-oriented ``mesh2d 1`` ASCII format."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    lines = _tokens(path)

    def take(expect_len, conv, what):
        try:
            lineno, tok = next(lines)
        except StopIteration:
            raise MeshError(f"{path}: unexpected end of file while reading {what}") from None
        if len(tok) != expect_len:
            raise MeshError(f"{path}:{lineno}: expected {expect_len} values for {what}, got {len(tok)}")
        try:
            return [conv(t) for t in tok]
        except ValueError:
            raise MeshError(f"{path}:{lineno}: cannot parse {what}: {' '.join(tok)}") from None

    def section(name):
        try:
            lineno, tok = next(lines)
        except StopIteration:
            raise MeshError(f"{path}: missing section {name!r}") from None
        if len(tok) != 2 or tok[0] != name:
            raise MeshError(f"{path}:{lineno}: expected '{name} <count>'")
        try:
            count = int(tok[1])
        except ValueError:
            raise MeshError(f"{path}:{lineno}: bad count {tok[1]!r}") from None
        if count < 0:
            raise MeshError(f"{path}:{lineno}: negative count")
        return count

    try:
        lineno, tok = next(lines)
    except StopIteration:
        raise MeshError(f"{path}: empty file") from None
    if tok != ["mesh2d", "1"]:
        raise MeshError(f"{path}:{lineno}: expected header 'mesh2d 1'")

    nv = section("vertices")
    verts = [take(2, float, "vertex") for _ in range(nv)]
    nc = section("cells")
    cells = [take(3, int, "cell") for _ in range(nc)]
    nb = section("boundary")
    markers = {}
    for _ in range(nb):
        k, e, m = take(3, int, "boundary facet")
        markers[(k, e)] = m
    rest = next(lines, None)
    if rest is not None:
        raise MeshError(f"{path}:{rest[0]}: trailing content")
    return from_cells(np.array(verts, float).reshape(-1, 2), np.array(cells, np.int64).reshape(-1, 3), markers)


def write_mesh(mesh: Mesh, path) -> None:
    with open(path, "w") as fh:
        fh.write("mesh2d 1\n")
        fh.write(f"vertices {mesh.num_vertices}\n")
        for x, y in mesh.vertices:
            fh.write(f"{float(x):.17g} {float(y):.17g}\n")
        fh.write(f"cells {mesh.num_cells}\n")
        for i, j, k in mesh.cells:
            fh.write(f"{i} {j} {k}\n")
        fh.write(f"boundary {len(mesh.boundary_facets)}\n")
        for c, e, m in mesh.boundary_facets:
            fh.write(f"{c} {e} {m}\n")


def validate(mesh: Mesh) -> list[str]:
    """Return the list of violated mesh invariants (empty when valid)."""
    report = []
    area = mesh.signed_areas
    for k in np.flatnonzero(area <= 0):
        report.append(f"cell {k}: non-positive signed area {area[k]:.3e}")

    interior, boundary, bad = _connectivity(mesh.cells)
    for i, j in bad:
        report.append(f"non-manifold facet ({i}, {j})")

    def keyset(arr):
        return {tuple(r) for r in np.asarray(arr)[:, :4].tolist()} if len(arr) else set()

    if keyset(interior) != keyset(mesh.interior_facets):
        report.append("interior facet list does not match cell adjacency")
    if {tuple(r) for r in boundary.tolist()} != {tuple(r) for r in mesh.boundary_facets[:, :2].tolist()}:
        report.append("boundary facet list does not match cell adjacency")

    f = mesh.interior_facets
    if len(f):
        if np.any(f[:, 0] >= f[:, 2]):
            report.append("interior facet owner is not the lower cell index")
        na = mesh.outward_normals(f[:, 0], f[:, 1])
        nb = mesh.outward_normals(f[:, 2], f[:, 3])
        worst = np.abs(na + nb).max()
        if worst > 1e-14:
            report.append(f"facet normals not opposite (max deviation {worst:.2e})")
        ma = 0.5 * sum(mesh.edge_endpoints(f[:, 0], f[:, 1]))
        mb = 0.5 * sum(mesh.edge_endpoints(f[:, 2], f[:, 3]))
        worst = np.abs(ma - mb).max()
        if worst > 1e-14 * max(1.0, np.abs(mesh.vertices).max()):
            report.append(f"facet midpoints do not coincide (max deviation {worst:.2e})")

    hk = _cell_diameters(mesh.vertices, mesh.cells)
    if not np.allclose(hk, mesh.h, rtol=0, atol=1e-15):
        report.append("h does not equal the longest edge length")
    return report
