"""Generate the unit-square-with-hole Delaunay mesh shipped with the package.

Points: uniform spacing on the square boundary and on the circle, and a
hexagonal lattice inside, kept away from both boundaries.  The triangulation
is scipy's Delaunay; triangles whose centroid falls inside the disc are
dropped.  Outer facets get marker 1, facets on the circle marker 2.

    python3 tools/make_hole_mesh.py [--h 0.01] [--out src/ddg/data/square_hole.msh2d]
"""

import argparse
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay

from ddg.mesh import from_cells, validate, write_mesh

CENTRE = np.array([0.5, 0.5])
RADIUS = 0.1


def square_boundary(h):
    m = int(np.ceil(1.0 / h))
    s = np.linspace(0.0, 1.0, m + 1)[:-1]
    return np.concatenate([
        np.column_stack([s, np.zeros_like(s)]),
        np.column_stack([np.ones_like(s), s]),
        np.column_stack([1.0 - s, np.ones_like(s)]),
        np.column_stack([np.zeros_like(s), 1.0 - s]),
    ])


def circle_boundary(h):
    m = int(np.ceil(2.0 * np.pi * RADIUS / h))
    a = 2.0 * np.pi * np.arange(m) / m
    return CENTRE + RADIUS * np.column_stack([np.cos(a), np.sin(a)])


def lattice(h):
    dy = h * np.sqrt(3.0) / 2.0
    rows = np.arange(dy, 1.0, dy)
    pts = []
    for i, y in enumerate(rows):
        x = np.arange(h / 2.0 if i % 2 else h, 1.0, h)
        pts.append(np.column_stack([x, np.full_like(x, y)]))
    pts = np.concatenate(pts)
    gap = 0.6 * h
    keep = (pts.min(axis=1) > gap) & (pts.max(axis=1) < 1.0 - gap)
    keep &= np.linalg.norm(pts - CENTRE, axis=1) > RADIUS + gap
    return pts[keep]


def build(h):
    pts = np.concatenate([square_boundary(h), circle_boundary(h), lattice(h)])
    tri = Delaunay(pts).simplices
    cen = pts[tri].mean(axis=1)
    tri = tri[np.linalg.norm(cen - CENTRE, axis=1) > RADIUS]
    c = pts[tri]
    area = (c[:, 1, 0] - c[:, 0, 0]) * (c[:, 2, 1] - c[:, 0, 1]) - (c[:, 1, 1] - c[:, 0, 1]) * (c[:, 2, 0] - c[:, 0, 0])
    tri[area < 0] = tri[area < 0][:, [0, 2, 1]]
    mesh = from_cells(pts, tri)
    bf = mesh.boundary_facets
    a, b = mesh.edge_endpoints(bf[:, 0], bf[:, 1])
    mid = 0.5 * (a + b)
    inner = np.linalg.norm(mid - CENTRE, axis=1) < RADIUS + 0.25 * h
    markers = {(int(k), int(e)): (2 if i else 1) for (k, e, _), i in zip(bf, inner)}
    return from_cells(pts, tri, markers)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h", type=float, default=0.01)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parents[1] / "src/ddg/data/square_hole.msh2d")
    args = ap.parse_args()
    mesh = build(args.h)
    problems = validate(mesh)
    if problems:
        raise SystemExit("invalid mesh:\n" + "\n".join(problems))
    write_mesh(mesh, args.out)
    c = mesh.cell_coords
    edges = np.linalg.norm(c - np.roll(c, 1, axis=1), axis=-1)
    print(f"{mesh.num_cells} cells, {mesh.num_vertices} vertices, P1 dofs {3 * mesh.num_cells}")
    print(f"h max {mesh.h.max():.4f}, shortest edge {edges.min():.4f}, markers {sorted(mesh.boundary_markers)}")


if __name__ == "__main__":
    main()
