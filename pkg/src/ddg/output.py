"""CSV time series and legacy ASCII VTK snapshots."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .space import Field

__all__ = ["format_float", "write_csv", "write_vtk"]


def format_float(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if np.isnan(v):
        return "nan"
    return f"{v:.17g}"


def write_csv(path, columns: list[str], rows) -> Path:
    """Header row then one line per row; floats with 17 significant digits."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row has {len(row)} entries, expected {len(columns)}")
            w.writerow([format_float(v) for v in row])
    return path


def write_vtk(path, fields: dict[str, Field], title: str = "ddg") -> Path:
    """Unstructured grid with separate points per cell, so that jumps are kept.

    Every field is written as point data at its Lagrange nodes; P2 fields use
    quadratic triangles (VTK type 22), P1 fields linear triangles (type 5).
    """
    if not fields:
        raise ValueError("no fields to write")
    spaces = {id(f.space) for f in fields.values()}
    if len(spaces) != 1:
        raise ValueError("all fields must share one space")
    space = next(iter(fields.values())).space
    nc, m = space.mesh.num_cells, space.dofs_per_cell
    pts = space.node_coords
    ctype = 5 if space.degree == 1 else 22
    path = Path(path)
    out = [
        "# vtk DataFile Version 3.0",
        title.replace("\n", " ")[:255],
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {len(pts)} double",
    ]
    out.extend(f"{x:.17g} {y:.17g} 0" for x, y in pts)
    ids = np.arange(nc * m).reshape(nc, m)
    out.append(f"CELLS {nc} {nc * (m + 1)}")
    out.extend(f"{m} " + " ".join(map(str, row)) for row in ids)
    out.append(f"CELL_TYPES {nc}")
    out.extend([str(ctype)] * nc)
    out.append(f"POINT_DATA {len(pts)}")
    for name, f in fields.items():
        out.append(f"SCALARS {name.replace(' ', '_')} double 1")
        out.append("LOOKUP_TABLE default")
        out.extend(f"{v:.17g}" for v in f.coeffs)
    path.write_text("\n".join(out) + "\n")
    return path
