"""Command-line entry point: ``ddg run | mesh-info | validate``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .experiments import ConfigError, load_config, run
from .mesh import MeshError, read_mesh, validate

__all__ = ["main"]


def _run(args) -> int:
    cfg = load_config(args.config)
    files = run(cfg, out_dir=args.out, workers=args.workers)
    for f in files:
        print(f)
    return 0


def _mesh_info(args) -> int:
    mesh = read_mesh(args.file)
    problems = validate(mesh)
    markers = sorted(mesh.boundary_markers)
    print(f"file        {args.file}")
    print(f"vertices    {mesh.num_vertices}")
    print(f"cells       {mesh.num_cells}")
    print(f"interior    {len(mesh.interior_facets)} facets")
    print(f"boundary    {len(mesh.boundary_facets)} facets, markers {markers}")
    for m in markers:
        print(f"  marker {m}: {int((mesh.boundary_facets[:, 2] == m).sum())} facets")
    print(f"h           max {mesh.h.max():.6g}, min {mesh.h.min():.6g}")
    print(f"area        {mesh.areas.sum():.12g}")
    print(f"P1/P2 dofs  {3 * mesh.num_cells} / {6 * mesh.num_cells}")
    if problems:
        print("problems:")
        for p in problems:
            print(f"  {p}")
        return 1
    print("valid       yes")
    return 0


def _validate(args) -> int:
    cfg = load_config(args.config)
    print(f"{args.config}: ok ({cfg.experiment})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ddg", description="Bound-preserving dG drift-diffusion experiments")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config", type=Path)
    p.add_argument("--out", type=Path, default=None, help="output directory (default: output_dir from the config)")
    p.add_argument("--workers", type=int, default=1, help="processes for independent runs")
    p.set_defaults(func=_run)

    p = sub.add_parser("mesh-info", help="summarise and check a mesh2d file")
    p.add_argument("file", type=Path)
    p.set_defaults(func=_mesh_info)

    p = sub.add_parser("validate", help="check a config without running it")
    p.add_argument("config", type=Path)
    p.set_defaults(func=_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, MeshError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
