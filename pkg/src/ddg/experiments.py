"""Config-driven runs of the drift-diffusion and PNP experiments.

A config is a flat TOML file.  Missing keys take the defaults of the chosen
experiment (see ``DEFAULTS``); unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import manufactured
from .bounds import BOUND_KINDS, ExtragradConfig, constrained_step, make_bounds
from .diagnostics import boundary_energy_change, error_energy_norm, l2_norm
from .expr import ExpressionError, compile_scalar, potential_from_expression
from .mesh import Mesh, build_uniform_square, read_mesh
from .output import write_csv, write_vtk
from .pnp import PnpConfig, PnpStepper, background_charge
from .potential import linear_potential, sine_ridge_potential
from .space import Field, create_space, interpolate, l2_project
from .stepping import SCHEMES, StepConfig, StepOperator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "EXPERIMENTS",
    "DEFAULTS",
    "load_config",
    "config_from_dict",
    "run",
    "run_series",
    "SeriesRecord",
    "named_potential",
    "checkerboard",
    "hole_boundary_data",
    "pnp_initial_density",
    "data_path",
]

log = logging.getLogger(__name__)

EXPERIMENTS = ("convergence", "checkerboard", "boundary_layer", "pnp", "custom")
H_CONVENTIONS = ("diameter", "inverse-n")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    degree: int = 1
    tau: Optional[float] = None
    t_final: Optional[float] = None
    sigma: float = 10.0
    mu: float = 1.0
    gamma: float = 1e-5
    extragrad_tol: float = 1e-6
    extragrad_max_iter: int = 10**6
    bounds: Optional[str] = None
    constrained: bool = True
    unconstrained_twin: bool = False
    output_dir: str = "output"
    snapshot_stride: int = 0
    scheme: str = "backward-euler"
    mesh_file: Optional[str] = None
    mesh_n: Optional[int] = None
    mesh_pattern: str = "right-diagonal"
    refinements: tuple = ()
    h_convention: str = "diameter"
    checker_cells: int = 4
    potentials: tuple = ()
    eps: float = 3e-4
    potential: Optional[str] = None
    initial: Optional[str] = None
    forcing: Optional[str] = None
    boundary: Optional[str] = None
    base_dir: str = field(default=".", compare=False)

    def __post_init__(self):
        _check(self)

    @property
    def num_steps(self) -> int:
        return int(round(self.t_final / self.tau))

    @property
    def runs(self) -> list[bool]:
        """Constrained flags of the runs to perform, primary run first."""
        return [self.constrained, not self.constrained] if self.unconstrained_twin else [self.constrained]


DEFAULTS = {
    "convergence": dict(t_final=0.5, bounds="positivity", refinements=None),
    "checkerboard": dict(
        mesh_n=100, tau=3e-4, t_final=0.03, bounds="two-sided", unconstrained_twin=True,
    ),
    "boundary_layer": dict(
        mesh_file="square_hole.msh2d", tau=0.01, t_final=1.0, sigma=100.0, bounds="positivity",
        potentials=("psi1", "psi2"), unconstrained_twin=True,
    ),
    "pnp": dict(
        mesh_n=100, mesh_pattern="criss-cross", tau=5e-3, t_final=0.3, sigma=100.0, eps=3e-4,
        bounds="positivity", unconstrained_twin=True,
    ),
    "custom": dict(mesh_n=16, tau=0.01, t_final=0.1, bounds="positivity"),
}

_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _require(cond, key, msg):
    if not cond:
        raise ConfigError(f"{key}: {msg}")


def _check(cfg: ExperimentConfig):
    _require(cfg.experiment in EXPERIMENTS, "experiment", f"expected one of {EXPERIMENTS}, got {cfg.experiment!r}")
    _require(cfg.degree in (1, 2), "degree", "must be 1 or 2")
    for key in ("sigma", "gamma", "extragrad_tol", "eps"):
        _require(getattr(cfg, key) > 0, key, "must be positive")
    _require(cfg.mu >= 0, "mu", "must be non-negative")
    _require(cfg.extragrad_max_iter > 0, "extragrad_max_iter", "must be positive")
    _require(cfg.snapshot_stride >= 0, "snapshot_stride", "must be non-negative")
    _require(cfg.scheme in SCHEMES, "scheme", f"expected one of {SCHEMES}")
    _require(cfg.mesh_pattern in ("right-diagonal", "criss-cross"), "mesh_pattern", "unknown pattern")
    _require(cfg.h_convention in H_CONVENTIONS, "h_convention", f"expected one of {H_CONVENTIONS}")
    _require(cfg.bounds is None or cfg.bounds in BOUND_KINDS, "bounds", f"expected one of {BOUND_KINDS}")
    _require(cfg.checker_cells > 0, "checker_cells", "must be positive")
    if cfg.experiment == "convergence":
        _require(cfg.t_final is not None and cfg.t_final > 0, "t_final", "must be positive")
        _require(len(cfg.refinements) >= 2, "refinements", "need at least two meshes")
        _require(all(int(n) == n and n > 0 for n in cfg.refinements), "refinements", "entries must be positive integers")
        _require(cfg.tau is None or cfg.tau > 0, "tau", "must be positive")
    else:
        _require(cfg.tau is not None and cfg.tau > 0, "tau", "must be positive")
        _require(cfg.t_final is not None and cfg.t_final > 0, "t_final", "must be positive")
        _require(cfg.num_steps >= 1, "t_final", "shorter than one time step")
        _require(abs(cfg.num_steps * cfg.tau - cfg.t_final) <= 1e-9 * cfg.t_final, "t_final", "must be a multiple of tau")
        _require(cfg.mesh_file is not None or (cfg.mesh_n or 0) > 0, "mesh_n", "must be positive (or give mesh_file)")
    if cfg.experiment == "boundary_layer":
        _require(cfg.mesh_file is not None, "mesh_file", "boundary_layer needs a mesh file with markers 1 and 2")
        _require(len(cfg.potentials) > 0, "potentials", "list at least one potential")
        for name in cfg.potentials:
            _require(name in NAMED_POTENTIALS, "potentials", f"unknown potential {name!r}; known: {sorted(NAMED_POTENTIALS)}")
    if cfg.experiment == "pnp":
        _require(cfg.bounds is not None, "bounds", "pnp needs a bounds kind")
    if cfg.experiment == "custom":
        _require(cfg.potential is not None, "potential", "custom runs need a potential expression")
        _require(cfg.initial is not None, "initial", "custom runs need an initial expression")
        try:
            potential_from_expression(cfg.potential)
            for key in ("initial", "forcing", "boundary"):
                if getattr(cfg, key) is not None:
                    compile_scalar(getattr(cfg, key))
        except ExpressionError as exc:
            raise ConfigError(f"expression: {exc}") from None
    if any(cfg.runs):
        _require(cfg.bounds is not None, "bounds", "constrained runs need a bounds kind")


def config_from_dict(data: dict, base_dir=".") -> ExperimentConfig:
    data = dict(data)
    for key, val in data.items():
        if isinstance(val, dict):
            raise ConfigError(f"{key}: nested tables are not supported; use flat keys")
    unknown = sorted(set(data) - set(_FIELDS) - {"base_dir"})
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown key")
    if "experiment" not in data:
        raise ConfigError("experiment: missing")
    exp = data["experiment"]
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment: expected one of {EXPERIMENTS}, got {exp!r}")
    merged = dict(DEFAULTS[exp])
    merged.update(data)
    if exp == "convergence" and merged.get("refinements") is None:
        merged["refinements"] = (4, 8, 16, 32, 64) if merged.get("degree", 1) == 1 else (4, 8, 16, 32)
    for key in ("refinements", "potentials"):
        if key in merged and merged[key] is not None:
            if not isinstance(merged[key], (list, tuple)):
                raise ConfigError(f"{key}: expected a list")
            merged[key] = tuple(merged[key])
    _coerce(merged)
    merged["base_dir"] = str(base_dir)
    return ExperimentConfig(**merged)


def _coerce(merged: dict):
    for key, val in merged.items():
        f = _FIELDS.get(key)
        if f is None or val is None:
            continue
        typ = str(f.type)
        if "bool" in typ:
            if not isinstance(val, bool):
                raise ConfigError(f"{key}: expected true or false")
        elif "float" in typ:
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise ConfigError(f"{key}: expected a number")
            merged[key] = float(val)
        elif "int" in typ:
            if isinstance(val, bool) or not isinstance(val, int):
                raise ConfigError(f"{key}: expected an integer")
        elif "str" in typ and not isinstance(val, str):
            raise ConfigError(f"{key}: expected a string")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data, base_dir=path.parent)


def data_path(name: str) -> Path:
    return Path(str(resources.files("ddg") / "data" / name))


def resolve_mesh_file(cfg: ExperimentConfig) -> Path:
    p = Path(cfg.mesh_file)
    candidates = [p] if p.is_absolute() else [Path(cfg.base_dir) / p, Path.cwd() / p, data_path(p.name)]
    for c in candidates:
        if c.exists():
            return c
    raise FileNotFoundError(f"mesh_file: {cfg.mesh_file} not found (looked in {', '.join(map(str, candidates))})")


def build_mesh(cfg: ExperimentConfig, n: Optional[int] = None) -> Mesh:
    if cfg.mesh_file is not None and n is None:
        return read_mesh(resolve_mesh_file(cfg))
    return build_uniform_square(n if n is not None else cfg.mesh_n, cfg.mesh_pattern)


# ---------------------------------------------------------------- problem data

NAMED_POTENTIALS = {
    "psi1": lambda: sine_ridge_potential(100.0),
    "psi2": lambda: sine_ridge_potential(-100.0),
    "diagonal": lambda: linear_potential(100.0, 100.0),
}


def named_potential(name: str):
    try:
        return NAMED_POTENTIALS[name]()
    except KeyError:
        raise ConfigError(f"potentials: unknown potential {name!r}") from None


def checkerboard(cells: int = 4) -> Callable:
    """1 where floor(k x) + floor(k y) is even, else 0."""

    def f(x, y):
        return ((np.floor(cells * np.asarray(x)) + np.floor(cells * np.asarray(y))) % 2 == 0).astype(float)

    return f


def hole_ramp(t):
    return 0.5 + 0.5 * np.tanh(8.0 * (2.0 * t - 0.5))


def hole_boundary_data(x, y, t, markers):
    """0 on the outer square (marker 1), the tanh ramp on the disc (marker 2)."""
    return np.where(np.asarray(markers) == 2, hole_ramp(t), 0.0) + 0.0 * np.asarray(x)


def pnp_initial_density(x, y):
    return 2.5 * np.exp(-((8.0 * (x - 0.5)) ** 2) - (8.0 * (y - 0.5)) ** 2)


# ---------------------------------------------------------------- time loops


@dataclass
class SeriesRecord:
    t: float
    min_nodal: float
    max_nodal: float
    half_l2_sq: float
    energy_change: float = float("nan")
    iterations: int = 0


def _ecfg(cfg: ExperimentConfig) -> ExtragradConfig:
    return ExtragradConfig(gamma=cfg.gamma, tol=cfg.extragrad_tol, max_iter=cfg.extragrad_max_iter)


def run_series(
    u0: Field,
    psi,
    step: StepConfig,
    n_steps: int,
    constrained: bool,
    bounds_kind: Optional[str],
    ecfg: ExtragradConfig,
    on_step: Optional[Callable] = None,
) -> tuple[Field, list[SeriesRecord]]:
    """March ``n_steps`` steps; ``on_step(k, t, u_prev, u, info)`` is called after each."""
    space = u0.space
    op = StepOperator(space, step)
    u = u0
    bounds = make_bounds(bounds_kind, u0) if constrained else None
    lo, hi = float(u0.coeffs.min()), float(u0.coeffs.max())
    records = [SeriesRecord(0.0, lo, hi, 0.5 * l2_norm(u0) ** 2)]
    for k in range(1, n_steps + 1):
        t_new = k * step.tau
        info: dict = {}
        if constrained:
            if bounds_kind == "time-varying-upper":
                bounds = make_bounds(bounds_kind, u)
            new = constrained_step(u, psi, step, bounds, ecfg, t_new, operator=op, info=info)
        else:
            new = op.step(u, psi, t_new)
        rec = SeriesRecord(
            t_new, float(new.coeffs.min()), float(new.coeffs.max()), 0.5 * l2_norm(new) ** 2,
            boundary_energy_change(new, u, step.tau, psi, step.psi_time(t_new)),
            int(info.get("iterations", 0)),
        )
        records.append(rec)
        if on_step is not None:
            on_step(k, t_new, u, new, info)
        u = new
    return u, records


def _parallel_map(fn, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def _label(constrained: bool) -> str:
    return "constrained" if constrained else "unconstrained"


# ---------------------------------------------------------------- experiments


def convergence_point(cfg: ExperimentConfig, n: int) -> tuple[float, float, float, int]:
    """Final-time energy-norm error on the n x n mesh: (error, wall seconds, tau, steps)."""
    start = time.perf_counter()
    mesh = build_uniform_square(n, cfg.mesh_pattern)
    space = create_space(mesh, cfg.degree)
    hsize = float(mesh.h.max()) if cfg.h_convention == "diameter" else 1.0 / n
    tau = cfg.tau if cfg.tau is not None else hsize ** (cfg.degree + 1)
    steps = max(1, int(round(cfg.t_final / tau)))
    psi = manufactured.manufactured_potential()
    step = StepConfig(tau, cfg.sigma, cfg.mu, cfg.scheme, forcing=manufactured.forcing)
    u, _ = run_series(Field.zeros(space), psi, step, steps, cfg.constrained, cfg.bounds, _ecfg(cfg))
    t_end = steps * tau
    err = error_energy_norm(
        u, manufactured.exact_solution, manufactured.exact_gradient, t_end, tau, cfg.sigma, cfg.mu, psi
    )
    return err, time.perf_counter() - start, tau, steps


def _run_convergence(cfg: ExperimentConfig, out: Path, workers: int) -> list[Path]:
    ns = [int(n) for n in cfg.refinements]
    results = _parallel_map(_ConvergenceJob(cfg), ns, workers)
    rows = []
    for i, (n, (err, wall, _, _)) in enumerate(zip(ns, results)):
        rate = None
        if i:
            rate = np.log(results[i - 1][0] / err) / np.log(ns[i] / ns[i - 1])
        rows.append((1.0 / n, err, wall, rate))
    return [write_csv(out / "convergence.csv", ["h", "error", "wall_seconds", "observed_rate"], rows)]


@dataclass(frozen=True)
class _ConvergenceJob:
    cfg: ExperimentConfig

    def __call__(self, n):
        return convergence_point(self.cfg, n)


SERIES_COLUMNS = ["run", "t", "min_nodal", "max_nodal", "half_l2_sq", "energy_change", "iterations"]


def _series_rows(label, records, prefix=()):
    return [(*prefix, label, r.t, r.min_nodal, r.max_nodal, r.half_l2_sq, r.energy_change, r.iterations) for r in records]


def _snapshotter(cfg: ExperimentConfig, out: Path, tag: str, name: str = "u"):
    if not cfg.snapshot_stride:
        return None, None
    folder = out / "snapshots" / tag
    folder.mkdir(parents=True, exist_ok=True)
    files: list[Path] = []

    def write(k, field_map):
        if k % cfg.snapshot_stride == 0:
            files.append(write_vtk(folder / f"{name}_{k:04d}.vtk", field_map, f"{tag} step {k}"))

    return write, files


@dataclass(frozen=True)
class _SeriesJob:
    cfg: ExperimentConfig
    out: Path

    def __call__(self, job):
        potential_name, constrained = job
        cfg = self.cfg
        mesh = build_mesh(cfg)
        space = create_space(mesh, cfg.degree)
        if cfg.experiment == "checkerboard":
            psi = named_potential("diagonal")
            u0 = interpolate(space, checkerboard(cfg.checker_cells))
            step = StepConfig(cfg.tau, cfg.sigma, cfg.mu, cfg.scheme)
        elif cfg.experiment == "boundary_layer":
            if set(mesh.boundary_markers) != {1, 2}:
                raise ConfigError(f"mesh_file: boundary_layer needs markers {{1, 2}}, found {sorted(mesh.boundary_markers)}")
            psi = named_potential(potential_name)
            u0 = Field.zeros(space)
            step = StepConfig(cfg.tau, cfg.sigma, cfg.mu, cfg.scheme, dirichlet=hole_boundary_data)
        else:
            psi = potential_from_expression(cfg.potential)
            init = compile_scalar(cfg.initial)
            u0 = interpolate(space, lambda x, y: init(x, y, 0.0))
            forcing = compile_scalar(cfg.forcing) if cfg.forcing else None
            g = None
            if cfg.boundary:
                gb = compile_scalar(cfg.boundary)
                g = lambda x, y, t, markers: gb(x, y, t)  # noqa: E731
            step = StepConfig(cfg.tau, cfg.sigma, cfg.mu, cfg.scheme, forcing=forcing, dirichlet=g)
        tag = _label(constrained) if potential_name is None else f"{potential_name}_{_label(constrained)}"
        write, files = _snapshotter(cfg, self.out, tag)
        if write:
            write(0, {"u": u0})
        hook = (lambda k, t, prev, new, info: write(k, {"u": new})) if write else None
        _, records = run_series(u0, psi, step, cfg.num_steps, constrained, cfg.bounds, _ecfg(cfg), hook)
        prefix = () if potential_name is None else (potential_name,)
        return _series_rows(_label(constrained), records, prefix), files or []


def _run_series_experiment(cfg: ExperimentConfig, out: Path, workers: int) -> list[Path]:
    names = list(cfg.potentials) if cfg.experiment == "boundary_layer" else [None]
    jobs = [(name, c) for name in names for c in cfg.runs]
    results = _parallel_map(_SeriesJob(cfg, out), jobs, workers)
    columns = (["potential"] if cfg.experiment == "boundary_layer" else []) + SERIES_COLUMNS
    rows = [row for rs, _ in results for row in rs]
    files = [write_csv(out / "series.csv", columns, rows)]
    for _, snaps in results:
        files.extend(snaps)
    return files


PNP_COLUMNS = ["run", "t", "rho_min", "rho_max", "nu_min", "nu_max", "psi_min", "psi_max",
               "rho_iterations", "nu_iterations"]


def pnp_initial_state(stepper: PnpStepper):
    """L2 projection of the Gaussian, clipped to be nodally non-negative; ψ from the Poisson solve."""
    space = stepper.space
    rho = l2_project(space, pnp_initial_density)
    rho.coeffs[:] = np.maximum(rho.coeffs, 0.0)
    return stepper.initial_state(rho, rho.copy())


def pnp_series(cfg: ExperimentConfig, constrained: bool, on_step: Optional[Callable] = None):
    """Run the PNP experiment; returns the table rows. ``on_step(k, state, stepper)`` sees every state."""
    mesh = build_mesh(cfg)
    space = create_space(mesh, cfg.degree)
    pcfg = PnpConfig(
        cfg.eps, background_charge, StepConfig(cfg.tau, cfg.sigma, cfg.mu, cfg.scheme), _ecfg(cfg),
        cfg.bounds, constrained,
    )
    stepper = PnpStepper(space, pcfg)
    state = pnp_initial_state(stepper)
    rows = []

    def record(k, s):
        info = stepper.last_info if k else {}
        rows.append((
            _label(constrained), s.t, s.rho.coeffs.min(), s.rho.coeffs.max(), s.nu.coeffs.min(), s.nu.coeffs.max(),
            s.psi.coeffs.min(), s.psi.coeffs.max(),
            int(info.get("rho", {}).get("iterations", 0)), int(info.get("nu", {}).get("iterations", 0)),
        ))
        if on_step is not None:
            on_step(k, s, stepper)

    record(0, state)
    for k in range(1, cfg.num_steps + 1):
        state = stepper.step(state)
        record(k, state)
    return rows


@dataclass(frozen=True)
class _PnpJob:
    cfg: ExperimentConfig
    out: Path

    def __call__(self, constrained):
        write, files = _snapshotter(self.cfg, self.out, _label(constrained), "pnp")
        hook = None
        if write:
            hook = lambda k, s, st: write(k, {"rho": s.rho, "nu": s.nu, "psi": s.psi})  # noqa: E731
        return pnp_series(self.cfg, constrained, hook), files or []


def _run_pnp(cfg: ExperimentConfig, out: Path, workers: int) -> list[Path]:
    results = _parallel_map(_PnpJob(cfg, out), cfg.runs, workers)
    rows = [row for rs, _ in results for row in rs]
    files = [write_csv(out / "series.csv", PNP_COLUMNS, rows)]
    for _, snaps in results:
        files.extend(snaps)
    return files


def run(cfg: ExperimentConfig, out_dir=None, workers: int = 1) -> list[Path]:
    """Run one experiment and return the written files."""
    out = Path(out_dir if out_dir is not None else Path(cfg.base_dir) / cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if workers < 1:
        raise ConfigError("workers: must be at least 1")
    log.info("running %s into %s", cfg.experiment, out)
    if cfg.experiment == "convergence":
        return _run_convergence(cfg, out, workers)
    if cfg.experiment == "pnp":
        return _run_pnp(cfg, out, workers)
    return _run_series_experiment(cfg, out, workers)
