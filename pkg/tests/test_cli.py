"""Command-line behaviour: exit codes, summaries, and a small run."""

import csv
import subprocess
import sys
from pathlib import Path

import pytest

from ddg.cli import main
from ddg.experiments import data_path
from ddg.mesh import build_uniform_square, write_mesh

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"

SMALL_TOML = """\
experiment = "custom"
mesh_n = 3
tau = 0.01
t_final = 0.03
potential = "2*x + y"
initial = "x*y"
gamma = 0.05
extragrad_tol = 1e-10
output_dir = "from_config"
"""


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL_TOML)
    return path


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.toml")), ids=lambda p: p.stem)
def test_validate_shipped(path, capsys):
    assert main(["validate", str(path)]) == 0
    assert "ok" in capsys.readouterr().out


def test_validate_reports_offending_key(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('experiment = "custom"\nmesh_n = 3\nwobble = 1\n')
    assert main(["validate", str(bad)]) == 2
    assert "wobble" in capsys.readouterr().err


def test_missing_file_exit_code(tmp_path, capsys):
    assert main(["validate", str(tmp_path / "none.toml")]) == 2
    assert "not found" in capsys.readouterr().err
    assert main(["mesh-info", str(tmp_path / "none.msh2d")]) == 2


def test_mesh_info_fixture(capsys):
    assert main(["mesh-info", str(data_path("square_hole.msh2d"))]) == 0
    out = capsys.readouterr().out
    assert "cells       22113" in out
    assert "markers [1, 2]" in out
    assert "valid       yes" in out


def test_mesh_info_parse_error(tmp_path, capsys):
    bad = tmp_path / "bad.msh2d"
    bad.write_text("this is not a mesh\n")
    assert main(["mesh-info", str(bad)]) == 2
    assert "error" in capsys.readouterr().err


def test_mesh_info_round_trip(tmp_path, capsys):
    path = tmp_path / "sq.msh2d"
    write_mesh(build_uniform_square(3, "criss-cross"), path)
    assert main(["mesh-info", str(path)]) == 0
    out = capsys.readouterr().out
    assert "cells       36" in out and "P1/P2 dofs  108 / 216" in out


def test_run_writes_to_out(small_config, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", str(small_config), "--out", str(out)]) == 0
    printed = capsys.readouterr().out.split()
    assert printed == [str(out / "series.csv")]
    with open(out / "series.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4


def test_run_uses_config_output_dir(small_config, monkeypatch):
    monkeypatch.chdir(small_config.parent)
    assert main(["run", str(small_config)]) == 0
    assert (small_config.parent / "from_config" / "series.csv").exists()


def test_bad_workers(small_config, tmp_path, capsys):
    assert main(["run", str(small_config), "--out", str(tmp_path), "--workers", "0"]) == 2
    assert "workers" in capsys.readouterr().err


def test_usage_error():
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2


def test_module_entry_point(small_config):
    res = subprocess.run(
        [sys.executable, "-m", "ddg", "validate", str(small_config)], capture_output=True, text=True, check=False
    )
    assert res.returncode == 0, res.stderr
    assert "ok (custom)" in res.stdout
