import csv
import hashlib

import numpy as np
import pytest

from artifacts import (
    CONVERGENCE_HEADER,
    RESIDUALS_HEADER,
    SNAPSHOT_HEADER_LINES,
    emit_artifacts,
    prepare_output_dir,
    read_snapshot,
    snapshot_name,
    write_convergence_csv,
    write_manifest,
    write_residuals_csv,
    write_snapshot,
)
from butcher_data import get_tableau
from errors import ConfigurationError
from experiment_presets import GaussonSum, custom_preset
from experiments import ConvergenceRow, ResidualSeries, StudyResult
from field_grid import ComplexField, make_grid
from rlogse_model import ModelParams
from svm_integrator import SolverConfig
from utils import format_real

GRID_2D = make_grid(((-4.0, 4.0), (-2.0, 6.0)), (8, 16))


def random_field(grid, seed=0):
    rng = np.random.default_rng(seed)
    return ComplexField(grid, rng.standard_normal(grid.size) + 1j * rng.standard_normal(grid.size))


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


def test_format_real_round_trips():
    for x in (0.1, 1 / 3, -1e-15, 5e-3, 1e300):
        assert float(format_real(x)) == x
    assert format_real(-16.0) == "-16"


def test_convergence_csv(tmp_path):
    path = tmp_path / "convergence.csv"
    write_convergence_csv(path, [ConvergenceRow(0.1, 1.6e-5), ConvergenceRow(0.05, 1e-6, 4.0)])
    rows = read_rows(path)
    assert tuple(rows[0]) == CONVERGENCE_HEADER
    assert [float(x) for x in rows[1][:2]] == [0.1, 1.6e-5]
    assert rows[1][2] == ""
    assert float(rows[2][2]) == 4.0
    assert b"\r" not in path.read_bytes()


def test_residuals_csv(tmp_path):
    series = ResidualSeries(
        steps=(1, 2), times=(0.1, 0.2), e_mass=(0.0, 1e-15), e_energy=(2e-16, 0.0), beta1=(1e-9, 2e-9), beta2=(0.0, -1e-9),
        newton_iterations=(2, 3),
    )
    path = tmp_path / "residuals.csv"
    write_residuals_csv(path, series)
    rows = read_rows(path)
    assert tuple(rows[0]) == RESIDUALS_HEADER
    assert len(rows) == 3
    assert rows[2][0] == "2" and rows[2][-1] == "3"
    assert float(rows[2][2]) == 1e-15


@pytest.mark.parametrize("grid", [make_grid((-16.0, 16.0), 32), GRID_2D], ids=["1d", "2d"])
def test_snapshot_round_trip_is_bitwise(tmp_path, grid):
    U = random_field(grid, 4)
    path = tmp_path / snapshot_name(2.5)
    write_snapshot(path, U, 2.5, -1.0, 1e-15, 5e-3, 3)
    V, header = read_snapshot(path)
    assert V == U
    assert V.grid == grid
    assert header["t"] == "2.5"
    assert header["K"] == "3"
    assert float(header["epsilon"]) == 1e-15


def test_snapshot_header_is_readable_text(tmp_path):
    path = tmp_path / "u.dat"
    write_snapshot(path, random_field(GRID_2D), 0.0, -1.0, 1e-12, 1e-2, 3)
    lines = path.read_bytes().split(b"\n")[:SNAPSHOT_HEADER_LINES]
    assert lines[0] == b"RLOGSE-SNAPSHOT"
    assert lines[3] == b"bounds = -4,4;-2,6"
    assert lines[4] == b"nodes = 8,16"
    assert lines[12] == b"count = 128"


def test_snapshot_name_sorts_by_time():
    names = [snapshot_name(t) for t in (0.0, 2.5, 10.0, 125.0)]
    assert names == sorted(names)
    assert names[1] == "snapshot_t00002.500000.dat"


def test_read_snapshot_rejects_other_files(tmp_path):
    path = tmp_path / "not-a-snapshot.dat"
    path.write_bytes(b"hello\n" * 20)
    with pytest.raises(ConfigurationError) as exc:
        read_snapshot(path)
    assert exc.value.key == "initial_snapshot"


def test_read_snapshot_rejects_truncated_payload(tmp_path):
    path = tmp_path / "u.dat"
    write_snapshot(path, random_field(GRID_2D), 0.0, -1.0, 1e-12, 1e-2, 3)
    path.write_bytes(path.read_bytes()[:-16])
    with pytest.raises(ConfigurationError):
        read_snapshot(path)


@pytest.mark.parametrize(
    "old, new",
    [
        (b"version = 1", b"version = one"),
        (b"version = 1", b"revision = 1"),
        (b"nodes = 8,16", b"nodes = 8;16"),
        (b"count = 128", b"count = 128.5"),
        (b"bounds = -4,4;-2,6", b"bounds = -4,4,-2,6"),
    ],
)
def test_read_snapshot_rejects_malformed_header(tmp_path, old, new):
    path = tmp_path / "u.dat"
    write_snapshot(path, random_field(GRID_2D), 0.0, -1.0, 1e-12, 1e-2, 3)
    data = path.read_bytes()
    assert old in data
    path.write_bytes(data.replace(old, new, 1))
    with pytest.raises(ConfigurationError) as exc:
        read_snapshot(path)
    assert exc.value.key == "initial_snapshot"


def test_read_snapshot_rejects_ragged_payload(tmp_path):
    path = tmp_path / "u.dat"
    write_snapshot(path, random_field(GRID_2D), 0.0, -1.0, 1e-12, 1e-2, 3)
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(ConfigurationError) as exc:
        read_snapshot(path)
    assert exc.value.key == "initial_snapshot"


def test_prepare_output_dir(tmp_path):
    out = prepare_output_dir(tmp_path / "a" / "b")
    assert out.is_dir()
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    with pytest.raises(OSError):
        prepare_output_dir(blocker)


def test_manifest_lists_hashes(tmp_path):
    a = tmp_path / "a.csv"
    a.write_text("tau,l2_error,order\n")
    write_manifest(tmp_path / "manifest.txt", {"study": "accuracy-1d", "tau": 0.025, "nodes": (256,), "desk_scale": True}, [a])
    lines = (tmp_path / "manifest.txt").read_text().splitlines()
    assert lines[:4] == ["study = accuracy-1d", "tau = 0.025000000000000001", "nodes = 256", "desk_scale = true"]
    assert lines[4] == f"# sha256 a.csv {hashlib.sha256(a.read_bytes()).hexdigest()}"


def _dynamics_result():
    initial = GaussonSum(amplitudes=(1.0,), widths=(1.0,), centers=((0.0,),), velocities=((0.0,),))
    preset = custom_preset((-8.0, 8.0), (16,), ModelParams(lam=-1.0, epsilon=1e-15), initial, tau=0.1, t_end=0.1)
    series = ResidualSeries(steps=(1,), times=(0.1,), e_mass=(0.0,), e_energy=(0.0,), beta1=(0.0,), beta2=(0.0,), newton_iterations=(0,))
    U = initial.evaluate(preset.grid())
    return StudyResult(
        preset=preset, config=SolverConfig(tau=0.1), tableau=get_tableau(), series=series, snapshots=((0.0, U), (0.1, U))
    )


def test_emit_artifacts(tmp_path):
    out = tmp_path / "nested" / "run"
    written = emit_artifacts(_dynamics_result(), out)
    names = sorted(p.name for p in written)
    assert names == ["manifest.txt", "residuals.csv", snapshot_name(0.0), snapshot_name(0.1)]
    manifest = (out / "manifest.txt").read_text()
    assert "study = custom" in manifest
    assert "tableau = gauss2" in manifest
    assert manifest.count("# sha256 ") == 3
    _, header = read_snapshot(out / snapshot_name(0.1))
    assert header["tau"] == "0.10000000000000001"


def test_emit_artifacts_into_a_file_fails(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    with pytest.raises(OSError):
        emit_artifacts(_dynamics_result(), blocker)
