import pytest

import run
from artifacts import MANIFEST_FILE
from errors import ConfigurationError, NewtonConvergenceError, StepFailure
from run_config import parse_config, read_config_file
from utils import sha256_file

# a two-step custom run on a coarse grid
TINY = [
    "--study=custom",
    "--bounds=-8,8",
    "--nodes=32",
    "--lambda=-1",
    "--epsilon=1e-15",
    "--amplitudes=1,1",
    "--widths=1,1",
    "--centers=-2,2",
    "--velocities=0.5,-0.5",
    "--tau=0.05",
    "--t_end=0.1",
    "--snapshot_times=0.1",
]


def parse(*args):
    return parse_config(["run.py", *args])


def test_desk_scale_accuracy():
    cfg = parse("--study=accuracy-1d", "--desk-scale")
    (preset,) = cfg.presets
    assert preset.nodes == (256,)
    assert cfg.desk_scale


def test_tau_override():
    (preset,) = parse("--study=cases-1d/I", "--tau=0.005").presets
    assert preset.tau == 5e-3
    assert preset.bounds == ((-16.0, 16.0),)


def test_accuracy_tau_override_rebuilds_sequence():
    (preset,) = parse("--study=accuracy-1d", "--tau=0.05").presets
    assert preset.taus == (0.05, 0.025, 0.0125, 0.00625, 0.003125)


def test_group_study_expands():
    cfg = parse("--study=cases-2d", "--desk_scale", "--t_end=1")
    assert [p.name for p in cfg.presets] == ["cases-2d/I", "cases-2d/II", "cases-2d/III"]
    assert all(p.nodes == (128, 128) and p.t_end == 1.0 for p in cfg.presets)


@pytest.mark.parametrize(
    "args, key",
    [
        (("--study=cases-1d/I", "--epsilon=0"), "epsilon"),
        (("--study=cases-1d/I", "--lambda=0"), "lambda"),
        (("--study=cases-1d/I", "--nodes=1023"), "nodes"),
        (("--study=cases-1d/I", "--tau=-1"), "tau"),
        (("--study=cases-1d/I", "--colour=blue"), "colour"),
        (("--study=cases-9d",), "study"),
        ((), "study"),
        (("--study=custom", "--bounds=-8,8"), "nodes"),
    ],
)
def test_rejected_configurations(args, key):
    with pytest.raises(ConfigurationError) as exc:
        parse(*args)
    assert exc.value.key == key


def test_config_file_and_command_line_precedence(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# case I at a finer step\nstudy = cases-1d/I\ntau = 0.0025\ndesk-scale = true\n")
    cfg = parse(f"--config={path}")
    assert cfg.presets[0].tau == 0.0025
    assert cfg.desk_scale
    cfg = parse(f"--config={path}", "--tau=0.01")
    assert cfg.presets[0].tau == 0.01


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigurationError) as exc:
        parse(f"--config={tmp_path / 'missing.cfg'}")
    assert exc.value.key == "config"

    bad = tmp_path / "bad.cfg"
    bad.write_text("study = accuracy-1d\nwavelength = 3\n")
    with pytest.raises(ConfigurationError) as exc:
        parse(f"--config={bad}")
    assert exc.value.key == "wavelength"

    nested = tmp_path / "nested.cfg"
    nested.write_text(f"config = {bad}\n")
    with pytest.raises(ConfigurationError) as exc:
        read_config_file(str(nested))
    assert exc.value.key == "config"


def test_custom_study():
    (preset,) = parse(*TINY).presets
    assert preset.nodes == (32,)
    assert preset.initial.centers == ((-2.0,), (2.0,))
    assert preset.initial.velocities == ((0.5,), (-0.5,))
    assert preset.snapshot_times == (0.1,)


def test_main_writes_artifacts(tmp_path):
    out = tmp_path / "out"
    assert run.main(["run.py", *TINY, f"--out={out}"]) == run.EXIT_OK
    assert (out / "residuals.csv").exists()
    assert (out / MANIFEST_FILE).exists()
    assert len(list(out.glob("snapshot_t*.dat"))) == 1


def test_manifest_reproduces_the_configuration(tmp_path):
    out = tmp_path / "out"
    args = ["--study=cases-1d/II", "--desk-scale", "--nodes=256", "--t_end=0.02", "--tau=0.01", "--newton_tol=1e-12"]
    assert run.main(["run.py", *args, f"--out={out}"]) == run.EXIT_OK
    original = parse(*args)
    replayed = parse(f"--config={out / MANIFEST_FILE}")
    assert replayed.presets == original.presets
    assert replayed.solver_options == original.solver_options


def test_main_configuration_error(tmp_path):
    assert run.main(["run.py", "--study=cases-1d/I", "--epsilon=0", f"--out={tmp_path}"]) == run.EXIT_CONFIG
    assert run.main(["run.py", "--study=accuracy-1d", f"--initial_snapshot={tmp_path / 'none.dat'}"]) == run.EXIT_CONFIG


def test_main_io_error(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert run.main(["run.py", *TINY, f"--out={blocker}"]) == run.EXIT_IO


def test_main_solver_failure(tmp_path, monkeypatch):
    def failing_study(*args, **kwargs):
        raise StepFailure(7, NewtonConvergenceError(25, (1e-9, 3e-10)))

    monkeypatch.setattr(run, "run_study", failing_study)
    assert run.main(["run.py", *TINY, f"--out={tmp_path}"]) == run.EXIT_SOLVER


def test_unwritable_output_fails_before_simulating(tmp_path, monkeypatch):
    def unexpected_study(*args, **kwargs):
        raise AssertionError("run_study called with an unusable output directory")

    monkeypatch.setattr(run, "run_study", unexpected_study)
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert run.main(["run.py", *TINY, f"--out={blocker}"]) == run.EXIT_IO
    assert run.main(["run.py", "--study=cases-1d", "--desk-scale", f"--out={blocker}"]) == run.EXIT_IO


def test_repeated_runs_write_identical_artifacts(tmp_path):
    first, second = tmp_path / "first", tmp_path / "second"
    for out in (first, second):
        assert run.main(["run.py", *TINY, "--snapshot_every=1", f"--out={out}"]) == run.EXIT_OK
    names = sorted(p.name for p in first.iterdir())
    assert names == sorted(p.name for p in second.iterdir())
    assert MANIFEST_FILE in names and len(names) >= 4
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name
    hashes = [line for line in (first / MANIFEST_FILE).read_text().splitlines() if line.startswith("# sha256 ")]
    assert len(hashes) == len(names) - 1
    for line in hashes:
        _, _, name, digest = line.split()
        assert sha256_file(second / name) == digest
