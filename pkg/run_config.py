"""Run configuration: absl flags, optionally seeded from a ``key = value`` file.

Entries of the ``--config`` file are turned into flags and placed before the
command-line flags, so the command line wins. Flag names accept either
hyphens or underscores (``--desk-scale`` == ``--desk_scale``).
"""

import dataclasses
import math
import re
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from absl import flags

from butcher_data import DEFAULT_TABLEAU, TABLEAU_NAMES
from errors import ConfigurationError
from experiment_presets import (
    HORIZON_FIGURE,
    HORIZON_RESIDUAL,
    KIND_ACCURACY,
    STUDY_NAMES,
    ExperimentPreset,
    GaussonSum,
    custom_preset,
    expand_study,
    get_preset,
)
from rlogse_model import ModelParams

CUSTOM_STUDY = "custom"

# keys that only make sense on the command line
_CLI_ONLY = ("config",)
# echoed in the manifest; parsing them back reproduces the run
_ECHO_KEYS = (
    "study",
    "desk_scale",
    "horizon",
    "tableau",
    "bounds",
    "nodes",
    "lambda",
    "epsilon",
    "amplitudes",
    "widths",
    "centers",
    "velocities",
    "tau",
    "sweeps",
    "t_end",
    "snapshot_times",
    "snapshot_every",
    "newton_tol",
    "newton_max_iter",
    "newton_min_iter",
    "fd_jacobian",
)


def _define_flags(fv: flags.FlagValues) -> None:
    def define(fn, name, default, help_text, **kwargs):
        fn(name, default, help=help_text, flag_values=fv, **kwargs)

    define(flags.DEFINE_string, "study", None, f"Catalogued study, one of {STUDY_NAMES + (CUSTOM_STUDY,)}.")
    define(flags.DEFINE_string, "config", None, "Path of a `key = value` configuration file.")
    define(flags.DEFINE_string, "out", "out", "Output directory of the artifacts.")
    define(flags.DEFINE_boolean, "desk_scale", False, "Use the reduced (desk-scale) variant of the preset.")
    define(flags.DEFINE_enum, "horizon", HORIZON_RESIDUAL, "Horizon of dynamics cases.", enum_values=[HORIZON_RESIDUAL, HORIZON_FIGURE])
    define(flags.DEFINE_enum, "tableau", DEFAULT_TABLEAU, "Gauss Runge-Kutta tableau.", enum_values=list(TABLEAU_NAMES))
    # time stepping
    define(flags.DEFINE_float, "tau", None, "Time step (first step of an accuracy sequence).")
    define(flags.DEFINE_list, "taus", None, "Halving sequence of time steps of an accuracy study.")
    define(flags.DEFINE_float, "tau_ref", None, "Reference time step of an accuracy study.")
    define(flags.DEFINE_float, "t_end", None, "Final time.")
    define(flags.DEFINE_integer, "sweeps", None, "Prediction sweeps K.")
    define(flags.DEFINE_float, "newton_tol", None, "Newton tolerance, scaled by max(1, |E|, M).")
    define(flags.DEFINE_integer, "newton_max_iter", None, "Newton iteration cap.")
    define(flags.DEFINE_integer, "newton_min_iter", None, "Newton updates taken even when the first residual is within tolerance.")
    define(flags.DEFINE_boolean, "fd_jacobian", None, "Finite-difference instead of analytic Newton Jacobian.")
    # grid and model
    define(flags.DEFINE_list, "nodes", None, "Fourier nodes per axis.")
    define(flags.DEFINE_list, "bounds", None, "Domain as xL,xR[,yL,yR].")
    define(flags.DEFINE_float, "lambda", None, "Nonlinear strength lambda != 0.")
    define(flags.DEFINE_float, "epsilon", None, "Regularization epsilon > 0.")
    # initial data: sum of Gaussons
    define(flags.DEFINE_list, "amplitudes", None, "Gausson amplitudes b_k.")
    define(flags.DEFINE_list, "widths", None, "Gausson widths a_k.")
    define(flags.DEFINE_list, "centers", None, "Gausson centers, flattened per Gausson.")
    define(flags.DEFINE_list, "velocities", None, "Gausson velocities, flattened per Gausson.")
    define(flags.DEFINE_string, "initial_snapshot", None, "Snapshot file used as initial data.")
    # output and runtime
    define(flags.DEFINE_integer, "snapshot_every", 0, "Snapshot cadence in steps, 0 disables.")
    define(flags.DEFINE_list, "snapshot_times", None, "Explicit snapshot times.")
    define(flags.DEFINE_integer, "threads", 1, "Worker threads (FFT workers or concurrent simulations).")
    define(flags.DEFINE_boolean, "progress", False, "Show progress bars.")
    define(flags.DEFINE_integer, "verbosity", 0, "absl logging verbosity.")

    _validator(fv, "tau", lambda v: v is None or (math.isfinite(v) and v > 0), "time step must be > 0")
    _validator(fv, "tau_ref", lambda v: v is None or (math.isfinite(v) and v > 0), "reference step must be > 0")
    _validator(fv, "t_end", lambda v: v is None or (math.isfinite(v) and v >= 0), "final time must be >= 0")
    _validator(fv, "epsilon", lambda v: v is None or (math.isfinite(v) and v > 0), "regularization must be > 0")
    _validator(fv, "lambda", lambda v: v is None or (math.isfinite(v) and v != 0), "nonlinear strength must be nonzero")
    _validator(fv, "sweeps", lambda v: v is None or v >= 1, "need at least one prediction sweep")
    _validator(fv, "threads", lambda v: v >= 1, "need at least one thread")
    _validator(fv, "snapshot_every", lambda v: v >= 0, "snapshot cadence must be >= 0")
    _validator(fv, "nodes", lambda v: v is None or all(_is_even_node_count(n) for n in v), "node counts must be even integers >= 4")


def _validator(fv, name, checker, message):
    flags.register_validator(name, checker, message=message, flag_values=fv)


def _is_even_node_count(text: str) -> bool:
    try:
        n = int(text)
    except ValueError:
        return False
    return n >= 4 and n % 2 == 0


def _normalize_flag(arg: str) -> str:
    if not arg.startswith("--"):
        return arg
    name, sep, value = arg[2:].partition("=")
    return "--" + name.replace("-", "_") + sep + value


def read_config_file(path: str) -> List[str]:
    """Turns a flat ``key = value`` file into ``--key=value`` arguments."""
    args = []
    try:
        with open(path, encoding="utf-8") as f:
            lines = f.readlines()
    except OSError as exc:
        raise ConfigurationError("config", str(exc)) from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or not key:
            raise ConfigurationError(f"{path}:{lineno}", f"expected `key = value`, got {line!r}")
        if key in _CLI_ONLY:
            raise ConfigurationError(key, "not allowed inside a configuration file")
        args.append(f"--{key}={value.strip()}")
    return args


def _config_path(argv: Sequence[str]) -> Optional[str]:
    path = None
    for k, arg in enumerate(argv):
        if arg.startswith("--config="):
            path = arg.split("=", 1)[1]
        elif arg == "--config" and k + 1 < len(argv):
            path = argv[k + 1]
    return path


def _flag_error_key(exc: flags.Error) -> str:
    name = getattr(exc, "flagname", None)
    if name:
        return name
    match = re.search(r"--([A-Za-z_][\w-]*)", str(exc))
    return match.group(1) if match else "argv"


@dataclasses.dataclass(frozen=True)
class RunConfig:
    study: str
    presets: Tuple[ExperimentPreset, ...]
    out_dir: str
    desk_scale: bool = False
    horizon: str = HORIZON_RESIDUAL
    tableau: str = DEFAULT_TABLEAU
    threads: int = 1
    progress: bool = False
    verbosity: int = 0
    snapshot_every: int = 0
    initial_snapshot: Optional[str] = None
    solver_options: Mapping[str, object] = dataclasses.field(default_factory=dict)

    def echo(self, preset: ExperimentPreset) -> Dict[str, object]:
        """Every resolved parameter of ``preset``, keyed by its configuration name."""
        init = preset.initial
        echo = {
            "study": preset.name,
            "desk_scale": self.desk_scale,
            "horizon": self.horizon,
            "tableau": self.tableau,
            "bounds": tuple(x for b in preset.bounds for x in b),
            "nodes": preset.nodes,
            "lambda": preset.params.lam,
            "epsilon": preset.params.epsilon,
            "amplitudes": init.amplitudes,
            "widths": init.widths,
            "centers": tuple(x for c in init.centers for x in c),
            "velocities": tuple(x for v in init.velocities for x in v),
            "tau": preset.tau,
            "sweeps": preset.sweeps,
            "t_end": preset.t_end,
            "snapshot_times": preset.snapshot_times,
            "snapshot_every": self.snapshot_every,
        }
        echo.update(self.solver_options)
        if preset.kind == KIND_ACCURACY:
            echo["taus"] = preset.taus
            echo["tau_ref"] = preset.tau_ref
        if self.initial_snapshot:
            echo["initial_snapshot"] = self.initial_snapshot
        return {k: v for k, v in echo.items() if k in _ECHO_KEYS + ("taus", "tau_ref", "initial_snapshot")}


def _floats(key: str, values: Optional[Sequence[str]]) -> Optional[Tuple[float, ...]]:
    if values is None:
        return None
    try:
        out = tuple(float(v) for v in values)
    except ValueError:
        raise ConfigurationError(key, f"expected a list of reals, got {','.join(values)}")
    if not all(math.isfinite(v) for v in out):
        raise ConfigurationError(key, "values must be finite")
    return out


def _per_gausson(key: str, flat: Tuple[float, ...], count: int) -> Tuple[Tuple[float, ...], ...]:
    if count == 0 or len(flat) % count:
        raise ConfigurationError(key, f"{len(flat)} values do not split over {count} Gaussons")
    dims = len(flat) // count
    return tuple(tuple(flat[k * dims : (k + 1) * dims]) for k in range(count))


def _apply_overrides(preset: ExperimentPreset, fv: flags.FlagValues) -> ExperimentPreset:
    changes = {}
    if fv["nodes"].value is not None:
        changes["nodes"] = tuple(int(n) for n in fv["nodes"].value)
    bounds = _floats("bounds", fv["bounds"].value)
    if bounds is not None:
        if len(bounds) % 2:
            raise ConfigurationError("bounds", "expected xL,xR[,yL,yR]")
        changes["bounds"] = tuple(zip(bounds[::2], bounds[1::2]))
    if fv["lambda"].value is not None or fv["epsilon"].value is not None:
        lam = preset.params.lam if fv["lambda"].value is None else fv["lambda"].value
        eps = preset.params.epsilon if fv["epsilon"].value is None else fv["epsilon"].value
        changes["params"] = ModelParams(lam=lam, epsilon=eps)

    init = preset.initial
    amplitudes = _floats("amplitudes", fv["amplitudes"].value) or init.amplitudes
    count = len(amplitudes)
    widths = _floats("widths", fv["widths"].value) or init.widths
    centers = _floats("centers", fv["centers"].value)
    velocities = _floats("velocities", fv["velocities"].value)
    if any(fv[k].value is not None for k in ("amplitudes", "widths", "centers", "velocities")):
        changes["initial"] = GaussonSum(
            amplitudes=amplitudes,
            widths=widths,
            centers=init.centers if centers is None else _per_gausson("centers", centers, count),
            velocities=init.velocities if velocities is None else _per_gausson("velocities", velocities, count),
        )

    if fv["t_end"].value is not None:
        changes["t_end"] = fv["t_end"].value
    if fv["sweeps"].value is not None:
        changes["sweeps"] = fv["sweeps"].value
    if fv["snapshot_times"].value is not None:
        changes["snapshot_times"] = _floats("snapshot_times", fv["snapshot_times"].value)

    taus = _floats("taus", fv["taus"].value)
    if taus is not None:
        if not taus or min(taus) <= 0:
            raise ConfigurationError("taus", "time steps must be > 0")
        changes["taus"], changes["tau"] = taus, taus[0]
    elif fv["tau"].value is not None:
        tau = fv["tau"].value
        changes["tau"] = tau
        if preset.kind == KIND_ACCURACY:
            changes["taus"] = tuple(tau / 2**k for k in range(len(preset.taus)))
    if fv["tau_ref"].value is not None:
        changes["tau_ref"] = fv["tau_ref"].value

    preset = dataclasses.replace(preset, **changes)
    grid = preset.grid()
    if preset.initial.dims != grid.dims:
        raise ConfigurationError("centers", f"{preset.initial.dims}D initial data on a {grid.dims}D grid")
    return preset


def _custom_preset(fv: flags.FlagValues) -> ExperimentPreset:
    required = ("bounds", "nodes", "lambda", "epsilon", "amplitudes", "widths", "centers", "velocities", "tau", "t_end")
    for key in required:
        if fv[key].value is None:
            raise ConfigurationError(key, f"required for --study={CUSTOM_STUDY}")
    amplitudes = _floats("amplitudes", fv["amplitudes"].value)
    bounds = _floats("bounds", fv["bounds"].value)
    if len(bounds) % 2:
        raise ConfigurationError("bounds", "expected xL,xR[,yL,yR]")
    initial = GaussonSum(
        amplitudes=amplitudes,
        widths=_floats("widths", fv["widths"].value),
        centers=_per_gausson("centers", _floats("centers", fv["centers"].value), len(amplitudes)),
        velocities=_per_gausson("velocities", _floats("velocities", fv["velocities"].value), len(amplitudes)),
    )
    return custom_preset(
        bounds=tuple(zip(bounds[::2], bounds[1::2])),
        nodes=tuple(int(n) for n in fv["nodes"].value),
        params=ModelParams(lam=fv["lambda"].value, epsilon=fv["epsilon"].value),
        initial=initial,
        tau=fv["tau"].value,
        t_end=fv["t_end"].value,
        sweeps=fv["sweeps"].value or 3,
        snapshot_times=_floats("snapshot_times", fv["snapshot_times"].value) or (),
    )


def parse_config(argv: Sequence[str]) -> RunConfig:
    """Parses ``argv`` (program name first) into a validated RunConfig.

    Raises:
      ConfigurationError: unknown keys, malformed values or violated
        constraints; ``key`` names the offending flag.
    """
    argv = [argv[0]] + [_normalize_flag(a) for a in argv[1:]]
    path = _config_path(argv)
    file_args = read_config_file(path) if path else []

    fv = flags.FlagValues()
    _define_flags(fv)
    try:
        rest = fv([argv[0]] + file_args + argv[1:])
    except flags.Error as exc:
        raise ConfigurationError(_flag_error_key(exc), str(exc)) from exc
    if len(rest) > 1:
        raise ConfigurationError("argv", f"unexpected positional arguments {rest[1:]}")

    study = fv["study"].value
    if not study:
        raise ConfigurationError("study", "no study selected")
    if study == CUSTOM_STUDY:
        presets = (_custom_preset(fv),)
    else:
        presets = tuple(
            _apply_overrides(get_preset(name, fv["desk_scale"].value, fv["horizon"].value), fv) for name in expand_study(study)
        )

    solver_options = {
        key: fv[key].value for key in ("newton_tol", "newton_max_iter", "newton_min_iter", "fd_jacobian") if fv[key].value is not None
    }
    return RunConfig(
        study=study,
        presets=presets,
        out_dir=fv["out"].value,
        desk_scale=fv["desk_scale"].value,
        horizon=fv["horizon"].value,
        tableau=fv["tableau"].value,
        threads=fv["threads"].value,
        progress=fv["progress"].value,
        verbosity=fv["verbosity"].value,
        snapshot_every=fv["snapshot_every"].value,
        initial_snapshot=fv["initial_snapshot"].value,
        solver_options=solver_options,
    )
