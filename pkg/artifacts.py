"""On-disk formats of a study: CSV tables, field snapshots and the run manifest.

Snapshot layout: a 13-line UTF-8 header of ``key = value`` lines (the first
being the magic string) followed by the field as little-endian complex128,
i.e. (re, im) float64 pairs, in row-major (x-major) order.
"""

import csv
import os
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from absl import logging

from errors import ConfigurationError
from field_grid import ComplexField, make_grid
from utils import format_real, format_reals, sha256_file

SNAPSHOT_MAGIC = "RLOGSE-SNAPSHOT"
SNAPSHOT_VERSION = 1
SNAPSHOT_DTYPE = "<c16"
SNAPSHOT_HEADER_LINES = 13

CONVERGENCE_FILE = "convergence.csv"
RESIDUALS_FILE = "residuals.csv"
MANIFEST_FILE = "manifest.txt"

CONVERGENCE_HEADER = ("tau", "l2_error", "order")
RESIDUALS_HEADER = ("step", "t", "e_mass", "e_energy", "beta1", "beta2", "newton_iters")


def write_convergence_csv(path, rows) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CONVERGENCE_HEADER)
        for row in rows:
            order = "" if row.order is None else format_real(row.order)
            writer.writerow((format_real(row.tau), format_real(row.l2_error), order))


def write_residuals_csv(path, series) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(RESIDUALS_HEADER)
        for k in range(len(series)):
            writer.writerow(
                (
                    series.steps[k],
                    format_real(series.times[k]),
                    format_real(series.e_mass[k]),
                    format_real(series.e_energy[k]),
                    format_real(series.beta1[k]),
                    format_real(series.beta2[k]),
                    series.newton_iterations[k],
                )
            )


def write_snapshot(path, U: ComplexField, t: float, lam: float, epsilon: float, tau: float, sweeps: int) -> None:
    grid = U.grid
    header = [
        SNAPSHOT_MAGIC,
        f"version = {SNAPSHOT_VERSION}",
        f"dims = {grid.dims}",
        "bounds = " + ";".join(format_reals(b) for b in grid.bounds),
        "nodes = " + ",".join(str(n) for n in grid.nodes),
        f"t = {format_real(t)}",
        f"lambda = {format_real(lam)}",
        f"epsilon = {format_real(epsilon)}",
        f"tau = {format_real(tau)}",
        f"K = {sweeps}",
        "layout = row-major",
        f"value_format = {SNAPSHOT_DTYPE}",
        f"count = {grid.size}",
    ]
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("utf-8"))
        f.write(U.values.astype(SNAPSHOT_DTYPE).tobytes())


def read_snapshot(path) -> Tuple[ComplexField, Dict[str, str]]:
    """Reads a snapshot back; returns the field and the header entries as strings."""
    with open(path, "rb") as f:
        raw = [f.readline() for _ in range(SNAPSHOT_HEADER_LINES)]
        payload = f.read()
    try:
        return _parse_snapshot(path, [line.decode("utf-8").rstrip("\n") for line in raw], payload)
    except ConfigurationError:
        raise
    except (KeyError, ValueError) as exc:
        # missing header key, unparsable number or a payload of odd length
        raise ConfigurationError("initial_snapshot", f"malformed snapshot {path}: {exc!r}") from exc


def _parse_snapshot(path, lines, payload) -> Tuple[ComplexField, Dict[str, str]]:
    if lines[0] != SNAPSHOT_MAGIC:
        raise ConfigurationError("initial_snapshot", f"{path} is not a snapshot file")
    header = {}
    for line in lines[1:]:
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigurationError("initial_snapshot", f"malformed header line {line!r} in {path}")
        header[key.strip()] = value.strip()
    if int(header["version"]) != SNAPSHOT_VERSION or header["value_format"] != SNAPSHOT_DTYPE:
        raise ConfigurationError("initial_snapshot", f"unsupported snapshot version or format in {path}")

    bounds = [tuple(float(x) for x in b.split(",")) for b in header["bounds"].split(";")]
    nodes = [int(n) for n in header["nodes"].split(",")]
    grid = make_grid(bounds, nodes)
    values = np.frombuffer(payload, dtype=SNAPSHOT_DTYPE)
    if values.size != int(header["count"]) or values.size != grid.size:
        raise ConfigurationError("initial_snapshot", f"{path}: expected {grid.size} values, found {values.size}")
    return ComplexField(grid, values), header


def snapshot_name(t: float) -> str:
    return f"snapshot_t{t:012.6f}.dat"


def write_manifest(path, echo: Mapping[str, object], artifact_paths: Sequence[Path]) -> None:
    lines = [f"{key} = {_echo_value(value)}" for key, value in echo.items()]
    for artifact in artifact_paths:
        lines.append(f"# sha256 {Path(artifact).name} {sha256_file(artifact)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _echo_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_real(value)
    if isinstance(value, (tuple, list)):
        return ",".join(_echo_value(v) for v in value)
    return str(value)


def default_echo(result) -> Dict[str, object]:
    preset, config = result.preset, result.config
    echo = {
        "study": preset.name,
        "tableau": result.tableau.name,
        "bounds": tuple(x for b in preset.bounds for x in b),
        "nodes": preset.nodes,
        "lambda": preset.params.lam,
        "epsilon": preset.params.epsilon,
        "tau": config.tau,
        "sweeps": config.sweeps,
        "t_end": preset.t_end,
    }
    if preset.taus:
        echo["taus"] = preset.taus
        echo["tau_ref"] = preset.tau_ref
    return echo


def prepare_output_dir(out_dir) -> Path:
    """Creates ``out_dir`` if needed and checks that files can be written into it.

    Raises:
      OSError: the directory cannot be created or written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")
    return out


def emit_artifacts(result, out_dir, echo: Optional[Mapping[str, object]] = None) -> List[Path]:
    """Writes every artifact of a finished study into ``out_dir``.

    Raises:
      OSError: the directory cannot be created or written.
    """
    out = prepare_output_dir(out_dir)
    preset, config = result.preset, result.config

    written: List[Path] = []
    if result.rows:
        write_convergence_csv(out / CONVERGENCE_FILE, result.rows)
        written.append(out / CONVERGENCE_FILE)
    if result.series is not None:
        write_residuals_csv(out / RESIDUALS_FILE, result.series)
        written.append(out / RESIDUALS_FILE)
    # accuracy studies store the reference solution
    snapshot_tau = preset.tau_ref if result.rows else config.tau
    for t, field in result.snapshots:
        path = out / snapshot_name(t)
        write_snapshot(path, field, t, preset.params.lam, preset.params.epsilon, snapshot_tau, config.sweeps)
        written.append(path)

    write_manifest(out / MANIFEST_FILE, echo if echo is not None else default_echo(result), written)
    logging.info("wrote %d artifacts and %s to %s", len(written), MANIFEST_FILE, out)
    return written + [out / MANIFEST_FILE]
