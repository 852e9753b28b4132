"""Command-line entry point.

    python run.py --study accuracy-1d --desk-scale --out out/accuracy-1d

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 solver failure.
"""

import os
import sys
from typing import Optional, Sequence

from absl import flags, logging

from artifacts import prepare_output_dir, read_snapshot
from butcher_data import get_tableau
from errors import ConfigurationError, SolverError, StepFailure
from experiments import run_study
from run_config import RunConfig, parse_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_SOLVER = 4


def _study_dir(cfg: RunConfig, name: str) -> str:
    if len(cfg.presets) == 1:
        return cfg.out_dir
    return os.path.join(cfg.out_dir, name.replace("/", "_"))


def _run(cfg: RunConfig) -> None:
    tableau = get_tableau(cfg.tableau)
    initial = None
    if cfg.initial_snapshot:
        try:
            initial, _ = read_snapshot(cfg.initial_snapshot)
        except OSError as exc:
            raise ConfigurationError("initial_snapshot", str(exc)) from exc
    # fail on an unusable output directory before any simulation starts
    for preset in cfg.presets:
        prepare_output_dir(_study_dir(cfg, preset.name))
    for preset in cfg.presets:
        logging.info("running %s (%s, t_end=%g, tau=%g) on %s", preset.name, preset.kind, preset.t_end, preset.tau, preset.grid())
        run_study(
            preset,
            tableau=tableau,
            threads=cfg.threads,
            progress=cfg.progress,
            solver_options=cfg.solver_options,
            initial=initial,
            snapshot_every=cfg.snapshot_every,
            out_dir=_study_dir(cfg, preset.name),
            echo=cfg.echo(preset),
        )


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv if argv is None else argv)
    # absl logging complains until the global flags count as parsed
    if not flags.FLAGS.is_parsed():
        flags.FLAGS.mark_as_parsed()
    logging.set_verbosity(logging.INFO)

    try:
        cfg = parse_config(argv)
        logging.set_verbosity(cfg.verbosity)
        _run(cfg)
    except ConfigurationError as exc:
        logging.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except StepFailure as exc:
        residuals = "n/a" if exc.residuals is None else ", ".join(f"{r:.3e}" for r in exc.residuals)
        logging.error("solver failure at step %d (residuals: %s): %s", exc.step_index, residuals, exc.__cause__ or exc)
        return EXIT_SOLVER
    except SolverError as exc:
        logging.error("solver failure: %s", exc)
        return EXIT_SOLVER
    except OSError as exc:
        logging.error("I/O error: %s", exc)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
