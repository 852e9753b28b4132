"""Diagnostics and study drivers: error norms, orders, residual series, peaks."""

import dataclasses
import math
import time
from concurrent import futures
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from absl import logging
from scipy import ndimage
from tqdm import tqdm

from artifacts import emit_artifacts
from butcher_data import ButcherTableau, get_tableau
from errors import ConfigurationError, StudyConfigurationError, UndefinedNormalizationError
from experiment_presets import KIND_ACCURACY, ExperimentPreset, initial_condition
from field_grid import ComplexField, norm_sq
from svm_integrator import StepReport, SolverConfig, SVMIntegrator

# relative slack when checking that successive time steps halve
HALVING_RTOL = 1e-9
# finest tau / reference tau must be at least this
REFERENCE_RATIO = 16.0


@dataclasses.dataclass(frozen=True)
class ConvergenceRow:
    tau: float
    l2_error: float
    order: Optional[float] = None


@dataclasses.dataclass(frozen=True)
class ResidualSeries:
    r"""e_M(t_n) = |M^n - M^0| / |M^0| and e_E likewise, one entry per step."""

    steps: Tuple[int, ...]
    times: Tuple[float, ...]
    e_mass: Tuple[float, ...]
    e_energy: Tuple[float, ...]
    beta1: Tuple[float, ...]
    beta2: Tuple[float, ...]
    newton_iterations: Tuple[int, ...]

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def max_e_mass(self) -> float:
        return max(self.e_mass, default=0.0)

    @property
    def max_e_energy(self) -> float:
        return max(self.e_energy, default=0.0)


@dataclasses.dataclass(frozen=True)
class Peak:
    position: Tuple[float, ...]
    height: float


@dataclasses.dataclass
class Simulation:
    tau: float
    final: ComplexField
    reports: List[StepReport]
    snapshots: List[Tuple[float, ComplexField]]
    wall_time: float


@dataclasses.dataclass
class StudyResult:
    preset: ExperimentPreset
    config: SolverConfig
    tableau: ButcherTableau
    rows: Tuple[ConvergenceRow, ...] = ()
    series: Optional[ResidualSeries] = None
    snapshots: Tuple[Tuple[float, ComplexField], ...] = ()
    simulations: Dict[float, Simulation] = dataclasses.field(default_factory=dict)


def l2_error(U: ComplexField, U_ref: ComplexField) -> float:
    """Discrete L2 distance ||U - U_ref||_h, weighted by the cell volume."""
    return math.sqrt(norm_sq(U - U_ref))


def nodal_l2_error(U: ComplexField, U_ref: ComplexField) -> float:
    """Unweighted root sum of squares over the nodes, ``l2_error / sqrt(cell volume)``.

    Accuracy tables report this one; the orders are the same in either norm.
    """
    return l2_error(U, U_ref) / math.sqrt(U.grid.cell_volume)


def check_halving(taus: Sequence[float]) -> None:
    for coarse, fine in zip(taus, taus[1:]):
        if abs(coarse / fine - 2.0) > HALVING_RTOL * 2.0:
            raise StudyConfigurationError("taus", f"time steps must halve exactly, got {coarse:g} -> {fine:g}")


def order_table(rows: Sequence[Tuple[float, float]]) -> List[ConvergenceRow]:
    """Turns (tau, error) pairs, tau descending by exact halving, into rows with orders.

    The order of a row is log2(e(2 tau) / e(tau)); the first row has none.
    """
    check_halving([tau for tau, _ in rows])
    table = []
    for k, (tau, err) in enumerate(rows):
        order = None
        if k > 0:
            coarse = rows[k - 1][1]
            order = math.log2(coarse / err) if coarse > 0 and err > 0 else float("nan")
        table.append(ConvergenceRow(tau=tau, l2_error=err, order=order))
    return table


def residual_series(reports: Sequence[StepReport], mass0: Optional[float] = None, energy0: Optional[float] = None) -> ResidualSeries:
    """Relative mass and energy drift of a run, normalized by the initial values.

    The initial values default to the pre-step invariants of the first report.
    """
    if reports:
        mass0 = reports[0].mass_before if mass0 is None else mass0
        energy0 = reports[0].energy_before if energy0 is None else energy0
        if mass0 == 0:
            raise UndefinedNormalizationError("initial mass is zero, e_M undefined")
        if energy0 == 0:
            raise UndefinedNormalizationError("initial energy is zero, e_E undefined")
    return ResidualSeries(
        steps=tuple(r.step for r in reports),
        times=tuple(r.t for r in reports),
        e_mass=tuple(abs(r.mass_after - mass0) / abs(mass0) for r in reports),
        e_energy=tuple(abs(r.energy_after - energy0) / abs(energy0) for r in reports),
        beta1=tuple(r.beta1 for r in reports),
        beta2=tuple(r.beta2 for r in reports),
        newton_iterations=tuple(r.newton_iterations for r in reports),
    )


def _merge_periodic(labels: np.ndarray, count: int, dims: int) -> np.ndarray:
    parent = list(range(count + 1))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for axis in range(dims):
        first, last = labels.take(0, axis=axis).ravel(), labels.take(-1, axis=axis).ravel()
        for a, b in zip(first, last):
            if a and b:
                parent[find(a)] = find(b)
    return np.array([find(i) for i in range(count + 1)])[labels]


def find_peaks(U: ComplexField, threshold: float = 0.25) -> List[Peak]:
    """Density peaks: connected regions where |U| >= threshold * max|U|.

    Regions are connected across the periodic boundary. Each peak reports
    the |U|^2-weighted centroid of its region and the region maximum of |U|,
    sorted by position.
    """
    grid = U.grid
    modulus = np.abs(U.as_array())
    top = float(modulus.max())
    if top == 0:
        return []
    labels, count = ndimage.label(modulus >= threshold * top)
    roots = _merge_periodic(labels, count, grid.dims)
    coords = grid.mesh()

    peaks = []
    for root in np.unique(roots[roots > 0]):
        sel = roots == root
        weights = modulus[sel] ** 2
        position = []
        for axis in range(grid.dims):
            left, right = grid.bounds[axis]
            length = right - left
            c = coords[axis][sel]
            if sel.take(0, axis=axis).any() and sel.take(-1, axis=axis).any():
                # region wraps around: unwrap the lower half before averaging
                c = np.where(c < left + 0.5 * length, c + length, c)
            mean = float(np.average(c, weights=weights))
            position.append(left + (mean - left) % length)
        peaks.append(Peak(position=tuple(position), height=float(modulus[sel].max())))
    return sorted(peaks, key=lambda p: p.position)


def parity_defect(U: ComplexField, axes: Optional[Sequence[int]] = None) -> float:
    r"""||U(x) - U(-x)||_h / ||U||_h with x reflected about the domain centre."""
    nrm = norm_sq(U)
    if nrm == 0:
        raise UndefinedNormalizationError("zero field has no parity defect")
    mirrored = U
    for axis in range(U.grid.dims) if axes is None else axes:
        mirrored = mirrored.reflect(axis)
    return math.sqrt(norm_sq(U - mirrored) / nrm)


def simulate(
    preset: ExperimentPreset,
    config: SolverConfig,
    tableau: Optional[ButcherTableau] = None,
    initial: Optional[ComplexField] = None,
    snapshot_every: int = 0,
    snapshot_times: Sequence[float] = (),
    progress: bool = False,
) -> Simulation:
    """Runs one preset to its ``t_end`` with the step size of ``config``."""
    grid = preset.grid()
    U0 = initial if initial is not None else initial_condition(preset, grid)
    if U0.grid != grid:
        raise ConfigurationError("initial_snapshot", f"initial field lives on {U0.grid}, preset on {grid}")
    integrator = SVMIntegrator(grid, preset.params, config, tableau)

    reports: List[StepReport] = []
    snapshots: List[Tuple[float, ComplexField]] = []
    if 0.0 in snapshot_times:
        snapshots.append((0.0, U0))
    total = int(math.ceil(preset.t_end / config.tau - 1e-9))
    pbar = tqdm(total=total, desc=f"{preset.name} tau={config.tau:g}", disable=not progress, leave=False)

    def observer(n, t, report, snapshot):
        reports.append(report)
        if snapshot is not None:
            snapshots.append((t, snapshot))
        pbar.update(1)

    start = time.perf_counter()
    try:
        final = integrator.integrate(U0, preset.t_end, observer, snapshot_every=snapshot_every, snapshot_times=snapshot_times)
    finally:
        pbar.close()
    wall = time.perf_counter() - start
    logging.info("%s: tau=%g finished %d steps in %.2fs", preset.name, config.tau, len(reports), wall)
    return Simulation(tau=config.tau, final=final, reports=reports, snapshots=snapshots, wall_time=wall)


def _solver_config(preset: ExperimentPreset, tau: float, fft_workers: int, solver_options: Mapping) -> SolverConfig:
    return SolverConfig(tau=tau, sweeps=preset.sweeps, threads=fft_workers, **dict(solver_options))


def _run_accuracy(preset, tableau, threads, progress, solver_options, initial) -> StudyResult:
    taus = tuple(preset.taus)
    if not taus or preset.tau_ref is None:
        raise StudyConfigurationError("taus", f"{preset.name} has no step-size sequence or reference step")
    check_halving(taus)
    if preset.tau_ref > min(taus) / REFERENCE_RATIO:
        raise StudyConfigurationError(
            "tau_ref", f"reference step {preset.tau_ref:g} must be <= finest step / {REFERENCE_RATIO:g} = {min(taus) / REFERENCE_RATIO:g}"
        )

    all_taus = (preset.tau_ref,) + taus
    configs = {tau: _solver_config(preset, tau, 1, solver_options) for tau in all_taus}
    sims: Dict[float, Simulation] = {}
    with tqdm(total=len(all_taus), desc=preset.name, disable=not progress) as pbar:
        if threads > 1:
            with futures.ThreadPoolExecutor(max_workers=threads) as pool:
                jobs = {pool.submit(simulate, preset, configs[tau], tableau, initial): tau for tau in all_taus}
                for job in futures.as_completed(jobs):
                    sims[jobs[job]] = job.result()
                    pbar.update(1)
        else:
            for tau in all_taus:
                sims[tau] = simulate(preset, configs[tau], tableau, initial)
                pbar.update(1)

    reference = sims[preset.tau_ref].final
    rows = order_table([(tau, nodal_l2_error(sims[tau].final, reference)) for tau in taus])
    for row in rows:
        logging.info("%s: tau=%g l2_error=%.3e order=%s", preset.name, row.tau, row.l2_error, "-" if row.order is None else f"{row.order:.3f}")
    return StudyResult(
        preset=preset,
        config=configs[taus[0]],
        tableau=tableau,
        rows=tuple(rows),
        snapshots=((preset.t_end, reference),),
        simulations=sims,
    )


def _run_dynamics(preset, tableau, threads, progress, solver_options, initial, snapshot_every) -> StudyResult:
    config = _solver_config(preset, preset.tau, threads, solver_options)
    times = tuple(t for t in preset.snapshot_times if t <= preset.t_end)
    sim = simulate(preset, config, tableau, initial, snapshot_every=snapshot_every, snapshot_times=times, progress=progress)
    series = residual_series(sim.reports)
    logging.info("%s: max e_M=%.3e max e_E=%.3e", preset.name, series.max_e_mass, series.max_e_energy)
    return StudyResult(
        preset=preset,
        config=config,
        tableau=tableau,
        series=series,
        snapshots=tuple(sim.snapshots),
        simulations={preset.tau: sim},
    )


def run_study(
    preset: ExperimentPreset,
    tableau: Optional[ButcherTableau] = None,
    threads: int = 1,
    progress: bool = False,
    solver_options: Optional[Mapping] = None,
    initial: Optional[ComplexField] = None,
    snapshot_every: int = 0,
    out_dir: Optional[str] = None,
    echo: Optional[Mapping[str, object]] = None,
) -> StudyResult:
    """Runs a resolved preset and, when ``out_dir`` is given, writes its artifacts.

    Accuracy presets run every tau of the sequence plus the reference step,
    concurrently when ``threads`` > 1; dynamics presets run once with
    ``threads`` FFT workers.
    """
    tableau = tableau or get_tableau()
    solver_options = solver_options or {}
    if preset.kind == KIND_ACCURACY:
        result = _run_accuracy(preset, tableau, threads, progress, solver_options, initial)
    else:
        result = _run_dynamics(preset, tableau, threads, progress, solver_options, initial, snapshot_every)
    if out_dir is not None:
        emit_artifacts(result, out_dir, echo=echo)
    return result
