"""Catalogue of the accuracy and dynamics experiments.

Every initial datum is a sum of Gaussons

    u0(x) = sum_k b_k exp(-a_k/2 |x - x_k|^2 + i v_k . x)

with one (b, a, x, v) tuple per bump; ``GaussonSum`` evaluates it on a grid.
"""

import dataclasses
import math
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np

from errors import ConfigurationError
from field_grid import ComplexField, Grid, make_grid
from rlogse_model import ModelParams

KIND_ACCURACY = "accuracy"
KIND_DYNAMICS = "dynamics"

HORIZON_RESIDUAL = "residual"
HORIZON_FIGURE = "figure"


@dataclasses.dataclass(frozen=True)
class GaussonSum:
    amplitudes: Tuple[float, ...]
    widths: Tuple[float, ...]
    centers: Tuple[Tuple[float, ...], ...]
    velocities: Tuple[Tuple[float, ...], ...]

    def __post_init__(self):
        n = len(self.amplitudes)
        for key in ("widths", "centers", "velocities"):
            if len(getattr(self, key)) != n:
                raise ConfigurationError(key, f"expected {n} entries, one per Gausson")
        if any(not a > 0 for a in self.widths):
            raise ConfigurationError("widths", f"Gausson widths must be > 0, got {self.widths}")
        dims = {len(x) for x in self.centers} | {len(v) for v in self.velocities}
        if len(dims) > 1:
            raise ConfigurationError("centers", "centers and velocities must share one dimension")

    @property
    def dims(self) -> int:
        return len(self.centers[0]) if self.centers else 0

    def __call__(self, *coords: np.ndarray) -> np.ndarray:
        total = np.zeros(np.broadcast(*coords).shape, dtype=np.complex128)
        for b, a, x0, v in zip(self.amplitudes, self.widths, self.centers, self.velocities):
            dist_sq = sum((c - c0) ** 2 for c, c0 in zip(coords, x0))
            phase = sum(vc * c for c, vc in zip(coords, v))
            total += b * np.exp(-0.5 * a * dist_sq + 1j * phase)
        return total

    def evaluate(self, grid: Grid) -> ComplexField:
        if self.dims != grid.dims:
            raise ConfigurationError("centers", f"{self.dims}D initial data on a {grid.dims}D grid")
        return ComplexField.from_function(grid, self)

    def exact_mass(self) -> float:
        """Mass of the sum on the whole space, cross terms included."""
        d = self.dims
        total = 0.0
        terms = list(zip(self.amplitudes, self.widths, self.centers, self.velocities))
        for b1, a1, x1, v1 in terms:
            for b2, a2, x2, v2 in terms:
                # integral of g1 conj(g2) for two complex Gaussians
                a = 0.5 * (a1 + a2)
                x1v, x2v = np.asarray(x1, float), np.asarray(x2, float)
                dv = np.asarray(v1, float) - np.asarray(v2, float)
                center = (a1 * x1v + a2 * x2v) / (a1 + a2)
                const = -0.25 * a1 * a2 / a * float(np.dot(x1v - x2v, x1v - x2v))
                value = (math.pi / a) ** (d / 2) * np.exp(const + 1j * float(np.dot(dv, center)) - float(np.dot(dv, dv)) / (4 * a))
                total += b1 * b2 * float(value.real)
        return total


@dataclasses.dataclass(frozen=True)
class ExperimentPreset:
    r"""One catalogued run (dynamics) or self-convergence study (accuracy).

    ``t_end`` is the residual horizon of dynamics cases and T of accuracy
    studies; ``figure_t_end`` is the horizon of the density snapshots.
    ``desk`` holds the field overrides applied by ``get_preset(desk_scale=True)``.
    """

    name: str
    kind: str
    bounds: Tuple[Tuple[float, float], ...]
    nodes: Tuple[int, ...]
    params: ModelParams
    initial: GaussonSum
    t_end: float
    tau: float
    sweeps: int = 3
    figure_t_end: Optional[float] = None
    taus: Tuple[float, ...] = ()
    tau_ref: Optional[float] = None
    snapshot_times: Tuple[float, ...] = ()
    desk: Mapping[str, object] = dataclasses.field(default_factory=dict, compare=False)

    @property
    def dims(self) -> int:
        return len(self.nodes)

    def grid(self) -> Grid:
        return make_grid(self.bounds, self.nodes)


def initial_condition(preset: ExperimentPreset, grid: Optional[Grid] = None) -> ComplexField:
    return preset.initial.evaluate(grid or preset.grid())


_LAMBDA = -1.0
_TAUS_1D = tuple(1.0 / (40 * 2**k) for k in range(5))
_TAUS_2D = _TAUS_1D
# sixteen times below the finest step of the sequence
_TAU_REF = _TAUS_1D[-1] / 16
_B2D = math.pi ** -0.25


def _params(epsilon: float) -> ModelParams:
    return ModelParams(lam=_LAMBDA, epsilon=epsilon)


def _quarters(t: float) -> Tuple[float, ...]:
    return tuple(t * k / 4 for k in range(5))


def _two_gaussons_1d(x1, x2, v1, v2) -> GaussonSum:
    return GaussonSum(amplitudes=(1.0, 1.0), widths=(1.0, 1.0), centers=((x1,), (x2,)), velocities=((v1,), (v2,)))


def _two_gaussons_2d(b1, b2, x1, x2, v1, v2) -> GaussonSum:
    a = -_LAMBDA
    return GaussonSum(amplitudes=(b1, b2), widths=(a, a), centers=(x1, x2), velocities=(v1, v2))


def _case_1d(label, half_width, x1, v1, figure_t_end, desk_t_end) -> ExperimentPreset:
    return ExperimentPreset(
        name=f"cases-1d/{label}",
        kind=KIND_DYNAMICS,
        bounds=((-half_width, half_width),),
        nodes=(1024,),
        params=_params(1e-15),
        initial=_two_gaussons_1d(x1, -x1, v1, -v1),
        t_end=100.0,
        tau=5e-3,
        figure_t_end=figure_t_end,
        snapshot_times=_quarters(figure_t_end),
        desk={"t_end": desk_t_end, "snapshot_times": _quarters(desk_t_end)},
    )


def _case_2d(label, bounds, initial, desk_bounds) -> ExperimentPreset:
    return ExperimentPreset(
        name=f"cases-2d/{label}",
        kind=KIND_DYNAMICS,
        bounds=bounds,
        nodes=(512, 512),
        params=_params(1e-12),
        initial=initial,
        t_end=100.0,
        tau=1e-2,
        figure_t_end=100.0,
        snapshot_times=_quarters(100.0),
        desk={"nodes": (128, 128), "bounds": desk_bounds, "t_end": 5.0, "snapshot_times": _quarters(5.0)},
    )


_SQUARE_16 = ((-16.0, 16.0), (-16.0, 16.0))

_PRESETS = {
    p.name: p
    for p in (
        ExperimentPreset(
            name="accuracy-1d",
            kind=KIND_ACCURACY,
            bounds=((-16.0, 16.0),),
            nodes=(512,),
            params=_params(1e-15),
            initial=GaussonSum(
                amplitudes=(math.sqrt(-_LAMBDA / math.pi),), widths=(-_LAMBDA,), centers=((0.0,),), velocities=((1.0,),)
            ),
            t_end=1.0,
            tau=_TAUS_1D[0],
            taus=_TAUS_1D,
            tau_ref=_TAU_REF,
            snapshot_times=(1.0,),
            desk={"nodes": (256,)},
        ),
        _case_1d("I", 16.0, -5.0, 0.0, 500.0, 10.0),
        _case_1d("II", 40.0, -3.0, 0.0, 100.0, 10.0),
        _case_1d("III", 50.0, -30.0, 2.0, 16.0, 16.0),
        _case_1d("IV", 50.0, -30.0, 15.0, 3.0, 3.0),
        ExperimentPreset(
            name="accuracy-2d",
            kind=KIND_ACCURACY,
            bounds=_SQUARE_16,
            nodes=(512, 512),
            params=_params(1e-12),
            initial=GaussonSum(
                amplitudes=(math.pi ** (-1.0 / 3.0),), widths=(-_LAMBDA,), centers=((-2.0, 0.0),), velocities=((1.0, 1.0),)
            ),
            t_end=1.0,
            tau=_TAUS_2D[0],
            taus=_TAUS_2D,
            tau_ref=_TAU_REF,
            snapshot_times=(1.0,),
            desk={"nodes": (128, 128), "taus": (1 / 10, 1 / 20, 1 / 40, 1 / 80), "tau": 1 / 10, "tau_ref": 1 / 1280},
        ),
        _case_2d(
            "I",
            _SQUARE_16,
            _two_gaussons_2d(_B2D, _B2D, (-2.0, 0.0), (2.0, 0.0), (0.0, 0.0), (0.0, 0.0)),
            _SQUARE_16,
        ),
        _case_2d(
            "II",
            _SQUARE_16,
            _two_gaussons_2d(_B2D, _B2D / 1.5, (0.0, 0.0), (5.0, 0.0), (-0.15, 0.0), (0.0, 0.0)),
            _SQUARE_16,
        ),
        _case_2d(
            "III",
            ((-40.0, 40.0), (-40.0, 40.0)),
            _two_gaussons_2d(_B2D, _B2D, (-2.0, 0.0), (2.0, 0.0), (0.0, 0.0), (0.0, 0.85)),
            ((-20.0, 20.0), (-20.0, 20.0)),
        ),
    )
}

PRESET_NAMES = tuple(_PRESETS.keys())

# study name -> presets it runs
STUDY_GROUPS = {
    "cases-1d": tuple(n for n in PRESET_NAMES if n.startswith("cases-1d/")),
    "cases-2d": tuple(n for n in PRESET_NAMES if n.startswith("cases-2d/")),
}

STUDY_NAMES = PRESET_NAMES + tuple(STUDY_GROUPS)


def get_preset(name: str, desk_scale: bool = False, horizon: str = HORIZON_RESIDUAL) -> ExperimentPreset:
    """Returns the catalogued preset, optionally at its figure horizon or desk scale."""
    try:
        preset = _PRESETS[name]
    except KeyError:
        raise ConfigurationError("study", f"unknown study {name!r}, choose from {STUDY_NAMES}")
    if horizon not in (HORIZON_RESIDUAL, HORIZON_FIGURE):
        raise ConfigurationError("horizon", f"expected {HORIZON_RESIDUAL!r} or {HORIZON_FIGURE!r}, got {horizon!r}")
    if horizon == HORIZON_FIGURE and preset.figure_t_end is not None:
        preset = dataclasses.replace(preset, t_end=preset.figure_t_end, snapshot_times=_quarters(preset.figure_t_end))
    if desk_scale:
        preset = dataclasses.replace(preset, **preset.desk)
    return preset


def expand_study(name: str) -> Tuple[str, ...]:
    if name in STUDY_GROUPS:
        return STUDY_GROUPS[name]
    if name in _PRESETS:
        return (name,)
    raise ConfigurationError("study", f"unknown study {name!r}, choose from {STUDY_NAMES}")


def custom_preset(
    bounds: Sequence,
    nodes: Sequence[int],
    params: ModelParams,
    initial: GaussonSum,
    tau: float,
    t_end: float,
    sweeps: int = 3,
    snapshot_times: Sequence[float] = (),
) -> ExperimentPreset:
    """A dynamics run outside the catalogue, checked against the same schema."""
    grid = make_grid(bounds, nodes)
    if initial.dims != grid.dims:
        raise ConfigurationError("centers", f"{initial.dims}D initial data on a {grid.dims}D grid")
    return ExperimentPreset(
        name="custom",
        kind=KIND_DYNAMICS,
        bounds=grid.bounds,
        nodes=grid.nodes,
        params=params,
        initial=initial,
        t_end=t_end,
        tau=tau,
        sweeps=sweeps,
        snapshot_times=tuple(snapshot_times),
    )
