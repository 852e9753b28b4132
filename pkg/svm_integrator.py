"""Prediction-correction time stepping with supplementary variables.

One step runs K sweeps of a linearized implicit Runge-Kutta system
(prediction), then a single RK step with the nonlinearity frozen at the
predicted stages and two extra directions g1 = dE/d(conj u), g2 = u added to
the right-hand side. The scaled multipliers beta = tau * alpha are fixed by
requiring that discrete mass and energy equal their values at the start of
the step, a 2 x 2 nonlinear system solved by Newton's method.
"""

import copy
import dataclasses
import math
from typing import Callable, Iterable, Optional, Tuple

import numpy as np
from absl import logging

from butcher_data import ButcherTableau, get_tableau
from errors import (
    ConfigurationError,
    DegenerateDirectionError,
    DimensionError,
    DivergenceError,
    NewtonConvergenceError,
    NonFiniteFieldError,
    SolverError,
    StepFailure,
)
from field_grid import ComplexField, Grid, inner_product
from rlogse_model import ModelParams, energy, grad_energy, grad_mass, mass
from spectral import SINGULARITY_RTOL, get_operator

JACOBIAN_ANALYTIC = "analytic"
JACOBIAN_FINITE_DIFFERENCE = "finite-difference"

# final step is shortened when t_end misses a multiple of tau by more than this
STEP_ALIGNMENT_TOL = 1e-12


class SolverConfig:
    # time stepping
    tau = 1e-2
    sweeps = 3  # K; observed order is min(p, K + 1)
    # Newton solve for beta, tolerance scaled by max(1, |E_h|, M_h)
    newton_tol = 1e-13
    newton_max_iter = 25
    # updates taken even when beta = 0 already meets newton_tol
    newton_min_iter = 1
    fd_jacobian = False
    fd_step = 1e-7
    # runtime
    threads = 1  # scipy.fft workers
    log_every = 100  # steps between progress lines, 0 disables

    FIELDS = (
        "tau",
        "sweeps",
        "newton_tol",
        "newton_max_iter",
        "newton_min_iter",
        "fd_jacobian",
        "fd_step",
        "threads",
        "log_every",
    )

    def __init__(self, **kwargs):
        self._assign(self, kwargs)
        self._validate()

    @staticmethod
    def _assign(target, kwargs):
        for k, v in kwargs.items():
            if k not in SolverConfig.FIELDS:
                raise ConfigurationError(k, "unknown solver option")
            setattr(target, k, v)

    def _validate(self):
        if not (isinstance(self.tau, (int, float)) and math.isfinite(self.tau) and self.tau > 0):
            raise ConfigurationError("tau", f"time step must be > 0, got {self.tau}")
        if int(self.sweeps) != self.sweeps or self.sweeps < 1:
            raise ConfigurationError("sweeps", f"need at least one prediction sweep, got {self.sweeps}")
        if not self.newton_tol > 0:
            raise ConfigurationError("newton_tol", f"must be > 0, got {self.newton_tol}")
        if int(self.newton_max_iter) != self.newton_max_iter or self.newton_max_iter < 1:
            raise ConfigurationError("newton_max_iter", f"must be a positive integer, got {self.newton_max_iter}")
        if int(self.newton_min_iter) != self.newton_min_iter or not 0 <= self.newton_min_iter <= self.newton_max_iter:
            raise ConfigurationError("newton_min_iter", f"must be an integer in [0, newton_max_iter], got {self.newton_min_iter}")
        if not self.fd_step > 0:
            raise ConfigurationError("fd_step", f"must be > 0, got {self.fd_step}")
        if int(self.threads) != self.threads or self.threads < 1:
            raise ConfigurationError("threads", f"must be a positive integer, got {self.threads}")
        if int(self.log_every) != self.log_every or self.log_every < 0:
            raise ConfigurationError("log_every", f"must be a non-negative integer, got {self.log_every}")
        self.sweeps = int(self.sweeps)
        self.newton_max_iter = int(self.newton_max_iter)
        self.newton_min_iter = int(self.newton_min_iter)
        self.threads = int(self.threads)
        self.log_every = int(self.log_every)

    def replace(self, **kwargs) -> "SolverConfig":
        other = copy.copy(self)
        self._assign(other, kwargs)
        other._validate()
        return other

    def __repr__(self) -> str:
        fields = ("tau", "sweeps", "newton_tol", "newton_max_iter", "newton_min_iter", "fd_jacobian", "threads")
        return "SolverConfig(" + ", ".join(f"{k}={getattr(self, k)!r}" for k in fields) + ")"


@dataclasses.dataclass(frozen=True)
class StepReport:
    r"""Outcome of one accepted step. ``beta`` = tau * alpha."""

    beta1: float
    beta2: float
    newton_iterations: int
    mass_before: float
    energy_before: float
    mass_after: float
    energy_after: float
    correction_residual: float
    tau: float
    jacobian: str = JACOBIAN_ANALYTIC
    step: int = 0
    t: float = 0.0
    shortened: bool = False

    @property
    def alpha1(self) -> float:
        return self.beta1 / self.tau

    @property
    def alpha2(self) -> float:
        return self.beta2 / self.tau

    @property
    def beta_max(self) -> float:
        return max(abs(self.beta1), abs(self.beta2))


Observer = Callable[[int, float, StepReport, Optional[ComplexField]], None]


def _relative_drift(value: float, reference: float) -> float:
    return abs(value - reference) / abs(reference) if reference else abs(value - reference)


def _is_singular(jac: np.ndarray) -> Tuple[bool, float]:
    det = float(np.linalg.det(jac))
    scale = float(np.prod(np.linalg.norm(jac, axis=1)))
    return not (abs(det) >= SINGULARITY_RTOL * scale and scale > 0), det


class SVMIntegrator:
    """Time stepper for one grid, model and tableau.

    The spectral operator (and its cached stage inverses) is shared with
    every other integrator on the same grid; the integrator itself holds no
    state that changes between steps.
    """

    def __init__(self, grid: Grid, params: ModelParams, config: SolverConfig, tableau: Optional[ButcherTableau] = None):
        self.grid = grid
        self.params = params
        self.config = config
        self.tableau = tableau or get_tableau()
        self.operator = get_operator(grid, workers=config.threads)
        self._a = self.tableau.a_matrix
        self._b = self.tableau.b_vector

    def _nonlinear(self, stages: np.ndarray) -> np.ndarray:
        p = self.params
        return 2.0 * p.lam * stages * np.log(p.epsilon + np.abs(stages))

    def _check_field(self, U: ComplexField) -> None:
        if U.grid != self.grid:
            raise DimensionError(f"field on {U.grid} handed to integrator on {self.grid}")

    def predict(self, U: ComplexField, tau: Optional[float] = None, sweeps: Optional[int] = None) -> Tuple[ComplexField, ...]:
        r"""Stage values U*_1..U*_s after ``sweeps`` linearized sweeps.

        Sweep m solves  K_i - i tau sum_j a_ij Delta_h K_j = i Delta_h U^n - i N(U_{i,(m-1)})
        and sets U_{i,(m)} = U^n + tau sum_j a_ij K_j, starting from U_{i,(0)} = U^n.
        """
        self._check_field(U)
        tau = self.config.tau if tau is None else tau
        sweeps = self.config.sweeps if sweeps is None else sweeps
        s = self.tableau.stages
        u0 = U.as_array()
        lap_u0 = self.operator.laplacian(U).as_array()
        stages = np.broadcast_to(u0, (s,) + u0.shape)
        fields = tuple(U for _ in range(s))
        for sweep in range(1, sweeps + 1):
            rhs = 1j * lap_u0[None] - 1j * self._nonlinear(stages)
            k = self.operator.solve_stages(self._a, tau, rhs)
            stages = u0[None] + tau * np.einsum("ij,j...->i...", self._a, k)
            try:
                fields = tuple(ComplexField(self.grid, stage) for stage in stages)
            except NonFiniteFieldError as exc:
                raise DivergenceError(sweep) from exc
        return fields

    def correct(self, U: ComplexField, stages: Iterable[ComplexField], tau: Optional[float] = None) -> Tuple[ComplexField, StepReport]:
        """Projects the frozen-nonlinearity RK step onto the mass and energy levels of ``U``."""
        self._check_field(U)
        tau = self.config.tau if tau is None else tau
        stages = tuple(stages)
        p, op = self.params, self.operator
        u0 = U.as_array()
        stage_arr = np.stack([st.as_array() for st in stages])
        lap_u0 = op.laplacian(U).as_array()

        # right-hand sides of k-hat, r1 and r2 share one set of mode inverses
        rhs = np.stack(
            [
                1j * lap_u0[None] - 1j * self._nonlinear(stage_arr),
                np.stack([grad_energy(st, p, op).as_array() for st in stages]),
                stage_arr,
            ]
        )
        k_hat, r1, r2 = op.solve_stages(self._a, tau, rhs)
        b = self._b
        u_hat = ComplexField(self.grid, u0 + tau * np.einsum("i,i...->...", b, k_hat))
        directions = (
            ComplexField(self.grid, np.einsum("i,i...->...", b, r1)),
            ComplexField(self.grid, np.einsum("i,i...->...", b, r2)),
        )

        mass_before = mass(U)
        energy_before = energy(U, p, op)
        beta, u_next, residual, iterations, jacobian = self._solve_constraints(u_hat, directions, mass_before, energy_before)
        report = StepReport(
            beta1=float(beta[0]),
            beta2=float(beta[1]),
            newton_iterations=iterations,
            mass_before=mass_before,
            energy_before=energy_before,
            mass_after=mass(u_next),
            energy_after=energy(u_next, p, op),
            correction_residual=residual,
            tau=tau,
            jacobian=jacobian,
        )
        return u_next, report

    def _solve_constraints(self, u_hat, directions, mass_before, energy_before):
        cfg, p, op = self.config, self.params, self.operator
        tol = cfg.newton_tol * max(1.0, abs(energy_before), mass_before)
        R1, R2 = directions

        def candidate(beta):
            return u_hat + complex(beta[0]) * R1 + complex(beta[1]) * R2

        def residuals(beta):
            u = candidate(beta)
            return np.array([energy(u, p, op) - energy_before, mass(u) - mass_before]), u

        def analytic_jacobian(u):
            g1, g2 = grad_energy(u, p, op), grad_mass(u)
            return np.array([[2.0 * inner_product(g, R).real for R in directions] for g in (g1, g2)])

        def fd_jacobian(beta):
            h = cfg.fd_step * max(1.0, float(np.max(np.abs(beta))))
            cols = []
            for j in range(2):
                step = np.zeros(2)
                step[j] = h
                cols.append((residuals(beta + step)[0] - residuals(beta - step)[0]) / (2.0 * h))
            return np.stack(cols, axis=1)

        jacobian_kind = JACOBIAN_FINITE_DIFFERENCE if cfg.fd_jacobian else JACOBIAN_ANALYTIC
        beta = np.zeros(2)
        F, u = residuals(beta)
        iterations = 0
        while True:
            within_tol = np.max(np.abs(F)) <= tol
            if within_tol and (iterations >= cfg.newton_min_iter or not np.any(F)):
                break
            if iterations >= cfg.newton_max_iter:
                raise NewtonConvergenceError(iterations, F)
            if jacobian_kind == JACOBIAN_ANALYTIC:
                jac = analytic_jacobian(u)
            else:
                jac = fd_jacobian(beta)
            singular, det = _is_singular(jac)
            if singular and within_tol:
                # the unprojected step already meets the tolerance
                logging.debug("singular Newton Jacobian (det=%.3e) at a converged residual, update skipped", det)
                break
            if singular and jacobian_kind == JACOBIAN_ANALYTIC:
                logging.warning("analytic Newton Jacobian singular (det=%.3e), retrying with finite differences", det)
                jacobian_kind = JACOBIAN_FINITE_DIFFERENCE
                jac = fd_jacobian(beta)
                singular, det = _is_singular(jac)
            if singular:
                raise DegenerateDirectionError(det, F)
            beta = beta - np.linalg.solve(jac, F)
            iterations += 1
            F, u = residuals(beta)
        return beta, u, float(np.max(np.abs(F))), iterations, jacobian_kind

    def step(self, U: ComplexField, tau: Optional[float] = None) -> Tuple[ComplexField, StepReport]:
        return self.correct(U, self.predict(U, tau), tau)

    def integrate(
        self,
        U0: ComplexField,
        t_end: float,
        observer: Optional[Observer] = None,
        snapshot_every: int = 0,
        snapshot_times: Iterable[float] = (),
    ) -> ComplexField:
        r"""Advances ``U0`` to ``t_end``.

        The observer receives (n, t_n, report, snapshot) after every step;
        the snapshot is the new field on steps selected by ``snapshot_every``
        or nearest to one of ``snapshot_times``, None otherwise. When t_end
        is not a multiple of tau the last step is shortened and its report
        flagged.

        Raises:
          StepFailure: a step could not be completed; carries the step index.
        """
        self._check_field(U0)
        if not (math.isfinite(t_end) and t_end >= 0):
            raise ConfigurationError("t_end", f"final time must be >= 0, got {t_end}")
        tau = self.config.tau
        ratio = t_end / tau
        n_steps = int(round(ratio))
        last_tau = tau
        if abs(n_steps * tau - t_end) > STEP_ALIGNMENT_TOL * max(1.0, t_end):
            n_steps = int(math.floor(ratio))
            last_tau = t_end - n_steps * tau
            n_steps += 1
        if n_steps == 0:
            return U0

        snapshot_steps = {min(n_steps, max(1, int(round(ts / tau)))) for ts in snapshot_times if ts > 0}
        mass0, energy0 = mass(U0), energy(U0, self.params, self.operator)
        log_every = self.config.log_every

        U = U0
        for n in range(1, n_steps + 1):
            shortened = n == n_steps and last_tau != tau
            step_tau = last_tau if n == n_steps else tau
            t = t_end if n == n_steps else n * tau
            try:
                U, report = self.step(U, step_tau)
            except (SolverError, NonFiniteFieldError) as exc:
                raise StepFailure(n, exc) from exc
            report = dataclasses.replace(report, step=n, t=t, shortened=shortened)

            if log_every and (n % log_every == 0 or n == n_steps):
                logging.info(
                    "step %d t=%.6g e_M=%.3e e_E=%.3e beta=(%.3e, %.3e) newton=%d",
                    n,
                    t,
                    _relative_drift(report.mass_after, mass0),
                    _relative_drift(report.energy_after, energy0),
                    report.beta1,
                    report.beta2,
                    report.newton_iterations,
                )
            if observer is not None:
                take = (snapshot_every and n % snapshot_every == 0) or n in snapshot_steps
                observer(n, t, report, U if take else None)
        return U


def predict(U: ComplexField, tableau: ButcherTableau, config: SolverConfig, params: ModelParams) -> Tuple[ComplexField, ...]:
    return SVMIntegrator(U.grid, params, config, tableau).predict(U)


def correct(U, stages, tableau: ButcherTableau, config: SolverConfig, params: ModelParams) -> Tuple[ComplexField, StepReport]:
    return SVMIntegrator(U.grid, params, config, tableau).correct(U, stages)


def step(U: ComplexField, tableau: ButcherTableau, config: SolverConfig, params: ModelParams) -> Tuple[ComplexField, StepReport]:
    return SVMIntegrator(U.grid, params, config, tableau).step(U)


def integrate(U0, t_end, tableau, config, params, observer: Optional[Observer] = None, **kwargs) -> ComplexField:
    return SVMIntegrator(U0.grid, params, config, tableau).integrate(U0, t_end, observer, **kwargs)
