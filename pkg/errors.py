"""Exceptions raised by the RLogSE solver, its study drivers and the CLI."""

from typing import Optional, Sequence


class RLogSEError(Exception):
    r"""Base class of every error raised by this package."""


class ConfigurationError(RLogSEError, ValueError):
    r"""An invalid parameter, axis or flag. ``key`` names the offender."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class StudyConfigurationError(ConfigurationError):
    pass


class DimensionError(RLogSEError, ValueError):
    pass


class NonFiniteFieldError(RLogSEError, ArithmeticError):
    pass


class UndefinedNormalizationError(RLogSEError, ZeroDivisionError):
    pass


class SolverError(RLogSEError, ArithmeticError):
    r"""Base class of numerical failures inside a time step."""


class NumericalSingularityError(SolverError):
    def __init__(self, mode: int, message: str):
        super().__init__(f"mode {mode}: {message}")
        self.mode = mode


class DivergenceError(SolverError):
    def __init__(self, sweep: int, message: str = "non-finite stage values"):
        super().__init__(f"prediction sweep {sweep}: {message}")
        self.sweep = sweep


class NewtonConvergenceError(SolverError):
    def __init__(self, iterations: int, residuals: Sequence[float]):
        residuals = tuple(float(r) for r in residuals)
        super().__init__(
            f"Newton did not converge in {iterations} iterations, last residuals (F1, F2) = "
            f"({residuals[0]:.3e}, {residuals[1]:.3e})"
        )
        self.iterations = iterations
        self.residuals = residuals


class DegenerateDirectionError(SolverError):
    def __init__(self, determinant: float, residuals: Optional[Sequence[float]] = None):
        super().__init__(f"singular Newton Jacobian (det = {determinant:.3e})")
        self.determinant = determinant
        self.residuals = tuple(residuals) if residuals is not None else None


class StepFailure(SolverError):
    def __init__(self, step_index: int, cause: Exception):
        super().__init__(f"step {step_index} failed: {cause}")
        self.step_index = step_index
        self.residuals = getattr(cause, "residuals", None)
