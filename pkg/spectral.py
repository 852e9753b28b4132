"""Fourier pseudo-spectral differentiation and the mode-wise stage solver.

DFT convention: forward unnormalized, inverse carries 1/N per axis (the
scipy.fft "backward" norm). All symbol tables assume it.
"""

import collections
import functools
import threading
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
import scipy.fft
from absl import logging

from errors import ConfigurationError, DimensionError, NumericalSingularityError
from field_grid import ComplexField, Grid, check_same_grid, norm_sq

# relative pivot floor for the per-mode s x s matrices
SINGULARITY_RTOL = 1e-14


def wavenumber_indices(n: int, order: int) -> np.ndarray:
    r"""Index table [0, 1, ..., N/2-1, N/2 or 0, -N/2+1, ..., -1].

    The Nyquist slot holds N/2 for even derivative orders and 0 for odd
    ones, so odd derivatives of real data stay real.
    """
    ell = np.fft.fftfreq(n, d=1.0 / n)
    ell[n // 2] = n // 2 if order % 2 == 0 else 0
    return ell


# (tau, A) pairs whose mode inverses an operator keeps, least recently used dropped first
MAX_CACHED_INVERSES = 16


class SpectralOperator:
    r"""Diagonal Fourier symbols of a grid, plus cached stage-matrix inverses.

    Immutable after construction apart from the inverse cache, which is
    guarded by a lock; instances may be shared between threads.
    """

    def __init__(self, grid: Grid, workers: int = 1):
        self.grid = grid
        self.workers = workers
        sx = self.symbol(0, 2)
        sy = self.symbol(1, 2) if grid.dims == 2 else np.zeros(1)
        self.laplacian_symbol = sx[:, None] + sy[None, :]
        self._inverses: "collections.OrderedDict[Tuple[float, bytes], np.ndarray]" = collections.OrderedDict()
        self._lock = threading.Lock()

    def symbol(self, axis: int, order: int) -> np.ndarray:
        r"""Diagonal symbol of d^order/dx_axis^order; real for even orders."""
        if order < 0:
            raise ConfigurationError("order", f"derivative order must be >= 0, got {order}")
        mu = self.grid.wavenumber_scales[axis]
        k = mu * wavenumber_indices(self.grid.nodes[axis], order)
        if order % 2 == 0:
            return (-1.0) ** (order // 2) * k**order
        return 1j * (-1.0) ** (order // 2) * k**order

    def forward(self, arr: np.ndarray) -> np.ndarray:
        return scipy.fft.fftn(arr, axes=(-2, -1), workers=self.workers)

    def inverse(self, arr: np.ndarray) -> np.ndarray:
        return scipy.fft.ifftn(arr, axes=(-2, -1), workers=self.workers)

    def _check(self, U: ComplexField) -> None:
        if U.grid != self.grid:
            raise DimensionError(f"field on {U.grid} handed to operator on {self.grid}")

    def laplacian(self, U: ComplexField) -> ComplexField:
        self._check(U)
        return ComplexField(self.grid, self.inverse(self.laplacian_symbol * self.forward(U.as_array())))

    def derivative(self, U: ComplexField, axis: int, order: int) -> ComplexField:
        self._check(U)
        sym = self.symbol(axis, order)
        sym = sym[:, None] if axis == 0 else sym[None, :]
        return ComplexField(self.grid, self.inverse(sym * self.forward(U.as_array())))

    def dense_matrix(self, axis: int, order: int) -> np.ndarray:
        r"""The N x N differentiation matrix F^{-1} diag(symbol) F along one axis."""
        n = self.grid.nodes[axis]
        eye = np.eye(n, dtype=np.complex128)
        sym = self.symbol(axis, order)
        return scipy.fft.ifft(sym[:, None] * scipy.fft.fft(eye, axis=0), axis=0)

    def mode_inverses(self, a: np.ndarray, tau: float) -> np.ndarray:
        r"""Inverses of M(sigma) = I_s - i tau sigma A for every Fourier mode.

        Returns an array of shape (n_modes, s, s). The matrices only depend
        on (tau, A); the last MAX_CACHED_INVERSES pairs are cached.
        """
        a = np.ascontiguousarray(a, dtype=np.float64)
        key = (float(tau), a.tobytes())
        with self._lock:
            cached = self._inverses.get(key)
            if cached is not None:
                self._inverses.move_to_end(key)
        if cached is not None:
            return cached

        s = a.shape[0]
        sigma = self.laplacian_symbol.reshape(-1)
        mats = np.eye(s, dtype=np.complex128)[None, :, :] - 1j * tau * sigma[:, None, None] * a[None, :, :]
        det = np.linalg.det(mats)
        # Hadamard bound: |det| <= prod of row norms
        scale = np.prod(np.linalg.norm(mats, axis=2), axis=1)
        bad = np.flatnonzero(np.abs(det) < SINGULARITY_RTOL * scale)
        if bad.size:
            mode = int(bad[0])
            raise NumericalSingularityError(mode, f"stage matrix pivot {abs(det[mode]):.3e} below {SINGULARITY_RTOL:g} x scale")
        inv = np.linalg.inv(mats)
        inv.setflags(write=False)
        with self._lock:
            self._inverses[key] = inv
            while len(self._inverses) > MAX_CACHED_INVERSES:
                self._inverses.popitem(last=False)
        logging.debug("factored %d stage matrices (s=%d, tau=%g) on %s", sigma.size, s, tau, self.grid)
        return inv

    def solve_stages(self, a: np.ndarray, tau: float, rhs: np.ndarray) -> np.ndarray:
        r"""Solves K_i - i tau sum_j a_ij Delta_h K_j = B_i mode by mode.

        Args:
          a: (s, s) tableau matrix.
          tau: time step, >= 0.
          rhs: array of shape (..., s, Nx, Ny); leading axes batch several
            right-hand sides through one set of inverses.

        Returns:
          Array of the same shape holding the stage fields K.
        """
        if tau == 0:
            return np.array(rhs, dtype=np.complex128, copy=True)
        inv = self.mode_inverses(a, tau)
        s = inv.shape[-1]
        batch = rhs.shape[:-3]
        coeffs = self.forward(rhs).reshape(batch + (s, -1))
        solved = np.einsum("mij,...jm->...im", inv, coeffs)
        return self.inverse(solved.reshape(rhs.shape))


@functools.lru_cache(maxsize=16)
def get_operator(grid: Grid, workers: int = 1) -> SpectralOperator:
    return SpectralOperator(grid, workers=workers)


def laplacian(U: ComplexField) -> ComplexField:
    return get_operator(U.grid).laplacian(U)


@dataclass(frozen=True, eq=False)
class StageSystem:
    r"""The s-stage operator system (I - i tau A (x) Delta_h) K = B."""

    a: np.ndarray
    tau: float
    rhs: Tuple[ComplexField, ...]

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] != len(self.rhs):
            raise DimensionError(f"tableau of shape {a.shape} does not match {len(self.rhs)} stage right-hand sides")
        if not self.tau >= 0:
            raise ConfigurationError("tau", f"time step must be >= 0, got {self.tau}")
        for field in self.rhs[1:]:
            check_same_grid(self.rhs[0], field)


def solve_stage_system(system: StageSystem, operator: SpectralOperator = None) -> Tuple[ComplexField, ...]:
    grid = system.rhs[0].grid
    operator = operator or get_operator(grid)
    rhs = np.stack([field.as_array() for field in system.rhs])
    solved = operator.solve_stages(np.asarray(system.a, dtype=np.float64), system.tau, rhs)
    return tuple(ComplexField(grid, k) for k in solved)


def stage_residual(system: StageSystem, stages: Sequence[ComplexField], operator: SpectralOperator = None) -> float:
    r"""max_i || K_i - i tau sum_j a_ij Delta_h K_j - B_i ||_h in real space."""
    operator = operator or get_operator(system.rhs[0].grid)
    lap = [operator.laplacian(k) for k in stages]
    worst = 0.0
    for i, (k_i, b_i) in enumerate(zip(stages, system.rhs)):
        coupled = sum((complex(1j * system.tau * system.a[i][j]) * lap[j] for j in range(len(stages))), ComplexField.zeros(k_i.grid))
        worst = max(worst, norm_sq(k_i - coupled - b_i) ** 0.5)
    return worst
