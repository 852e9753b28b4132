"""Periodic tensor grids, complex grid functions and the discrete L2 algebra.

Fields are stored as one flat row-major complex128 buffer of length Nx * Ny,
1D grids being the Ny = 1 case, so every transform and reduction follows a
single code path.
"""

import math
from dataclasses import dataclass
from numbers import Number
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from errors import ConfigurationError, DimensionError, NonFiniteFieldError

AXIS_NAMES = ("x", "y")


@dataclass(frozen=True)
class Grid:
    r"""Uniform periodic grid on [x_L, x_R) (x [y_L, y_R)); right endpoints excluded."""

    bounds: Tuple[Tuple[float, float], ...]
    nodes: Tuple[int, ...]

    @property
    def dims(self) -> int:
        return len(self.nodes)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.nodes[0], self.nodes[1] if self.dims == 2 else 1)

    @property
    def size(self) -> int:
        return self.shape[0] * self.shape[1]

    @property
    def lengths(self) -> Tuple[float, ...]:
        return tuple(right - left for left, right in self.bounds)

    @property
    def spacings(self) -> Tuple[float, ...]:
        return tuple(length / n for length, n in zip(self.lengths, self.nodes))

    @property
    def wavenumber_scales(self) -> Tuple[float, ...]:
        return tuple(2.0 * math.pi / length for length in self.lengths)

    @property
    def cell_volume(self) -> float:
        return math.prod(self.spacings)

    @property
    def measure(self) -> float:
        return math.prod(self.lengths)

    def coordinates(self, axis: int = 0) -> np.ndarray:
        left = self.bounds[axis][0]
        return left + np.arange(self.nodes[axis]) * self.spacings[axis]

    def mesh(self) -> Tuple[np.ndarray, ...]:
        r"""Node coordinates broadcast to ``shape``, one array per axis."""
        if self.dims == 1:
            return (self.coordinates(0)[:, None] * np.ones((1, 1)),)
        return tuple(np.meshgrid(self.coordinates(0), self.coordinates(1), indexing="ij"))

    def __str__(self) -> str:
        extent = " x ".join(f"[{left:g}, {right:g}]" for left, right in self.bounds)
        return f"Grid({extent}, nodes={'x'.join(str(n) for n in self.nodes)})"


def make_grid(bounds: Sequence, nodes: Union[int, Sequence[int]]) -> Grid:
    r"""Builds a validated grid.

    Args:
      bounds: one (left, right) pair per axis; a bare pair means 1D.
      nodes: node count per axis; a bare integer means 1D.

    Raises:
      ConfigurationError: odd or too small node counts, inverted bounds,
        or mismatched axis counts. The error key names the axis.
    """
    if isinstance(nodes, Number):
        nodes = (nodes,)
    if len(bounds) == 2 and all(isinstance(b, Number) for b in bounds):
        bounds = (tuple(bounds),)
    bounds = tuple((float(left), float(right)) for left, right in bounds)
    if len(bounds) != len(nodes) or len(nodes) not in (1, 2):
        raise ConfigurationError("nodes", f"expected 1 or 2 axes, got bounds for {len(bounds)} and nodes for {len(nodes)}")

    checked = []
    for axis, ((left, right), n) in enumerate(zip(bounds, nodes)):
        name = AXIS_NAMES[axis]
        if int(n) != n or n < 4 or n % 2:
            raise ConfigurationError(f"nodes[{name}]", f"node count must be an even integer >= 4, got {n}")
        if not (math.isfinite(left) and math.isfinite(right)) or left >= right:
            raise ConfigurationError(f"bounds[{name}]", f"need finite left < right, got ({left}, {right})")
        checked.append(int(n))
    return Grid(bounds=bounds, nodes=tuple(checked))


class ComplexField:
    r"""Complex grid function; immutable, values kept flat in row-major order."""

    __slots__ = ("grid", "values")
    # numpy defers to our reflected operators for `scalar * field`
    __array_ufunc__ = None

    def __init__(self, grid: Grid, values, check: bool = True):
        values = np.array(values, dtype=np.complex128, copy=True).reshape(-1)
        if values.size != grid.size:
            raise DimensionError(f"{values.size} values do not fit {grid} ({grid.size} nodes)")
        if check and not np.all(np.isfinite(values)):
            raise NonFiniteFieldError(f"field on {grid} has NaN/Inf entries")
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    @classmethod
    def zeros(cls, grid: Grid) -> "ComplexField":
        return cls(grid, np.zeros(grid.size, dtype=np.complex128))

    @classmethod
    def constant(cls, grid: Grid, value: complex) -> "ComplexField":
        return cls(grid, np.full(grid.size, value, dtype=np.complex128))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[..., np.ndarray]) -> "ComplexField":
        r"""Samples ``fn(x)`` (1D) or ``fn(x, y)`` (2D) at the grid nodes."""
        return cls(grid, np.broadcast_to(fn(*grid.mesh()), grid.shape))

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, ComplexField):
            check_same_grid(self, other)
            return other.values
        if isinstance(other, Number):
            return other
        return NotImplemented

    def __add__(self, other):
        rhs = self._coerce(other)
        return NotImplemented if rhs is NotImplemented else ComplexField(self.grid, self.values + rhs)

    __radd__ = __add__

    def __sub__(self, other):
        rhs = self._coerce(other)
        return NotImplemented if rhs is NotImplemented else ComplexField(self.grid, self.values - rhs)

    def __rsub__(self, other):
        rhs = self._coerce(other)
        return NotImplemented if rhs is NotImplemented else ComplexField(self.grid, rhs - self.values)

    def __mul__(self, other):
        # scalar scaling or the pointwise product
        rhs = self._coerce(other)
        return NotImplemented if rhs is NotImplemented else ComplexField(self.grid, self.values * rhs)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Number):
            return NotImplemented
        return ComplexField(self.grid, self.values / other)

    def __neg__(self):
        return ComplexField(self.grid, -self.values)

    def __abs__(self):
        return ComplexField(self.grid, np.abs(self.values))

    def conj(self) -> "ComplexField":
        return ComplexField(self.grid, np.conj(self.values))

    def reflect(self, axis: int = 0) -> "ComplexField":
        r"""Mirror image x -> x_L + x_R - x, i.e. node j -> (N - j) mod N."""
        arr = np.roll(np.flip(self.as_array(), axis=axis), 1, axis=axis)
        return ComplexField(self.grid, arr)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ComplexField):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.values, other.values)

    __hash__ = None

    def __repr__(self) -> str:
        return f"ComplexField({self.grid}, max|u|={np.max(np.abs(self.values)):.6g})"


def check_same_grid(U: ComplexField, V: ComplexField) -> None:
    if U.grid != V.grid:
        raise DimensionError(f"grid mismatch: {U.grid} vs {V.grid}")


def inner_product(U: ComplexField, V: ComplexField) -> complex:
    r"""<U, V>_h = h_x h_y sum_{j,k} u_{j,k} conj(v_{j,k})."""
    check_same_grid(U, V)
    return U.grid.cell_volume * complex(np.vdot(V.values, U.values))


def norm_sq(U: ComplexField) -> float:
    return U.grid.cell_volume * float(np.vdot(U.values, U.values).real)


def log_regularized(U: ComplexField, epsilon: float) -> ComplexField:
    r"""Pointwise ln((eps + |u|)^2) = 2 ln(eps + |u|)."""
    return ComplexField(U.grid, 2.0 * np.log(epsilon + np.abs(U.values)))


def _add(U, V, **_):
    return U + V


def _subtract(U, V, **_):
    return U - V


def _scale(U, V=None, scalar=None, **_):
    return U * (scalar if scalar is not None else V)


def _multiply(U, V, **_):
    return U * V


def _modulus(U, V=None, **_):
    return abs(U)


def _log_regularized(U, V=None, epsilon=None, **_):
    if epsilon is None:
        raise ConfigurationError("epsilon", "log map needs the regularization parameter")
    return log_regularized(U, epsilon)


_ELEMENTWISE_MAPS = {
    "add": _add,
    "subtract": _subtract,
    "scale": _scale,
    "multiply": _multiply,
    "modulus": _modulus,
    "log_regularized": _log_regularized,
}


def elementwise(
    op: str,
    U: ComplexField,
    V: Optional[ComplexField] = None,
    *,
    scalar: Optional[complex] = None,
    epsilon: Optional[float] = None,
) -> ComplexField:
    r"""Applies one of the pointwise maps by name.

    Supported names: add, subtract, scale (by ``scalar``), multiply (the
    elementwise product), modulus and log_regularized (z -> ln(eps + |z|)^2).
    """
    try:
        fn = _ELEMENTWISE_MAPS[op]
    except KeyError:
        raise ConfigurationError("op", f"unknown elementwise map {op!r}, choose from {sorted(_ELEMENTWISE_MAPS)}")
    if V is not None:
        check_same_grid(U, V)
    return fn(U, V, scalar=scalar, epsilon=epsilon)
