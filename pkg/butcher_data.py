"""Butcher tableaux of the Gauss collocation Runge-Kutta methods.

The s-stage Gauss method has order 2s and is symplectic, so its stability
function maps the imaginary axis onto the unit circle. The 2-stage method
(order 4) is the default used by the solver; the 1- and 3-stage methods
ship as data for experimentation.
"""

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from errors import ConfigurationError

_SQRT3 = math.sqrt(3.0)
_SQRT15 = math.sqrt(15.0)


@dataclass(frozen=True)
class ButcherTableau:
    name: str
    a: Tuple[Tuple[float, ...], ...]
    b: Tuple[float, ...]
    c: Tuple[float, ...]
    order: int

    def __post_init__(self):
        s = len(self.b)
        if len(self.a) != s or any(len(row) != s for row in self.a) or len(self.c) != s:
            raise ConfigurationError("tableau", f"{self.name}: inconsistent stage counts")
        for i, row in enumerate(self.a):
            # row-sum condition c_i = sum_j a_ij
            if abs(math.fsum(row) - self.c[i]) > 1e-14:
                raise ConfigurationError("tableau", f"{self.name}: c[{i}] != sum_j a[{i}][j]")

    @property
    def stages(self) -> int:
        return len(self.b)

    @property
    def a_matrix(self) -> np.ndarray:
        return np.array(self.a, dtype=np.float64)

    @property
    def b_vector(self) -> np.ndarray:
        return np.array(self.b, dtype=np.float64)


# Tableau name: (a, b, c, order).
_TABLEAU_DATA = {
    "gauss1": (((0.5,),), (1.0,), (0.5,), 2),
    "gauss2": (
        ((0.25, 0.25 - _SQRT3 / 6.0), (0.25 + _SQRT3 / 6.0, 0.25)),
        (0.5, 0.5),
        (0.5 - _SQRT3 / 6.0, 0.5 + _SQRT3 / 6.0),
        4,
    ),
    "gauss3": (
        (
            (5.0 / 36.0, 2.0 / 9.0 - _SQRT15 / 15.0, 5.0 / 36.0 - _SQRT15 / 30.0),
            (5.0 / 36.0 + _SQRT15 / 24.0, 2.0 / 9.0, 5.0 / 36.0 - _SQRT15 / 24.0),
            (5.0 / 36.0 + _SQRT15 / 30.0, 2.0 / 9.0 + _SQRT15 / 15.0, 5.0 / 36.0),
        ),
        (5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0),
        (0.5 - _SQRT15 / 10.0, 0.5, 0.5 + _SQRT15 / 10.0),
        6,
    ),
}

DEFAULT_TABLEAU = "gauss2"

TABLEAU_NAMES = tuple(sorted(_TABLEAU_DATA.keys()))


def get_tableau(name: str = DEFAULT_TABLEAU) -> ButcherTableau:
    """Looks up a catalogued tableau by name."""
    try:
        a, b, c, order = _TABLEAU_DATA[name]
    except KeyError:
        raise ConfigurationError("tableau", f"unknown tableau {name!r}, choose from {TABLEAU_NAMES}")
    return ButcherTableau(name=name, a=a, b=b, c=c, order=order)
