"""Regularized logarithmic Schroedinger model: nonlinearity, invariants, gradients.

The PDE is  i u_t + Delta u = lambda u ln(eps + |u|)^2,  where ln(.)^2 is
read as ln((eps + |u|)^2) = 2 ln(eps + |u|); this is the reading under which
the discrete energy below is an invariant of the flow.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from errors import ConfigurationError
from field_grid import ComplexField, norm_sq
from spectral import SpectralOperator, get_operator


@dataclass(frozen=True)
class ModelParams:
    r"""Nonlinear strength ``lam`` (lambda, != 0) and regularization ``epsilon`` > 0.

    ``allow_linear`` admits lam = 0 (the linear Schroedinger flow), which
    the solver tests use as an exactly solvable reference.
    """

    lam: float
    epsilon: float
    allow_linear: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ConfigurationError("epsilon", f"regularization must be > 0, got {self.epsilon}")
        if not math.isfinite(self.lam):
            raise ConfigurationError("lambda", f"nonlinear strength must be finite, got {self.lam}")
        if self.lam == 0 and not self.allow_linear:
            raise ConfigurationError("lambda", "nonlinear strength must be nonzero")


def _log_term(values: np.ndarray, epsilon: float) -> np.ndarray:
    return np.log(epsilon + np.abs(values))


def nonlinear_term(U: ComplexField, p: ModelParams) -> ComplexField:
    r"""lambda u ln(eps + |u|)^2, pointwise."""
    return ComplexField(U.grid, 2.0 * p.lam * U.values * _log_term(U.values, p.epsilon))


def energy_density(U: ComplexField, p: ModelParams) -> np.ndarray:
    r"""2 eps lambda |u| + 2 lambda (|u|^2 - eps^2) ln(eps + |u|), as a real array."""
    rho = np.abs(U.values)
    eps = p.epsilon
    return 2.0 * eps * p.lam * rho + 2.0 * p.lam * (rho * rho - eps * eps) * np.log(eps + rho)


def mass(U: ComplexField) -> float:
    return norm_sq(U)


def kinetic_energy(U: ComplexField, operator: Optional[SpectralOperator] = None) -> float:
    r"""-<Delta_h U, U>_h evaluated through Parseval, hence exactly real and >= 0."""
    operator = operator or get_operator(U.grid)
    coeffs = operator.forward(U.as_array())
    weight = U.grid.cell_volume / U.grid.size
    return weight * float(np.sum(-operator.laplacian_symbol * (coeffs.real**2 + coeffs.imag**2)))


def energy(U: ComplexField, p: ModelParams, operator: Optional[SpectralOperator] = None) -> float:
    r"""E_h = -<Delta_h U, U>_h + <2 eps lambda |U| + 2 lambda (|U|^2 - eps^2) ln(eps + |U|), 1>_h."""
    potential = U.grid.cell_volume * float(np.sum(energy_density(U, p)))
    return kinetic_energy(U, operator) + potential


def grad_mass(U: ComplexField) -> ComplexField:
    r"""dM/d(conj u) = u."""
    return U


def grad_energy(U: ComplexField, p: ModelParams, operator: Optional[SpectralOperator] = None) -> ComplexField:
    r"""dE_h/d(conj u) = -Delta_h u + 2 lambda u ln(eps + |u|) + lambda u.

    The u/|u| factors of the |u| terms cancel analytically, so this closed
    form has no 0/0 at zeros of u.
    """
    operator = operator or get_operator(U.grid)
    local = p.lam * U.values * (2.0 * _log_term(U.values, p.epsilon) + 1.0)
    return ComplexField(U.grid, local - operator.laplacian(U).values)


def hamiltonian_rhs(U: ComplexField, p: ModelParams, operator: Optional[SpectralOperator] = None) -> ComplexField:
    r"""u_t = i Delta_h u - i lambda u ln(eps + |u|)^2."""
    operator = operator or get_operator(U.grid)
    return ComplexField(U.grid, 1j * (operator.laplacian(U).values - nonlinear_term(U, p).values))
