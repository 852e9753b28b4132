import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from errors import ConfigurationError, DimensionError, NonFiniteFieldError
from field_grid import ComplexField, elementwise, inner_product, log_regularized, make_grid, norm_sq

GRID_1D = make_grid((-16.0, 16.0), 512)
GRID_2D = make_grid(((-4.0, 4.0), (-2.0, 2.0)), (16, 8))


def random_field(grid, seed):
    rng = np.random.default_rng(seed)
    return ComplexField(grid, rng.standard_normal(grid.size) + 1j * rng.standard_normal(grid.size))


def test_grid_geometry_1d():
    assert GRID_1D.dims == 1
    assert GRID_1D.shape == (512, 1)
    assert GRID_1D.spacings == (1.0 / 16.0,)
    assert GRID_1D.cell_volume == 1.0 / 16.0
    assert GRID_1D.measure == 32.0
    x = GRID_1D.coordinates(0)
    assert x[0] == -16.0
    assert x[-1] == 16.0 - 1.0 / 16.0


def test_grid_geometry_2d():
    assert GRID_2D.shape == (16, 8)
    assert GRID_2D.size == 128
    assert GRID_2D.cell_volume == pytest.approx(0.5 * 0.5)
    X, Y = GRID_2D.mesh()
    assert X.shape == Y.shape == (16, 8)
    assert np.all(X[:, 0] == GRID_2D.coordinates(0))
    assert np.all(Y[0, :] == GRID_2D.coordinates(1))


@pytest.mark.parametrize(
    "bounds, nodes, key",
    [
        ((-1.0, 1.0), 7, "nodes[x]"),
        ((-1.0, 1.0), 2, "nodes[x]"),
        (((-1.0, 1.0), (2.0, 2.0)), (8, 8), "bounds[y]"),
        (((-1.0, 1.0), (0.0, 1.0)), (8, 9), "nodes[y]"),
        ((-1.0, 1.0), (8, 8), "nodes"),
    ],
)
def test_make_grid_rejects_bad_axes(bounds, nodes, key):
    with pytest.raises(ConfigurationError) as exc:
        make_grid(bounds, nodes)
    assert exc.value.key == key


def test_field_is_immutable_copy():
    data = np.ones(GRID_2D.size, dtype=complex)
    U = ComplexField(GRID_2D, data)
    data[0] = 5.0
    assert U.values[0] == 1.0
    with pytest.raises(ValueError):
        U.values[0] = 2.0


def test_field_rejects_nan_and_bad_size():
    bad = np.zeros(GRID_2D.size, dtype=complex)
    bad[3] = np.nan
    with pytest.raises(NonFiniteFieldError):
        ComplexField(GRID_2D, bad)
    with pytest.raises(DimensionError):
        ComplexField(GRID_2D, np.zeros(GRID_2D.size + 1))


def test_as_array_is_row_major():
    U = ComplexField(GRID_2D, np.arange(GRID_2D.size))
    arr = U.as_array()
    assert arr.shape == (16, 8)
    assert arr[1, 0] == 8
    assert arr[0, 1] == 1


def test_arithmetic_and_grid_mismatch():
    U = ComplexField.constant(GRID_2D, 2.0)
    V = ComplexField.constant(GRID_2D, 1j)
    assert np.all((U + V).values == 2.0 + 1j)
    assert np.all((U - V).values == 2.0 - 1j)
    assert np.all((U * V).values == 2j)
    assert np.all((3.0 * U).values == 6.0)
    assert np.all((np.float64(0.5) * U).values == 1.0)
    assert np.all((U / 4).values == 0.5)
    assert np.all((-V).values == -1j)
    with pytest.raises(DimensionError):
        U + ComplexField.zeros(GRID_1D)


def test_from_function_samples_nodes():
    U = ComplexField.from_function(GRID_1D, lambda x: np.exp(-(x**2)))
    x = GRID_1D.coordinates(0)
    np.testing.assert_array_equal(U.values.real, np.exp(-(x**2)))


def test_norm_of_constant_is_measure():
    U = ComplexField.constant(GRID_2D, 1.0)
    assert norm_sq(U) == pytest.approx(GRID_2D.measure, rel=1e-15)
    assert inner_product(U, U) == pytest.approx(GRID_2D.measure, rel=1e-15)


@given(st.integers(0, 2**32 - 1))
def test_inner_product_properties(seed):
    U, V, W = (random_field(GRID_2D, seed + k) for k in range(3))
    a = 0.3 - 1.7j
    assert abs(inner_product(U, V)) <= math.sqrt(norm_sq(U) * norm_sq(V)) * (1 + 1e-12)
    assert inner_product(U, V) == pytest.approx(inner_product(V, U).conjugate(), rel=1e-12)
    assert inner_product(a * U + W, V) == pytest.approx(a * inner_product(U, V) + inner_product(W, V), rel=1e-10, abs=1e-12)
    assert inner_product(U, U).real == pytest.approx(norm_sq(U), rel=1e-13)


def test_log_regularized_matches_closed_form():
    U = ComplexField.constant(GRID_1D, 3.0 - 4.0j)
    L = log_regularized(U, 1e-3)
    np.testing.assert_allclose(L.values.real, 2.0 * math.log(5.001), rtol=1e-15)
    assert np.all(L.values.imag == 0)


def test_log_regularized_is_finite_at_zero():
    L = log_regularized(ComplexField.zeros(GRID_1D), 1e-15)
    np.testing.assert_allclose(L.values.real, 2.0 * math.log(1e-15))


def test_elementwise_dispatch():
    U = ComplexField.constant(GRID_2D, 3.0 + 4.0j)
    V = ComplexField.constant(GRID_2D, 2.0)
    assert np.all(elementwise("modulus", U).values == 5.0)
    assert np.all(elementwise("scale", U, scalar=2.0).values == 6.0 + 8.0j)
    assert np.all(elementwise("multiply", U, V).values == 6.0 + 8.0j)
    assert np.all(elementwise("subtract", U, V).values == 1.0 + 4.0j)
    np.testing.assert_allclose(elementwise("log_regularized", U, epsilon=1.0).values.real, 2.0 * math.log(6.0))
    with pytest.raises(ConfigurationError) as exc:
        elementwise("sqrt", U)
    assert exc.value.key == "op"
    with pytest.raises(ConfigurationError) as exc:
        elementwise("log_regularized", U)
    assert exc.value.key == "epsilon"


def test_reflect_mirrors_about_domain_centre():
    U = random_field(GRID_1D, 7)
    assert U.reflect().reflect() == U
    even = ComplexField.from_function(GRID_1D, lambda x: np.exp(-(x**2) / 4) * (1 + 0.5 * x**2))
    np.testing.assert_allclose(even.reflect().values, even.values, rtol=1e-12, atol=1e-15)
    odd = ComplexField.from_function(GRID_1D, lambda x: np.sin(np.pi * x / 16.0))
    np.testing.assert_allclose(odd.reflect().values, -odd.values, atol=1e-12)
