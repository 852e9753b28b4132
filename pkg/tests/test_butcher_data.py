import math

import numpy as np
import pytest

from butcher_data import DEFAULT_TABLEAU, TABLEAU_NAMES, ButcherTableau, get_tableau
from errors import ConfigurationError

SQRT3 = math.sqrt(3.0)


def test_catalogue():
    assert DEFAULT_TABLEAU == "gauss2"
    assert TABLEAU_NAMES == ("gauss1", "gauss2", "gauss3")
    assert [get_tableau(n).order for n in TABLEAU_NAMES] == [2, 4, 6]
    assert [get_tableau(n).stages for n in TABLEAU_NAMES] == [1, 2, 3]


def test_gauss2_coefficients():
    tab = get_tableau("gauss2")
    np.testing.assert_allclose(tab.a_matrix, [[0.25, 0.25 - SQRT3 / 6], [0.25 + SQRT3 / 6, 0.25]], rtol=1e-15)
    np.testing.assert_allclose(tab.b_vector, [0.5, 0.5])
    np.testing.assert_allclose(tab.c, [0.5 - SQRT3 / 6, 0.5 + SQRT3 / 6], rtol=1e-15)


@pytest.mark.parametrize("name", TABLEAU_NAMES)
def test_order_conditions(name):
    tab = get_tableau(name)
    a, b, c = tab.a_matrix, tab.b_vector, np.array(tab.c)
    np.testing.assert_allclose(a.sum(axis=1), c, atol=1e-15)
    # bushy-tree conditions sum_i b_i c_i^(k-1) = 1/k up to the method order
    for k in range(1, tab.order + 1):
        assert b @ c ** (k - 1) == pytest.approx(1.0 / k, rel=1e-13)
    if tab.order >= 3:
        assert b @ a @ c == pytest.approx(1.0 / 6.0, rel=1e-13)
    if tab.order >= 4:
        assert b @ a @ a @ c == pytest.approx(1.0 / 24.0, rel=1e-13)


@pytest.mark.parametrize("name", TABLEAU_NAMES)
def test_stability_function_is_unimodular_on_imaginary_axis(name):
    tab = get_tableau(name)
    a, b, s = tab.a_matrix, tab.b_vector, tab.stages
    for y in (0.1, 1.0, 7.5, 300.0):
        z = 1j * y
        R = 1 + z * b @ np.linalg.solve(np.eye(s) - z * a, np.ones(s))
        assert abs(R) == pytest.approx(1.0, abs=1e-13)


def test_unknown_tableau():
    with pytest.raises(ConfigurationError) as exc:
        get_tableau("radau5")
    assert exc.value.key == "tableau"


def test_row_sum_condition_is_enforced():
    with pytest.raises(ConfigurationError):
        ButcherTableau(name="broken", a=((0.5, 0.1), (0.0, 0.5)), b=(0.5, 0.5), c=(0.5, 0.5), order=2)
    with pytest.raises(ConfigurationError):
        ButcherTableau(name="ragged", a=((0.5,),), b=(0.5, 0.5), c=(0.5,), order=1)
