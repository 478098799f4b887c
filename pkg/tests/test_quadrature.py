import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinuq.errors import NonConvergence
from kinuq.quadrature import cell_rule, erf, erfi, erfi_scaled, gauss_hermite, gauss_legendre

from conftest import series_erfi, taylor_erf


def test_legendre_one_node_is_midpoint():
    r = gauss_legendre(1)
    assert r.nodes.tolist() == [0.0]
    assert r.weights.tolist() == [1.0]


def test_legendre_two_nodes():
    r = gauss_legendre(2)
    assert np.allclose(r.nodes, [-1 / math.sqrt(3), 1 / math.sqrt(3)], atol=1e-7)
    assert np.allclose(r.weights, [0.5, 0.5], atol=1e-15)


def test_legendre_variance_n5():
    r = gauss_legendre(5)
    assert abs(r.expect(lambda t: t**2) - 1 / 3) < 1e-12


@pytest.mark.parametrize("n", [1, 2, 3, 7, 11, 20, 40, 64])
def test_legendre_matches_numpy(n):
    x, w = np.polynomial.legendre.leggauss(n)
    r = gauss_legendre(n)
    assert np.allclose(r.nodes, x, atol=1e-13)
    assert np.allclose(r.weights, w / 2, atol=1e-13)
    assert abs(r.weights.sum() - 1) < 1e-13


@pytest.mark.parametrize("n", [2, 5, 11])
def test_legendre_exact_to_degree_2n_minus_1(n):
    r = gauss_legendre(n, 0.0, 2 * math.pi)
    for m in range(2 * n):
        exact = (2 * math.pi) ** m / (m + 1)
        assert abs(r.expect(lambda t: t**m) - exact) <= 1e-12 * max(1.0, exact)


def test_legendre_nodes_inside_and_sorted():
    r = gauss_legendre(11, 0.0, 2 * math.pi)
    assert np.all(np.diff(r.nodes) > 0)
    assert r.nodes[0] > 0 and r.nodes[-1] < 2 * math.pi


def test_legendre_bad_input():
    with pytest.raises(ValueError):
        gauss_legendre(0)
    with pytest.raises(ValueError):
        gauss_legendre(3, 1.0, 1.0)


def test_hermite_small_rules():
    r1 = gauss_hermite(1)
    assert r1.nodes.tolist() == [0.0] and r1.weights.tolist() == [1.0]
    assert abs(gauss_hermite(3).expect(lambda t: t**2) - 1) < 1e-12
    assert abs(gauss_hermite(4).expect(lambda t: t**4) - 3) < 1e-10


@pytest.mark.parametrize("n", [2, 5, 10, 30, 60])
def test_hermite_matches_numpy(n):
    x, w = np.polynomial.hermite_e.hermegauss(n)
    r = gauss_hermite(n)
    assert np.allclose(r.nodes, x, atol=1e-10 * max(1, np.abs(x).max()))
    assert np.allclose(r.weights, w / w.sum(), rtol=1e-8, atol=1e-300)


def test_cell_rules_integrate_on_unit_interval():
    for order, deg in (("SP2", 1), ("SP4", 3), ("SPG", 11)):
        x, w = cell_rule(order)
        for m in range(deg + 1):
            assert abs(np.dot(w, x**m) - 1 / (m + 1)) < 1e-13
    with pytest.raises(ValueError):
        cell_rule("SP9")


def test_erf_examples():
    assert erf(0.0) == 0.0
    assert abs(erf(1.0) - 0.8427008) < 1e-7
    assert abs(erf(1.0) - taylor_erf(1.0)) < 1e-14
    assert abs(erf(math.pi) - 0.9999912) < 1e-7


@given(st.floats(-3, 3))
def test_erf_against_series_and_odd(x):
    # the alternating series loses digits to cancellation as |x| grows
    assert abs(erf(x) - taylor_erf(x, 120)) < 1e-12 * math.exp(x * x)
    assert erf(x) + erf(-x) == 0.0
    assert abs(erf(x)) <= 1.0


def test_erf_monotone_on_grid():
    x = np.linspace(-6, 6, 2001)
    vals = np.array([erf(t) for t in x])
    assert np.all(np.diff(vals) >= 0)


def test_erfi_examples():
    assert erfi(0.0) == 0.0
    assert abs(erfi(1.0) - 1.6504258) < 1e-7


@settings(max_examples=200)
@given(st.floats(-8, 8))
def test_erfi_against_series(x):
    ref = series_erfi(x)
    assert abs(erfi(x) - ref) <= 1e-13 * max(1.0, abs(ref))
    assert erfi(-x) == -erfi(x)
    if x >= 0:
        assert erfi(x) >= 2 * x / math.sqrt(math.pi) * (1 - 1e-15)


def test_erfi_against_scipy_across_crossover():
    special = pytest.importorskip("scipy.special")
    for x in np.linspace(0.05, 26.5, 500):
        assert abs(erfi(x) / special.erfi(x) - 1) < 1e-13


def test_erfi_scaled_is_finite_far_out():
    assert abs(erfi_scaled(100.0) - 1 / (math.sqrt(math.pi) * 100) * (1 + 1 / 2e4 + 3 / 4e8 + 15 / 8e12)) < 1e-15
    assert erfi_scaled(-100.0) < 0


def test_erfi_overflow_guard():
    with pytest.raises(OverflowError):
        erfi(30.5)
    with pytest.raises(OverflowError):
        erfi(-27.0)


def test_nonconvergence_is_arithmetic_error():
    assert issubclass(NonConvergence, ArithmeticError)
