import cmath
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtrates.errors import BranchCutError
from qtrates.special import (EULER_GAMMA, ei_entire_part, exp_integral_ei,
                             exp_integral_ei_quadrature, exp_integral_ei_value,
                             log_gamma_arg, sine_integral, sine_integral_value)

mpmath.mp.dps = 30


def test_known_values():
    assert sine_integral(1.0) == pytest.approx(0.9460830703671830, abs=1e-15)
    assert exp_integral_ei(1.0).real == pytest.approx(1.8951178163559368, abs=1e-14)
    assert sine_integral(1e8) == pytest.approx(math.pi / 2, abs=1e-7)
    assert sine_integral(0.0) == 0.0


@pytest.mark.parametrize("x", [5e-324, 2.2250738585072014e-308, -1e-200])
def test_si_tiny_arguments_terminate(x):
    assert sine_integral(x) == x


@pytest.mark.parametrize("z", [0.5 + 0.5j, 2 + 10j, -3 + 0.1j, -20 - 40j, 30 + 1j,
                               1e-3 + 1e-3j, 0.2 - 60j, -1e-8 + 5j])
def test_ei_against_mpmath(z):
    ref = complex(mpmath.ei(z))
    assert abs(exp_integral_ei(z) - ref) <= 1e-12 * max(1.0, abs(ref))


@pytest.mark.parametrize("z", [1 + 1j, -5 + 3j, 4 - 2j, -0.5 - 30j])
def test_ei_quadrature_route_agrees(z):
    assert exp_integral_ei_quadrature(z) == pytest.approx(exp_integral_ei(z), abs=1e-10)


def test_ei_branch_cut_raises():
    with pytest.raises(BranchCutError):
        exp_integral_ei(-2.0)
    with pytest.raises(BranchCutError):
        exp_integral_ei(0.0)
    with pytest.raises(BranchCutError):
        exp_integral_ei_quadrature(3.0)


def test_ei_value_reports_method():
    assert exp_integral_ei_value(0.5 + 0.1j).method == "series"
    assert exp_integral_ei_value(-40 + 40j).method == "continued-fraction"


def test_entire_part_is_continuous_across_cut():
    above = ei_entire_part(complex(-4.0, 1e-12))
    below = ei_entire_part(complex(-4.0, -1e-12))
    assert abs(above - below) < 1e-10
    z = -4.0 + 2.0j
    assert ei_entire_part(z) == pytest.approx(exp_integral_ei(z) - EULER_GAMMA - cmath.log(z),
                                              abs=1e-12)


@pytest.mark.parametrize("x", [1e-6, 0.3, 2.0, 3.9, 4.1, 17.0, 250.0, -7.5])
def test_si_against_mpmath(x):
    assert sine_integral(x) == pytest.approx(float(mpmath.si(x)), abs=1e-14)


def test_si_vectorised():
    xs = np.array([-1.0, 0.0, 1.0, 50.0])
    np.testing.assert_allclose(sine_integral(xs), [float(mpmath.si(x)) for x in xs], atol=1e-14)
    assert sine_integral_value(5.0).error < 1e-13


@pytest.mark.parametrize("x", [0.01, 1.0, 5.0, 40.0, 1e3])
def test_log_gamma_arg_against_mpmath(x):
    ref = float(mpmath.im(mpmath.loggamma(1 + 1j * x)))
    assert log_gamma_arg(x) == pytest.approx(ref, abs=1e-12 * max(1.0, abs(ref)))


# -- properties ------------------------------------------------------------

finite = st.floats(min_value=-200, max_value=200, allow_nan=False)


@given(finite)
def test_si_is_odd_and_bounded(x):
    assert sine_integral(-x) == -sine_integral(x)
    assert abs(sine_integral(x)) <= 1.8519370519824662 + 1e-12  # Si(pi)


@settings(max_examples=60)
@given(st.floats(-60, 60), st.floats(0.01, 60))
def test_ei_conjugate_symmetry(re, im):
    z = complex(re, im)
    assert exp_integral_ei(z.conjugate()) == pytest.approx(exp_integral_ei(z).conjugate(),
                                                           rel=1e-12, abs=1e-300)


@given(st.floats(-500, 500))
def test_log_gamma_arg_is_odd(x):
    assert log_gamma_arg(-x) == pytest.approx(-log_gamma_arg(x), abs=1e-12)
