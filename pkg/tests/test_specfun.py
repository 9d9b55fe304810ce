import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sigmak.specfun import (
    beta_integral,
    gamma,
    lgamma,
    logcosh,
    one_minus_tanh,
    smoothstep,
    smoothstep_deriv,
    sphere_area,
)


@pytest.mark.parametrize("m", range(1, 21))
def test_gamma_factorials(m):
    assert gamma(m) == pytest.approx(math.factorial(m - 1), rel=1e-13)


@pytest.mark.parametrize("m", range(0, 12))
def test_gamma_half_integers(m):
    # Gamma(m + 1/2) = (2m)! sqrt(pi) / (4^m m!)
    ref = math.factorial(2 * m) * math.sqrt(math.pi) / (4**m * math.factorial(m))
    assert gamma(m + 0.5) == pytest.approx(ref, rel=1e-13)


@given(st.floats(-30.0, 150.0).filter(lambda x: abs(x - round(x)) > 1e-6 or x > 0))
def test_lgamma_matches_stdlib(x):
    assert lgamma(x) == pytest.approx(math.lgamma(x), rel=1e-13, abs=1e-13)


@pytest.mark.parametrize("x", [0.0, -1.0, -7.0])
def test_gamma_poles(x):
    with pytest.raises(ValueError):
        gamma(x)
    with pytest.raises(ValueError):
        lgamma(x)


def test_sphere_area():
    assert sphere_area(1) == pytest.approx(2 * math.pi, rel=1e-14)
    assert sphere_area(2) == pytest.approx(4 * math.pi, rel=1e-14)
    assert sphere_area(3) == pytest.approx(2 * math.pi**2, rel=1e-14)


def test_beta_integral_values():
    assert beta_integral(3, 4) == pytest.approx(0.25, rel=1e-14)
    assert beta_integral(2, 2) == pytest.approx(0.5, rel=1e-14)
    assert beta_integral(3, 4) == pytest.approx(0.25, rel=1e-14)
    n = 4
    assert beta_integral((n + 2) / 2, n) == pytest.approx(1 / n, rel=1e-14)


@pytest.mark.parametrize("a, b", [(1.0, 0.0), (1.0, 2.0), (1.0, -0.5)])
def test_beta_integral_domain(a, b):
    with pytest.raises(ValueError):
        beta_integral(a, b)


def test_logcosh_extremes():
    assert logcosh(0.0) == 0.0
    assert logcosh(1e-8) == pytest.approx(0.5e-16, rel=1e-12)
    assert logcosh(1000.0) == pytest.approx(1000.0 - math.log(2.0), rel=1e-15)
    x = np.linspace(-5, 5, 101)
    assert np.allclose(logcosh(x), np.log(np.cosh(x)), rtol=1e-14, atol=1e-16)


def test_one_minus_tanh_keeps_precision():
    assert one_minus_tanh(30.0) == pytest.approx(2 * math.exp(-60.0), rel=1e-12)


@given(st.floats(-0.5, 1.5))
def test_smoothstep_partition(x):
    s, r = smoothstep(x)
    assert 0.0 <= s <= 1.0 and s + r == pytest.approx(1.0, abs=1e-15)


def test_smoothstep_derivative():
    x = np.linspace(0.05, 0.95, 37)
    h = 1e-6
    fd = (smoothstep(x + h)[0] - smoothstep(x - h)[0]) / (2 * h)
    assert np.allclose(smoothstep_deriv(x), fd, rtol=1e-7, atol=1e-9)
    assert np.all(np.diff(smoothstep(np.linspace(0, 1, 200))[0]) >= 0)
