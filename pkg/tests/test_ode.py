import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sigmak.curvature import ConstantK, make_flat_pole_K
from sigmak.geometry import ProblemParams
from sigmak.ode import (
    ConeViolation,
    CylState,
    degenerate_profile,
    eval_Fk,
    eval_Fk_rapidity,
    eval_functional,
    functional_series,
    integrate,
    lambda_from_u0,
    ode_rhs,
    standard_bubble,
)
from sigmak.specfun import logcosh

P52 = ProblemParams(5, 2)
P72 = ProblemParams(7, 2)
P92 = ProblemParams(9, 2)


def test_Fk_hand_values():
    assert eval_Fk(P52, 0.0, 0.0, 0.0) == pytest.approx(0.5, rel=1e-15)
    t = np.linspace(-3, 3, 13)
    assert np.allclose(eval_Fk(P52, logcosh(t), np.tanh(t), 1 / np.cosh(t) ** 2), 2.5, rtol=1e-13)
    b = standard_bubble(P72, 3.0)
    assert float(b.Fk(-0.4)) == pytest.approx(1.0, abs=1e-12)
    assert ode_rhs(P92, 1.0, xi=0.0, xidot=0.0) == pytest.approx(-1.0, rel=1e-15)


def test_bubble_minimum():
    b = standard_bubble(P52)
    ref = 0.5 * math.log(2.0) - 0.25 * math.log(10.0)
    assert b.minimum == pytest.approx(ref, rel=1e-15)
    assert ref == pytest.approx(-0.2291, abs=5e-5)
    assert float(b.xi(0.0)) == pytest.approx(ref, rel=1e-15)


def test_degenerate_slope():
    d = degenerate_profile(P52, 3.0, 1.0)
    assert float(d.xidot(0.0)) == pytest.approx(0.5, rel=1e-15)
    assert np.max(np.abs(d.Fk(np.linspace(-20, 20, 81)))) < 1e-11
    with pytest.raises(ValueError):
        degenerate_profile(P52, 0.0, 0.0)


def test_cone_violation():
    with pytest.raises(ConeViolation):
        CylState(0.0, 0.0, 1.0)
    with pytest.raises(ConeViolation):
        eval_Fk(P52, 0.0, -1.0, 0.0)
    with pytest.raises(ValueError):
        ode_rhs(P52, -1.0, xi=0.0, xidot=0.0)


@st.composite
def states(draw):
    nk = draw(st.sampled_from([(5, 2), (7, 2), (7, 3), (9, 2), (11, 4)]))
    xi = draw(st.floats(-3.0, 3.0))
    xd = draw(st.floats(-0.999, 0.999))
    K = draw(st.floats(1e-3, 1e3))
    return ProblemParams(*nk), xi, xd, K


def _inverse_error(p, xi, xd, K):
    xdd = ode_rhs(p, K, xi=xi, xidot=xd)
    # xi'' + c (1 - xi'^2) cancels when the curvature term is small; scale by that condition number
    drive = p.A * K * np.exp(-2 * p.k * xi) * (1 - xd * xd) ** (1 - p.k)
    cond = (drive + p.c * (1 - xd * xd)) / drive
    return np.abs(eval_Fk(p, xi, xd, xdd) / K - 1.0) / cond


@given(states())
def test_rhs_inverts_operator(s):
    assert _inverse_error(*s) < 1e-13


def test_rhs_inverts_operator_bulk():
    rng = np.random.default_rng(7)
    for nk in [(5, 2), (7, 2), (7, 3), (9, 2)]:
        p = ProblemParams(*nk)
        m = 2500
        err = _inverse_error(p, rng.uniform(-3, 3, m), rng.uniform(-0.999, 0.999, m), 10 ** rng.uniform(-3, 3, m))
        assert np.max(err) < 1e-13


@given(states())
def test_critical_point_sign(s):
    p, xi, _, K = s
    # at a critical point xi'' < 0 below the threshold on e^{-2k xi} K
    lhs = math.exp(-2 * p.k * xi) * K
    thr = p.binom_n1k1 * (p.n - 2 * p.k) / (2**p.k * p.k)
    xdd = ode_rhs(p, K, xi=xi, xidot=0.0)
    if lhs < thr * (1 - 1e-12):
        assert xdd < 0
    elif lhs > thr * (1 + 1e-12):
        assert xdd > 0


@pytest.mark.parametrize("lam", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("K0", [0.5, 1.0, 4.0])
def test_bubble_solves_equation(params, lam, K0):
    b = standard_bubble(params, lam, K0)
    t = np.linspace(-20, 20, 2001) - math.log(lam)
    assert np.max(np.abs(b.Fk(t) - K0)) / K0 < 1e-11


def test_lambda_normalization():
    # the bubble with scale lam has u(0) recovered through the normalization
    for lam in (0.3, 2.0):
        b = standard_bubble(P72, lam, 2.0)
        t = -40.0
        log_u = -0.5 * (P72.n - 2) * (float(b.xi(t)) + t)  # u ~ const as r -> 0
        assert lambda_from_u0(P72, 2.0, math.exp(log_u)) == pytest.approx(lam, rel=1e-12)


def test_integrate_follows_bubble():
    lam = 2.0
    b = standard_bubble(P72, lam)
    prof = integrate(P72, ConstantK(1.0), b.state(-8.0), 8.0, tol=1e-12)
    assert abs(float(prof.xi(8.0)) - float(b.xi(8.0))) < 1e-8
    crit = prof.critical_times()
    assert len(crit) == 1 and crit[0] == pytest.approx(-math.log(lam), abs=1e-9)


def test_integrate_logcosh():
    prof = integrate(P52, ConstantK(2.5), CylState(-5.0, float(logcosh(-5.0)), math.tanh(-5.0)), 5.0, tol=1e-12)
    t = np.linspace(-5, 5, 201)
    assert np.max(np.abs(prof.xi(t) - logcosh(t))) < 1e-8


def test_standard_bubble_single_critical_point():
    b = standard_bubble(P92)
    prof = integrate(P92, ConstantK(1.0), b.state(-10.0), 10.0)
    crit = prof.critical_times()
    assert len(crit) == 1 and abs(crit[0]) < 1e-9


@pytest.mark.parametrize("tol", [1e-6, 1e-8, 1e-10])
def test_integrated_residual_scales(tol):
    K = make_flat_pole_K(1.0, 0.5, 3.0, 1.0, 0.5, 3.0)
    b = standard_bubble(P72, 0.5)
    prof = integrate(P72, K, b.state(-10.0), 4.0, tol=tol, w0=-float(K.logK(-10.0)))
    assert prof.terminal_event() is None
    assert np.max(prof.residual()) <= 10 * tol


def test_cone_event_terminates():
    prof = integrate(P52, ConstantK(1.0), CylState(0.0, 0.0, 0.99), 50.0)
    ev = prof.terminal_event()
    assert ev is not None and ev.kind in ("cone-boundary approach", "blow-down")


def test_functionals_on_bubble(params):
    b = standard_bubble(params, 1.7)
    t = np.linspace(-15, 15, 301)
    K = ConstantK(1.0)
    assert np.max(np.abs(functional_series("H", params, K, b, t).values)) < 1e-11
    assert np.max(np.abs(functional_series("Hbar", params, None, b, t).values)) < 1e-11
    m = eval_functional("m", params, None, b.state(-30.0))
    assert abs(m) < 1e-6


def test_mbc_relation_to_m(params):
    # with (b, c) = (-1, 1) the separable member equals m^2 / P, P = 2^{1-k} C(n,k) / n
    b = standard_bubble(params, 0.8)
    P = 2.0 ** (1 - params.k) * params.binom_nk / params.n
    for t in (-5.0, -1.0, 0.3, 2.0):
        st_ = b.state(t)
        m = eval_functional("m", params, None, st_)
        mbc = eval_functional("mbc", params, None, st_, b=-1, c=1)
        assert mbc == pytest.approx(m * m / P, rel=1e-13)


def test_mbc_minus_one_zero_is_hbar_shaped(params):
    # (b, c) = (-1, 0) gives P (1 - xi'^2)^k e^{(2k-n) xi}, the first term of Hbar up to the factor
    st_ = standard_bubble(params, 1.3).state(0.4)
    mbc = eval_functional("mbc", params, None, st_, b=-1, c=0)
    first = eval_functional("Hbar", params, None, st_) + math.exp(-params.n * st_.xi)
    P = 2.0 ** (1 - params.k) * params.binom_nk / params.n
    assert mbc == pytest.approx(first * P / params.K_round, rel=1e-13)


def test_rapidity_form_agrees():
    xi, xd, xdd = 0.3, 0.6, -0.2
    psi = math.atanh(xd)
    psid = xdd / (1 - xd * xd)
    assert eval_Fk_rapidity(P92, xi, psi, psid) == pytest.approx(eval_Fk(P92, xi, xd, xdd), rel=1e-14)
