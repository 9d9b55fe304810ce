import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import IntegrationWarning

from sigmak.curvature import ConstantK, make_flat_pole_K, make_height_K, make_perturbation_K
from sigmak.geometry import ProblemParams
from sigmak.identities import (
    EuclideanView,
    H_euclidean,
    appendix_corollary_checks,
    balance_function,
    beta_integral_check,
    identity_suite,
    kazdan_warner_residual,
    mass_one_sided,
    mass_residual,
    pohozaev_residual,
    w_form_residual,
)
from sigmak.ode import degenerate_profile, integrate, standard_bubble

P72 = ProblemParams(7, 2)
P52 = ProblemParams(5, 2)


@pytest.fixture(autouse=True)
def _quiet_quad():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        yield


def test_pohozaev_on_bubble(params):
    b = standard_bubble(params, 1.4)
    for kind in ("H", "Hbar"):
        rep = pohozaev_residual(b, ConstantK(1.0), -10.0, 10.0, kind)
        assert rep.abs_residual < 1e-9


def test_pohozaev_span_check():
    prof = integrate(P72, ConstantK(1.0), standard_bubble(P72).state(-5.0), 5.0)
    with pytest.raises(ValueError):
        pohozaev_residual(prof, ConstantK(1.0), -6.0, 0.0)


def test_mass_on_bubble(params):
    b = standard_bubble(params, 1.0)
    K = ConstantK(1.0)
    rep = mass_residual(b, K, -20.0, 0.0)
    assert rep.abs_residual < 1e-9 * max(1.0, abs(rep.lhs))
    one = mass_one_sided(b, K, 0.0, t_lo=-40.0)
    assert abs(one.residual) <= one.quad_error + 1e-9 * abs(one.lhs)


@pytest.mark.parametrize("bc", [(-1.0, 0.0), (-1.0, 1.0), (-0.3, 0.2), (0.5, -0.5)])
def test_mbc_family_on_bubble(bc):
    b = standard_bubble(P72, 0.7)
    rep = mass_residual(b, ConstantK(1.0), -6.0, 6.0, b=bc[0], c=bc[1])
    assert abs(rep.residual) < 1e-9 * max(1.0, abs(rep.lhs), abs(rep.rhs))


def test_mbc_pohozaev_member_is_constant_on_bubble():
    # with (b, c) = (-1, 0) the member is a multiple of the first Hbar term; on the bubble
    # its variation must match the integral just as the Pohozaev report does
    b = standard_bubble(P72, 1.0)
    poh = pohozaev_residual(b, ConstantK(1.0), -3.0, 3.0, "Hbar")
    mb = mass_residual(b, ConstantK(1.0), -3.0, 3.0, b=-1.0, c=0.0)
    assert abs(poh.residual) < 1e-12 and abs(mb.residual) < 1e-12 * max(1.0, abs(mb.lhs))


def test_mass_on_degenerate_profile():
    d = degenerate_profile(P72, 2.0, 1.0)
    rep = mass_residual(d, ConstantK(1.0), -3.0, 3.0)
    assert rep.rhs == pytest.approx(0.0, abs=1e-14)
    assert abs(rep.lhs) < 1e-12


def test_identity_suite_passes():
    K = make_flat_pole_K(1.0, 0.5, 3.0, 1.0, 0.5, 3.0)
    res = identity_suite(P72, K)
    assert res["exact_max"] < 1e-8
    assert res["scaling_ok"] and res["passed"]
    assert len(res["reports"]) == 5 + 4 * 3


def test_beta_integral_against_quadrature():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a = rng.uniform(0.1, 20.0)
        b = rng.uniform(0.02, 1.98) * a
        assert beta_integral_check(a, b)["rel_err"] < 1e-10


def test_corollary_values():
    for n in (4.0, 7.0, 9.5):
        for row in appendix_corollary_checks(n, betas=(-2.0, 0.0, 1.5)):
            assert row["rel_err"] < 1e-10
    with pytest.raises(ValueError):
        appendix_corollary_checks(4.0, betas=(4.0,))


def test_kazdan_warner_constant_K():
    b = standard_bubble(P72, 1.0)
    rep = kazdan_warner_residual(b, ConstantK(1.0), r_range=(math.exp(-30), math.exp(30)))
    assert rep.integral == 0.0 and rep.H_euc_max_err < 1e-12


def test_round_solution_has_zero_euclidean_pohozaev():
    b = standard_bubble(P72, 1.0)
    view = EuclideanView(b)
    r = np.logspace(-2, 2, 9)
    H = H_euclidean(P72, ConstantK(1.0), r, view.u(r), view.du(r))
    scale = r**P72.n * view.u(r) ** (2 * P72.n / (P72.n - 2))
    assert np.max(np.abs(H) / scale) < 1e-12


@given(st.floats(-5.0, 5.0))
def test_kazdan_warner_monotone_obstruction(shift):
    # any positive trial profile against a strictly increasing K gives a one-signed integral
    b = standard_bubble(P72, math.exp(shift))
    rep = kazdan_warner_residual(b, make_height_K(2.0, 0.5), r_range=(math.exp(-40), math.exp(40)),
                                 check_points=0)
    assert rep.integral > 1e-3 and rep.relative == pytest.approx(1.0, abs=1e-12)


def test_balance_function():
    assert abs(balance_function(ConstantK(3.0), 1.0, P72)) < 1e-12
    assert abs(balance_function(ConstantK(3.0), 2.5, P72)) < 1e-12
    even = make_flat_pole_K(1.0, 0.5, 3.0, 1.0, 0.5, 3.0)
    assert abs(balance_function(even, 1.0, P72)) < 1e-12
    sharp = make_perturbation_K(ConstantK(1.0), 1.0, 3, 0.0)
    assert abs(balance_function(sharp, 1.0, P72)) < 1e-12
    vals = [balance_function(sharp, s, P72) for s in (1.1, 1.5, 2.0)]
    assert max(vals) > 0
    with pytest.raises(ValueError):
        balance_function(sharp, 0.0, P72)


@pytest.mark.parametrize("r", [0.1, 0.5, 1.0, 3.0, 10.0])
def test_w_form_on_round_solution(r):
    b = standard_bubble(P72, 1.0)
    rep = w_form_residual(b, ConstantK(1.0), r)
    assert abs(rep.residual) < 1e-8
    assert rep.meta["E"] > 0
    assert abs(rep.meta["Ek_consistency"]) < 1e-8


def test_w_form_flat_at_origin():
    view = EuclideanView(standard_bubble(P52, 1.0))
    _, dw, _ = view.w_derivs(1e-6)
    assert abs(float(dw)) < 1e-5
