import math
import warnings

import numpy as np
import pytest

from sigmak.curvature import ConstantK, make_flat_pole_K, make_height_K, make_noncompact_K
from sigmak.geometry import ProblemParams
from sigmak.solvers import (
    EvenProfile,
    GreenSolver,
    NoSignChange,
    PanelCheb,
    count_sign_changes,
    find_global_solution,
    nonexistence_scan,
    shoot,
    solve_noncompact_bvp,
)
from sigmak.specfun import logcosh

P72 = ProblemParams(7, 2)
P92 = ProblemParams(9, 2)


@pytest.mark.parametrize("lam", [0.05, 1.0, 20.0])
def test_round_family_has_no_defect(lam):
    K = ConstantK(P72.K_round)
    r = shoot(P72, K, lam)
    assert r.reached_end and abs(r.far_field_defect) < 1e-8


def test_constant_K_returns_immediately():
    r = find_global_solution(P72, ConstantK(2.0), (0.5, 2.0))
    assert r.lam == pytest.approx(1.0) and r.reached_end


def test_flat_pole_defect_changes_sign():
    K = make_flat_pole_K(1.0, 0.5, 3.0, 1.0, 0.5, 3.0)
    lo, hi = shoot(P72, K, 0.1, tol=1e-9), shoot(P72, K, 10.0, tol=1e-9)
    assert lo.sign * hi.sign < 0


def test_monotone_K_has_no_solution():
    K = make_height_K(2.0, 0.5)
    with pytest.raises(NoSignChange):
        find_global_solution(P72, K, (1e-3, 1e3), tol=1e-9)


def test_panel_chebyshev_integral():
    pc = PanelCheb(np.linspace(-10, 0, 21), 20)
    F = pc.cumulative(np.exp(2 * pc.nodes))
    s = np.linspace(-10, 0, 57)
    assert np.allclose(F(s), 0.5 * (np.exp(2 * s) - math.exp(-20)), rtol=1e-13, atol=1e-300)
    f = pc.interpolant(np.sin(pc.nodes))
    assert np.max(np.abs(f(s) - np.sin(s))) < 1e-13


@pytest.mark.parametrize("n", [7, 9, 11])
def test_green_homogeneous_solutions(n):
    g = GreenSolver(n, 2.0)
    t = np.linspace(-20, -0.05, 400)
    p1, d1 = g.phi1(t)
    d2 = -2 * np.tanh(t) / np.cosh(t) ** 2
    assert np.max(np.abs(g.L(t, p1, d1, d2))) < 1e-11
    # phi2: check L via differences of its exact derivative, relative to its size
    h = 1e-5
    p2, dp2 = g.phi2(t)
    d2p2 = (g.phi2(t + h)[1] - g.phi2(t - h)[1]) / (2 * h)
    scale = np.abs(d2p2) + (n - 2) * np.abs(dp2) + n * np.abs(p2) / np.cosh(t) ** 2
    assert np.max(np.abs(g.L(t, p2, dp2, d2p2)) / scale) < 1e-8
    # Wronskian phi1 phi2' - phi1' phi2 = cosh^{n-2}
    W = p1 * dp2 - d1 * p2
    assert np.allclose(W, np.cosh(t) ** (n - 2), rtol=1e-10)


@pytest.mark.parametrize("beta", [2.0, 3.0])
def test_green_inverse(beta):
    n = 9
    g = GreenSolver(n, beta)
    zeta = lambda s: np.exp((2 + beta) * s)
    phi, dphi = g.solve(zeta(g.nodes))
    s = np.linspace(g.t_min + 1, -0.1, 300)
    h = 1e-5
    d2 = (dphi(s + h) - dphi(s - h)) / (2 * h)
    res = g.L(s, phi(s), dphi(s), d2) - zeta(s)
    assert np.max(np.abs(res) / zeta(s)) < 1e-8


def test_zero_eps_gives_logcosh():
    sol = solve_noncompact_bvp(P92, 0.0, 2.0, 6.0)
    assert np.max(np.abs(sol.eta.eta)) == 0.0
    t = np.linspace(-5.5, 0, 23)
    assert np.max(np.abs(sol.profile.xi(t) - logcosh(t + 6.0))) < 1e-10


def test_eta_norm_linear_in_eps():
    eps = np.array([1e-5, 1e-4, 1e-3])
    norms = np.array([solve_noncompact_bvp(P92, e, 2.0, 5.0).eta.norm for e in eps])
    slope = np.polyfit(np.log(eps), np.log(norms), 1)[0]
    assert slope == pytest.approx(1.0, abs=0.01)


def test_noncompact_solution_residuals():
    sol = solve_noncompact_bvp(P92, 1e-3, 2.0, 12.0)
    assert sol.newton_log[-1]["relative"] < 1e-13
    split = sol.handoff - sol.T
    # weighted part: F_k from eta and its derivatives
    left = sol.left()
    t = np.linspace(-30, split - 1e-6, 200)
    K = sol.K.K(t)
    assert np.max(np.abs(left.Fk(t) - K) / K) < 1e-10
    # integrated part, up to t = 0
    assert np.max(sol.profile.residual(np.linspace(split, 0.0, 2001))) < 1e-10
    even = EvenProfile(left)
    tt = np.linspace(0.1, 30, 60)
    assert np.array_equal(even.xi(tt), even.xi(-tt))
    assert np.array_equal(even.psi(tt), -even.psi(-tt))
    far = tt[tt > -split]
    assert np.max(np.abs(even.Fk(far) - sol.K.K(far)) / sol.K.K(far)) < 1e-10


def test_noncompact_needs_threshold_beta():
    with pytest.raises(ValueError):
        solve_noncompact_bvp(P92, 1e-3, 3.0, 5.0)
    with pytest.raises(ValueError):
        solve_noncompact_bvp(P92, 1e-3, 2.0, 0.5)


def test_count_sign_changes():
    assert count_sign_changes([1, 2, -1, 0, -3, 4]) == 2
    assert count_sign_changes([0, 0]) == 0


def test_nonexistence_scan_small_grid():
    p = ProblemParams(7, 2)
    with pytest.raises(ValueError):
        nonexistence_scan(p, 1e-12, 5.0, 6.0, 6.0)
    eps = 1e-12 * math.exp(-11 * 6.0)
    rep = nonexistence_scan(p, eps, 6.0, 2.0, 2.0, lambda_grid=np.logspace(-2, 2, 6))
    assert not rep.sign_change and rep.verdict == "no sign change detected"
    assert len(rep.defects) == 6
