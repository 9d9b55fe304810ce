"""Global solutions: shooting, the weighted-space Newton construction and sweeps.

Shooting starts on a standard bubble deep in the south tail and integrates
towards the north pole; the Pohozaev quantity H at the far end is the
defect, zero exactly for a global solution.  H < 0 sends the trajectory into
a finite-time collapse (w -> -inf), H > 0 into bounded oscillation, so the
sign of the defect is robust even when its size is not.

The non-compact family is built on the left half line in the variable
s = t + T centred on the first bubble: eta = xi - ln cosh s solves
A[eta] = rhs with A = L + N, L the linearisation at the bubble.  A chord
(simplified Newton) iteration eta <- G[rhs - N(eta)] uses the explicit
Green operator G of L, discretised with Chebyshev interpolation so the
cumulative integrals are spectrally accurate.  The result is handed to the
ODE integrator, which carries the trajectory to t = 0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.optimize import brentq

from .curvature import CurvatureModel, NoncompactK, make_noncompact_K, make_nonexistence_K
from .geometry import ProblemParams
from .ode import (
    SOLVER_CONE_GUARD,
    CylProfile,
    CylState,
    Event,
    _Trajectory,
    eval_Fk,
    integrate,
    standard_bubble,
)
from .specfun import logcosh

__all__ = [
    "ShootResult",
    "NoSignChange",
    "NewtonDivergence",
    "shoot",
    "find_global_solution",
    "solution_checks",
    "trusted_end",
    "nonexistence_scan",
    "NonexistenceReport",
    "GreenSolver",
    "WeightedFunction",
    "NoncompactSolution",
    "solve_noncompact_bvp",
    "continuation_in_T",
    "ContinuationResult",
    "EvenProfile",
    "count_sign_changes",
]

SHOOT_TOL = 1e-11


class NoSignChange(RuntimeError):
    """The defect keeps one sign over the bracket."""


class NewtonDivergence(RuntimeError):
    """The chord iteration failed to reduce the residual."""


# shooting --------------------------------------------------------------------

@dataclass
class ShootResult:
    lam: float
    profile: CylProfile
    far_field_defect: float  # H at the last point reached
    normalized_defect: float  # expm1(w) = H / (K e^{-n xi}) there
    termination: Event | None
    t_start: float
    t_end: float

    @property
    def sign(self) -> int:
        return int(np.sign(self.far_field_defect))

    @property
    def reached_end(self) -> bool:
        return self.termination is None

    def as_dict(self) -> dict:
        return {"lambda": self.lam, "far_field_defect": self.far_field_defect,
                "normalized_defect": self.normalized_defect,
                "termination": None if self.termination is None else self.termination.as_dict(),
                "t_start": self.t_start, "t_end": self.t_end, "nfev": self.profile.stats["nfev"]}


def shoot(params: ProblemParams, K: CurvatureModel, lam: float, t_start: float | None = None,
          t_end: float | None = None, tol: float = SHOOT_TOL) -> ShootResult:
    """Start on the bubble of scale ``lam`` for K(-inf) and integrate towards +inf."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    ll = math.log(lam)
    if t_start is None:
        t_start = -ll - 30.0
    if t_end is None:
        t_end = max(-ll, 0.0) + 12.0
    K0 = K.K_south
    st = standard_bubble(params, lam, K0).state(t_start)
    # w of the bubble is 0 relative to K0; re-reference it to K(t_start)
    w0 = math.log(K0) - float(K.logK(t_start))
    prof = integrate(params, K, st, t_end, tol=tol, cone_guard=SOLVER_CONE_GUARD, w0=w0)
    t_last = prof.t_span[1]
    H = float(prof.H_precise(t_last))
    nd = float(np.expm1(prof.w(t_last)))
    return ShootResult(lam, prof, H, nd, prof.terminal_event(), t_start, t_last)


def find_global_solution(params: ProblemParams, K: CurvatureModel, lambda_bracket,
                         tol: float = SHOOT_TOL, t_end: float | None = None,
                         max_iter: int = 200) -> ShootResult:
    """Bisection in ln(lambda) on the sign of the far-field defect."""
    lo, hi = sorted(float(x) for x in lambda_bracket)
    if K.is_constant:
        return shoot(params, K, math.sqrt(lo * hi), tol=tol, t_end=t_end)
    r_lo = shoot(params, K, lo, tol=tol, t_end=t_end)
    r_hi = shoot(params, K, hi, tol=tol, t_end=t_end)
    if r_lo.sign * r_hi.sign > 0:
        raise NoSignChange(f"defect has one sign on [{lo}, {hi}]: "
                           f"{r_lo.far_field_defect:.3e}, {r_hi.far_field_defect:.3e}")
    a, b = math.log(lo), math.log(hi)
    for _ in range(max_iter):
        if r_lo.far_field_defect == 0.0 or r_hi.far_field_defect == 0.0:
            break
        mid = 0.5 * (a + b)
        if not a < mid < b:
            break
        r_mid = shoot(params, K, math.exp(mid), tol=tol, t_end=t_end)
        if r_mid.sign == r_lo.sign:
            a, r_lo = mid, r_mid
        else:
            b, r_hi = mid, r_mid
        if b - a < 4e-16 * max(1.0, abs(a)):
            break
    cands = [r for r in (r_lo, r_hi) if r.reached_end] or [r_lo, r_hi]
    return min(cands, key=lambda r: abs(r.far_field_defect))


def trusted_end(result: ShootResult, rel: float = 1e-6, samples: int = 8001) -> float:
    """Last time at which the leftover defect is negligible against the local scale.

    A shot with final defect H_f follows the true solution as long as
    |H_f| is small next to K e^{-n xi}; past that point the growing mode
    of the north tail takes over.
    """
    prof = result.profile
    a, b = prof.t_span
    Hf = abs(result.far_field_defect)
    if Hf == 0.0:
        return float(b)
    tt = np.linspace(a, b, samples)
    scale = np.asarray(prof.K.K(tt)) * np.exp(-prof.params.n * prof.xi(tt))
    # the south tail is exact by construction; only look north of the peak
    peak = int(np.argmax(scale))
    bad = np.nonzero(Hf > rel * scale)[0]
    bad = bad[bad > peak]
    return float(tt[bad[0] - 1]) if len(bad) else float(b)


def solution_checks(result: ShootResult, K: CurvatureModel, t_range=None) -> dict:
    """ODE, Pohozaev and Kazdan-Warner residuals of a shooting solution on its trusted interval."""
    from scipy.integrate import IntegrationWarning

    from .identities import kazdan_warner_residual, pohozaev_residual

    prof = result.profile
    if t_range is None:
        t_range = (prof.t_span[0], trusted_end(result))
    a, b = t_range
    tt = np.linspace(a + 1e-3, b - 1e-3, 4001)
    ode_c = float(np.max(prof.residual(tt)))
    ode_fd = float(np.max(prof.residual(tt, method="fd")))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        poh = pohozaev_residual(prof, K, a, b)
        kw = kazdan_warner_residual(prof, K, r_range=(math.exp(a), math.exp(b)), check_points=0)
    return {"interval": [a, b], "ode_residual": ode_c, "ode_residual_fd": ode_fd,
            "pohozaev_residual": abs(poh.residual), "kazdan_warner": kw.integral,
            "kazdan_warner_abs": abs(kw.integral), "kazdan_warner_relative": kw.relative}


# non-existence scan --------------------------------------------------------------

@dataclass
class NonexistenceReport:
    lambdas: list
    defects: list
    normalized: list
    terminations: list
    signs: list
    sign_change: bool
    verdict: str
    guard_ok: bool
    guard_max_jump: float
    params: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def nonexistence_scan(params: ProblemParams, eps: float, T: float, beta1: float, beta2: float,
                      lambda_grid=None, tol: float = 1e-9, K: CurvatureModel | None = None,
                      guard_jump: float = 1.0, **smoothing) -> NonexistenceReport:
    """Shoot over a lambda grid for the non-existence family and report the sign pattern.

    The continuity guard looks at ln|H| as a function of ln(lambda): across
    a smooth single-signed stretch it is close to linear, so a second
    difference above ``guard_jump`` flags a grid too coarse to rule out a
    pair of nearby roots.  A single-signed defect supports, but does not
    prove, non-existence.
    """
    if 1.0 / beta1 + 1.0 / beta2 < 2.0 / params.gap:
        raise ValueError("need 1/beta1 + 1/beta2 >= 2/(n-2k)")
    if K is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            K = make_nonexistence_K(eps, T, beta1, beta2, params=params, **smoothing)
    if lambda_grid is None:
        lambda_grid = np.logspace(-4, 4, 60)
    lams = [float(x) for x in lambda_grid]
    res = [shoot(params, K, lam, t_end=T + 13.0, tol=tol) for lam in lams]
    H = [r.far_field_defect for r in res]
    nd = [r.normalized_defect for r in res]
    signs = [int(np.sign(h)) for h in H]
    change = len(set(s for s in signs if s != 0)) > 1
    logs = np.log(np.abs(np.asarray(H)) + 1e-300)
    d2 = np.abs(np.diff(logs, 2)) if len(logs) > 2 else np.zeros(1)
    max_jump = float(np.max(d2))
    guard = max_jump < guard_jump
    verdict = "sign change detected" if change else "no sign change detected"
    return NonexistenceReport(lams, H, nd, [None if r.termination is None else r.termination.kind for r in res],
                              signs, change, verdict, guard, max_jump,
                              {"n": params.n, "k": params.k, "eps": eps, "T": T,
                               "beta1": beta1, "beta2": beta2})


# Green operator of the linearisation -----------------------------------------------

def _int_cosh_power(m: int, a: float, s):
    """int_a^s cosh^m, by expanding cosh^m in exponentials (all terms share a sign for s < a)."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    for j in range(m + 1):
        coef = math.comb(m, j) / 2.0**m
        e = m - 2 * j
        if e == 0:
            out += coef * (s - a)
        else:
            out += coef * (np.exp(e * s) - math.exp(e * a)) / e
    return out


class PanelCheb:
    """Piecewise Chebyshev interpolant on fixed panels with a cumulative integral.

    Short panels keep the integral accurate relative to the local size of the
    integrand, which matters here because the Green kernel multiplies it by
    a solution growing like e^{(n-2)|t|}.
    """

    def __init__(self, breaks, degree: int):
        self.breaks = np.asarray(breaks, dtype=float)
        self.degree = int(degree)
        x = C.chebpts1(self.degree + 1)
        self._x = x
        self._vinv = np.linalg.inv(C.chebvander(x, self.degree))
        a, b = self.breaks[:-1], self.breaks[1:]
        self._half = 0.5 * (b - a)
        self._mid = 0.5 * (a + b)
        self.nodes = (self._mid[:, None] + self._half[:, None] * x[None, :]).ravel()

    def _coef(self, values):
        v = np.asarray(values, dtype=float).reshape(len(self._half), self.degree + 1)
        return v @ self._vinv.T

    def _locate(self, s):
        s = np.asarray(s, dtype=float)
        i = np.clip(np.searchsorted(self.breaks, s, side="right") - 1, 0, len(self._half) - 1)
        return i, (s - self._mid[i]) / self._half[i]

    def interpolant(self, values):
        coef = self._coef(values)

        def f(s):
            i, u = self._locate(s)
            return _chebval_rows(u, coef[i])

        return f

    def cumulative(self, values):
        """Antiderivative vanishing at the left end of the first panel."""
        coef = self._coef(values)
        anti = np.stack([C.chebint(c_, lbnd=-1) for c_ in coef]) * self._half[:, None]
        totals = C.chebval(1.0, anti.T)
        offs = np.concatenate([[0.0], np.cumsum(totals)[:-1]])

        def F(s):
            i, u = self._locate(s)
            return offs[i] + _chebval_rows(u, anti[i])

        return F


def _chebval_rows(u, coefs):
    """Row-wise Chebyshev sums: coefs[j] evaluated at u[j]."""
    u = np.asarray(u, dtype=float)
    coefs = np.asarray(coefs)
    b1 = np.zeros_like(u)
    b2 = np.zeros_like(u)
    for j in range(coefs.shape[-1] - 1, 0, -1):
        b1, b2 = 2.0 * u * b1 - b2 + coefs[..., j], b1
    return u * b1 - b2 + coefs[..., 0]


class GreenSolver:
    """Solutions of L[phi] = zeta on [t_min, t_max] vanishing to high order at -inf.

    L[phi] = phi'' - (n-2) tanh(t) phi' + n sech^2(t) phi, with fundamental
    solutions phi1 = tanh and phi2 = tanh(t) int_{-1}^t cosh^n / sinh^2, Wronskian
    cosh^{n-2}.  Integrals start at t_min, where the weight e^{(2+beta)t}
    has fallen below ``trunc``.
    """

    def __init__(self, n: int, beta: float, trunc: float = 1e-14, degree: int = 24,
                 panel: float = 0.5, t_max: float = 0.0):
        self.n, self.beta = n, float(beta)
        self.t_min = math.log(trunc) / (2.0 + beta)
        self.t_max = float(t_max)
        m = max(1, int(math.ceil((self.t_max - self.t_min) / panel)))
        self.cheb = PanelCheb(np.linspace(self.t_min, self.t_max, m + 1), degree)
        self.nodes = self.cheb.nodes
        self._c0 = math.cosh(-1.0) ** (n - 1) / math.sinh(-1.0)

    def phi1(self, t):
        t = np.asarray(t, dtype=float)
        return np.tanh(t), 1.0 / np.cosh(t) ** 2

    def phi2(self, t):
        n = self.n
        t = np.asarray(t, dtype=float)
        ch, th = np.cosh(t), np.tanh(t)
        bracket = self._c0 + (n - 1) * _int_cosh_power(n - 2, -1.0, t)
        p = -ch ** (n - 2) + th * bracket
        dp = -(n - 2) * ch ** (n - 3) * np.sinh(t) + bracket / ch**2 + th * (n - 1) * ch ** (n - 2)
        return p, dp

    def L(self, t, phi, dphi, d2phi):
        t = np.asarray(t, dtype=float)
        return d2phi - (self.n - 2) * np.tanh(t) * dphi + self.n * phi / np.cosh(t) ** 2

    def interpolant(self, values):
        return self.cheb.interpolant(values)

    def solve(self, zeta_nodes):
        """Return callables phi(t), phi'(t) for zeta sampled at ``nodes``."""
        t = self.nodes
        p1, _ = self.phi1(t)
        p2, _ = self.phi2(t)
        W = np.cosh(t) ** (self.n - 2)
        I1 = self.cheb.cumulative(zeta_nodes * p1 / W)
        I2 = self.cheb.cumulative(zeta_nodes * p2 / W)

        def phi(s):
            s = np.asarray(s, dtype=float)
            a1, _ = self.phi1(s)
            a2, _ = self.phi2(s)
            return -a1 * I2(s) + a2 * I1(s)

        def dphi(s):
            s = np.asarray(s, dtype=float)
            _, b1 = self.phi1(s)
            _, b2 = self.phi2(s)
            return -b1 * I2(s) + b2 * I1(s)

        return phi, dphi


# weighted-space construction ---------------------------------------------------------

@dataclass
class WeightedFunction:
    """eta on [t_min, t_max] with its first two derivatives and X_2 norm."""

    grid: np.ndarray
    eta: np.ndarray
    deta: np.ndarray
    d2eta: np.ndarray
    beta: float
    norm: float
    _phi: object = field(repr=False, default=None)
    _dphi: object = field(repr=False, default=None)
    _zeta: object = field(repr=False, default=None)
    _n: int = 0

    def __call__(self, s):
        return self._phi(s)

    def derivative(self, s):
        return self._dphi(s)

    def second_derivative(self, s):
        s = np.asarray(s, dtype=float)
        # from L[eta] = zeta
        return (self._zeta(s) + (self._n - 2) * np.tanh(s) * self._dphi(s)
                - self._n * self._phi(s) / np.cosh(s) ** 2)


def _bvals(s, deta):
    ch, sh = np.cosh(s), np.sinh(s)
    return -2.0 * ch * sh * deta - ch * ch * deta * deta


def _P(params, s, eta, deta, d2eta):
    """The full operator A[eta] written without cancellation."""
    n, k = params.n, params.k
    c = params.c
    ch = np.cosh(s)
    b = _bvals(s, deta)
    g = 2 * k * eta + (k - 1) * np.log1p(b)
    Q = n / (2 * k) + ch * ch * d2eta - 2 * c * ch * np.sinh(s) * deta - c * ch * ch * deta * deta
    return np.expm1(g) * Q / (ch * ch) + d2eta - 2 * c * np.tanh(s) * deta - c * deta * deta


def _N(params, s, eta, deta, d2eta, green: GreenSolver):
    return _P(params, s, eta, deta, d2eta) - green.L(s, eta, deta, d2eta)


def _weighted_sup(s, vals, beta):
    return float(np.max(np.exp(-(2.0 + beta) * s) * np.abs(vals)))


@dataclass
class NoncompactSolution:
    params: ProblemParams
    eps: float
    beta: float
    T: float
    K: NoncompactK
    eta: WeightedFunction
    profile: CylProfile  # original t from handoff - T to 0
    handoff: float  # in the bubble variable s
    newton_log: list
    rhs_scale: float

    @property
    def xidot0(self) -> float:
        return float(np.tanh(self.profile.psi(0.0)))

    @property
    def xiddot0(self) -> float:
        return float(self.profile.xiddot(0.0))

    def left(self) -> "LeftTrajectory":
        return LeftTrajectory(self)

    def critical_times(self):
        """Zeros of xi' on (-inf, 0]: one in the weighted part near s = 0 at most, the rest events."""
        out = []
        s = np.linspace(self.eta.grid[0], self.handoff, 4001)
        v = np.tanh(s) + self.eta.derivative(s)
        for i in np.nonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0)[0]:
            f = lambda x: math.tanh(x) + float(self.eta.derivative(x))
            out.append(brentq(f, s[i], s[i + 1], xtol=1e-14) - self.T)
        out += self.profile.critical_times()
        return out

    def counting(self) -> int:
        """m(T): number of zeros of xi' on (-inf, 0]."""
        return len(self.critical_times())

    def summary(self) -> dict:
        return {"T": self.T, "eps": self.eps, "beta": self.beta, "xidot0": self.xidot0,
                "xiddot0": self.xiddot0, "m": self.counting(), "eta_norm_X2": self.eta.norm,
                "newton_iterations": len(self.newton_log), "critical_times": self.critical_times()}


class LeftTrajectory(_Trajectory):
    """The full solution on (-inf, 0]: bubble plus eta left of the handoff, integrated beyond."""

    def __init__(self, sol: NoncompactSolution):
        self.sol = sol
        self.params = sol.params
        self.K = sol.K
        self.t_split = sol.handoff - sol.T
        self.t_span = (-math.inf, 0.0)
        self._smin = sol.eta.grid[0]

    def _split(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return t, t <= self.t_split

    def _eta_parts(self, s):
        s = np.asarray(s, dtype=float)
        inside = s >= self._smin
        e = np.where(inside, self.sol.eta(np.maximum(s, self._smin)), 0.0)
        de = np.where(inside, self.sol.eta.derivative(np.maximum(s, self._smin)), 0.0)
        return e, de

    def xi(self, t):
        t, left = self._split(t)
        out = np.empty_like(t)
        s = t[left] + self.sol.T
        e, _ = self._eta_parts(s)
        out[left] = logcosh(s) + e
        if np.any(~left):
            out[~left] = self.sol.profile.xi(t[~left])
        return out if out.size > 1 else float(out[0])

    def psi(self, t):
        t, left = self._split(t)
        out = np.empty_like(t)
        s = t[left] + self.sol.T
        _, de = self._eta_parts(s)
        # 1 + xi' = 2 expit(2s) + eta' keeps relative precision for s << 0
        one_plus = 2.0 / (1.0 + np.exp(-2.0 * s)) + de
        out[left] = np.where(s < 0, -0.5 * np.log((2.0 - one_plus) / one_plus), np.arctanh(np.tanh(s) + de))
        if np.any(~left):
            out[~left] = self.sol.profile.psi(t[~left])
        return out if out.size > 1 else float(out[0])

    def psidot(self, t):
        t, left = self._split(t)
        out = np.empty_like(t)
        if np.any(left):
            s = t[left] + self.sol.T
            inside = s >= self._smin
            e, de = self._eta_parts(s)
            d2 = np.where(inside, self.sol.eta.second_derivative(np.maximum(s, self._smin)), 0.0)
            xd = np.tanh(s) + de
            xdd = 1.0 / np.cosh(s) ** 2 + d2
            # psi' = xi'' / (1 - xi'^2) with 1 - xi'^2 = sech^2 s (1 + b)
            b = _bvals(s, de)
            out[left] = xdd * np.cosh(s) ** 2 / (1.0 + b)
            del xd
        if np.any(~left):
            out[~left] = self.sol.profile.psidot(t[~left])
        return out if out.size > 1 else float(out[0])


class EvenProfile(_Trajectory):
    """Even extension xi(-t) = xi(t) of a trajectory given on (-inf, 0]."""

    def __init__(self, left: _Trajectory):
        self.left = left
        self.params = left.params
        self.K = left.K
        self.t_span = (-math.inf, math.inf)

    def _fold(self, t):
        t = np.asarray(t, dtype=float)
        return -np.abs(t), np.where(t > 0, -1.0, 1.0)

    def xi(self, t):
        u, _ = self._fold(t)
        return self.left.xi(u)

    def psi(self, t):
        u, sg = self._fold(t)
        return sg * self.left.psi(u)

    def psidot(self, t):
        u, _ = self._fold(t)
        return self.left.psidot(u)


def solve_noncompact_bvp(params: ProblemParams, eps: float, beta: float, T: float,
                         handoff: float = -1.0, tol: float = 1e-12, newton_tol: float = 1e-15,
                         max_iter: int = 60, degree: int = 24, trunc: float = 1e-14,
                         allow_any_beta: bool = False, K: NoncompactK | None = None) -> NoncompactSolution:
    """Even-family member for one T: weighted-space solve on s <= 0, then ODE to t = 0."""
    if T < 1:
        raise ValueError("need T >= 1")
    if not -10.0 < handoff <= 0.0:
        raise ValueError("handoff must lie in (-10, 0]")
    if K is None:
        K = make_noncompact_K(params, eps, beta, allow_any_beta=allow_any_beta)
    n, k = params.n, params.k
    green = GreenSolver(n, beta, trunc=trunc, degree=degree)
    s = green.nodes
    scale = eps * math.exp(-beta * T)
    rhs = -params.A * scale * np.exp(beta * s) / np.cosh(s) ** 2

    def residual(phi, dphi, zeta_lin):
        eta, deta = phi(s), dphi(s)
        d2 = zeta_lin + (n - 2) * np.tanh(s) * deta - n * eta / np.cosh(s) ** 2
        R = _P(params, s, eta, deta, d2) - rhs
        return eta, deta, d2, _weighted_sup(s, R, beta)

    zeta = rhs.copy()
    phi, dphi = green.solve(zeta)
    eta, deta, d2, res = residual(phi, dphi, zeta)
    rhs_norm = max(_weighted_sup(s, rhs, beta), 1e-300)
    log = [{"iter": 0, "residual": res, "relative": res / rhs_norm, "damping": 1.0}]
    it = 0
    while res > newton_tol * rhs_norm and it < max_iter:
        it += 1
        target = rhs - _N(params, s, eta, deta, d2, green)
        alpha, accepted = 1.0, False
        for _ in range(9):  # the full step plus up to 8 halvings
            z_try = zeta + alpha * (target - zeta)
            p_try, dp_try = green.solve(z_try)
            e_t, de_t, d2_t, r_t = residual(p_try, dp_try, z_try)
            if r_t < res or r_t <= newton_tol * rhs_norm:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            if res <= 1e3 * newton_tol * rhs_norm:
                break  # at the rounding floor
            raise NewtonDivergence(f"no decrease after 8 halvings at iteration {it} (residual {res:.3e})")
        zeta, phi, dphi = z_try, p_try, dp_try
        eta, deta, d2 = e_t, de_t, d2_t
        log.append({"iter": it, "residual": r_t, "relative": r_t / rhs_norm, "damping": alpha})
        if r_t >= 0.999 * res and res <= 1e3 * newton_tol * rhs_norm:
            res = r_t
            break
        res = r_t
    zeta_poly = green.interpolant(zeta)
    norm = _weighted_sup(s, np.abs(eta) + np.abs(deta) + np.abs(d2), beta)
    wf = WeightedFunction(s, eta, deta, d2, beta, norm, phi, dphi, zeta_poly, n)
    # hand off at s = handoff, i.e. t = handoff - T
    sh = float(handoff)
    e0, de0 = float(phi(sh)), float(dphi(sh))
    b0 = float(_bvals(sh, de0))
    xi0 = float(logcosh(sh)) + e0
    psi0 = math.atanh(math.tanh(sh) + de0)
    # w = 2k (xi - ln cosh psi) - ln(K / K_round); every piece is small, no cancellation
    w0 = 2 * k * e0 + k * math.log1p(b0) - math.log1p(-scale * math.exp(beta * sh) / params.K_round)
    t0 = sh - T
    prof = integrate(params, K, CylState.from_rapidity(t0, xi0, psi0), 0.0, tol=tol,
                     cone_guard=SOLVER_CONE_GUARD, w0=w0)
    if prof.terminal_event() is not None:
        raise RuntimeError(f"trajectory terminated early: {prof.terminal_event().kind}")
    return NoncompactSolution(params, eps, beta, T, K, wf, prof, sh, log, scale)


def count_sign_changes(values) -> int:
    v = np.sign(np.asarray(values, dtype=float))
    v = v[v != 0]
    return int(np.sum(v[1:] != v[:-1]))


@dataclass
class ContinuationResult:
    T_grid: list
    xidot0: list
    counting: list
    roots: list  # dicts with T, xidot0, xiddot0, m, tangential flag
    monotone_ok: bool
    params: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def continuation_in_T(params: ProblemParams, eps: float, beta: float, T_range=(1.0, 40.0),
                      step: float = 0.5, root_tol: float = 1e-9, allow_any_beta: bool = False,
                      **solve_kw) -> ContinuationResult:
    """Sweep T, track xi'(0; T) and m(T), and refine every zero of xi'(0; T)."""
    K = make_noncompact_K(params, eps, beta, allow_any_beta=allow_any_beta)
    a, b = T_range
    if b - a < step:
        raise ValueError("T range too small to bracket a zero")
    Ts = list(np.arange(a, b + 0.5 * step, step))
    if Ts[-1] > b:
        Ts[-1] = b
    sols = [solve_noncompact_bvp(params, eps, beta, T, K=K, **solve_kw) for T in Ts]
    xd = [s_.xidot0 for s_ in sols]
    ms = [s_.counting() for s_ in sols]

    def f(T):
        return solve_noncompact_bvp(params, eps, beta, T, K=K, **solve_kw).xidot0

    roots = []
    for i in range(len(Ts) - 1):
        if xd[i] == 0.0:
            Tr = Ts[i]
        elif xd[i] * xd[i + 1] < 0:
            Tr = brentq(f, Ts[i], Ts[i + 1], xtol=1e-13, rtol=1e-15, maxiter=200)
        else:
            continue
        sol = solve_noncompact_bvp(params, eps, beta, Tr, K=K, **solve_kw)
        roots.append({"T": Tr, "xidot0": sol.xidot0, "xiddot0": sol.xiddot0, "m": sol.counting(),
                      "converged": abs(sol.xidot0) < root_tol,
                      "tangential": abs(sol.xiddot0) <= 1e-8})
    # m(T) may only step up, by at most one, between sweep points (one resolution step of slack)
    mono = all(ms[i + 1] >= ms[i] - 1 for i in range(len(ms) - 1)) and ms[-1] > ms[0]
    return ContinuationResult([float(t) for t in Ts], xd, ms, roots, mono,
                              {"n": params.n, "k": params.k, "eps": eps, "beta": beta})
