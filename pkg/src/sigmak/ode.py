"""The radial sigma_k operator, its ODE, closed-form profiles and functionals.

In the cylindrical variable the equation reads F_k[xi] = K with

    F_k[xi] = 2^{1-k} C(n-1,k-1) e^{2k xi} (1 - xi'^2)^{k-1} (xi'' + c (1 - xi'^2)),

c = (n-2k)/(2k), and |xi'| < 1.  The integrator does not march (xi, xi')
directly.  It uses the rapidity psi = artanh(xi') and

    w = 2k (xi - ln cosh psi) - ln(K / K_round),   K_round = 2^{-k} C(n,k),

for which the equation becomes

    psi' = (1 + c) e^{-w} - c,
    w'   = n tanh(psi) (1 - e^{-w}) - K'/K,

and the Pohozaev quantity is H = K e^{-n xi} expm1(w).  The standard
bubbles are exactly w = 0, so deviations from them (which can be far below
machine epsilon relative to xi itself) are carried with full relative
precision.  xi is integrated alongside from xi' = tanh(psi) and is not
derived from w, which keeps the residual checks independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .curvature import ConstantK, CurvatureModel
from .geometry import ProblemParams
from .specfun import log_one_minus_tanh, log_one_plus_tanh, logcosh

__all__ = [
    "ConeViolation",
    "CylState",
    "Event",
    "eval_Fk",
    "eval_Fk_rapidity",
    "ode_rhs",
    "rapidity_rhs",
    "BubbleProfile",
    "DegenerateProfile",
    "CylProfile",
    "standard_bubble",
    "degenerate_profile",
    "integrate",
    "eval_functional",
    "functional_series",
    "FunctionalSeries",
    "lambda_from_u0",
    "cone_psi",
    "DEFAULT_TOL",
    "DEFAULT_CONE_GUARD",
    "SOLVER_CONE_GUARD",
]

DEFAULT_TOL = 1e-10
DEFAULT_CONE_GUARD = 1e-9
# solvers start deep in a bubble tail where 1 - |xi'| is ~1e-20 or smaller
SOLVER_CONE_GUARD = 1e-250
W_BLOWDOWN = 20.0  # psi' ~ e^{-w} > 1e8: finite-time collapse under way


class ConeViolation(ValueError):
    """|xi'| >= 1: the state left the admissible cone."""


def cone_psi(guard: float) -> float:
    """Rapidity at which 1 - |xi'| equals ``guard``."""
    return 0.5 * math.log((2.0 - guard) / guard)


def _as_curvature(K) -> CurvatureModel:
    if isinstance(K, CurvatureModel):
        return K
    return ConstantK(float(K))


@dataclass(frozen=True)
class CylState:
    """Point of a trajectory: t, xi, xi' and the rapidity psi = artanh(xi').

    Pass ``psi`` when |xi'| is too close to 1 for a double to hold 1 - |xi'|.
    """

    t: float
    xi: float
    xidot: float = float("nan")
    psi: float | None = None

    def __post_init__(self):
        if self.psi is None:
            if not abs(self.xidot) < 1.0:
                raise ConeViolation(f"|xi'| = {abs(self.xidot)} >= 1")
            object.__setattr__(self, "psi", math.atanh(self.xidot))
        else:
            object.__setattr__(self, "xidot", math.tanh(self.psi))
        if not (math.isfinite(self.t) and math.isfinite(self.xi) and math.isfinite(self.psi)):
            raise ValueError("state must be finite")

    @classmethod
    def from_rapidity(cls, t, xi, psi) -> "CylState":
        return cls(float(t), float(xi), psi=float(psi))

    def as_dict(self) -> dict:
        return {"t": self.t, "xi": self.xi, "xidot": self.xidot, "psi": self.psi}


@dataclass(frozen=True)
class Event:
    kind: str  # "critical point", "cone-boundary approach", "blow-down"
    t: float
    state: CylState

    def as_dict(self) -> dict:
        return {"kind": self.kind, "t": self.t, "state": self.state.as_dict()}


# operator and right-hand side -----------------------------------------------

def eval_Fk(params: ProblemParams, xi, xidot, xiddot):
    """F_k[xi] from (xi, xi', xi'') as displayed; requires |xi'| < 1."""
    xi, xd, xdd = (np.asarray(v, dtype=float) for v in (xi, xidot, xiddot))
    if np.any(np.abs(xd) >= 1.0):
        raise ConeViolation("|xi'| >= 1 in eval_Fk")
    k = params.k
    one_m = (1.0 - xd) * (1.0 + xd)
    pref = 2.0 ** (1 - k) * params.binom_n1k1
    val = pref * np.exp(2 * k * xi + (k - 1) * np.log1p(-xd * xd)) * (xdd + params.c * one_m)
    return val if val.ndim else float(val)


def eval_Fk_rapidity(params: ProblemParams, xi, psi, psidot):
    """F_k written with psi = artanh(xi'), so xi'' = psi' sech^2(psi).

    F_k = 2^{1-k} C(n-1,k-1) e^{2k (xi - ln cosh psi)} (psi' + c); exact to
    rounding for any |psi|.
    """
    xi, psi, psd = (np.asarray(v, dtype=float) for v in (xi, psi, psidot))
    k = params.k
    pref = 2.0 ** (1 - k) * params.binom_n1k1
    val = pref * np.exp(2 * k * (xi - logcosh(psi))) * (psd + params.c)
    return val if val.ndim else float(val)


def ode_rhs(params: ProblemParams, K_value, state=None, *, xi=None, xidot=None):
    """xi'' solving F_k[xi] = K at a state (CylState or xi=..., xidot=...)."""
    if state is not None:
        xi, xidot = state.xi, state.xidot
    xi, xd = np.asarray(xi, dtype=float), np.asarray(xidot, dtype=float)
    if np.any(np.abs(xd) >= 1.0):
        raise ConeViolation("|xi'| >= 1 in ode_rhs")
    if np.any(np.asarray(K_value) <= 0):
        raise ValueError("K must be positive")
    k = params.k
    l1 = np.log1p(-xd * xd)
    val = params.A * K_value * np.exp(-2 * k * xi + (1 - k) * l1) - params.c * (1.0 - xd) * (1.0 + xd)
    return val if val.ndim else float(val)


def rapidity_rhs(params: ProblemParams, K_value, xi, psi):
    """psi' = A K e^{2k(ln cosh psi - xi)} - c."""
    val = params.A * np.asarray(K_value) * np.exp(2 * params.k * (logcosh(psi) - np.asarray(xi))) - params.c
    return val if np.ndim(val) else float(val)


def lambda_from_u0(params: ProblemParams, K0: float, u0: float) -> float:
    """Concentration scale lambda = 2^{-1/2} C(n,k)^{-1/2k} K0^{1/2k} u0^{2/(n-2)}."""
    k, n = params.k, params.n
    return 2.0**-0.5 * params.binom_nk ** (-1.0 / (2 * k)) * K0 ** (1.0 / (2 * k)) * u0 ** (2.0 / (n - 2))


# profiles ------------------------------------------------------------------

class _Trajectory:
    """Common interface: xi, psi, xidot, psidot, xiddot as functions of t."""

    params: ProblemParams
    K: CurvatureModel | None = None
    t_span: tuple[float, float] = (-math.inf, math.inf)

    def xidot(self, t):
        return np.tanh(self.psi(t))

    def xiddot(self, t):
        p = self.psi(t)
        return self.psidot(t) * np.exp(-2.0 * logcosh(p))

    def Fk(self, t):
        return eval_Fk_rapidity(self.params, self.xi(t), self.psi(t), self.psidot(t))

    def state(self, t) -> CylState:
        return CylState.from_rapidity(t, float(self.xi(t)), float(self.psi(t)))

    def contains(self, t) -> bool:
        a, b = sorted(self.t_span)
        return a <= t <= b


class BubbleProfile(_Trajectory):
    """Xi(t + ln lambda) + (1/2k) ln K0 with Xi(t) = ln(2 cosh t) - ln(sqrt2 C(n,k)^{1/2k})."""

    def __init__(self, params: ProblemParams, lam: float = 1.0, K0: float = 1.0):
        if lam <= 0 or K0 <= 0:
            raise ValueError("lambda and K0 must be positive")
        self.params, self.lam, self.K0 = params, float(lam), float(K0)
        self.K = ConstantK(K0)
        self.shift = math.log(lam)
        k = params.k
        self.offset = (0.5 * math.log(2.0) - math.log(params.binom_nk) / (2 * k)
                       + math.log(K0) / (2 * k))

    def xi(self, t):
        return logcosh(np.asarray(t, dtype=float) + self.shift) + self.offset

    def psi(self, t):
        return np.asarray(t, dtype=float) + self.shift

    def psidot(self, t):
        return np.ones_like(np.asarray(t, dtype=float))

    @property
    def center(self) -> float:
        return -self.shift

    @property
    def minimum(self) -> float:
        return self.offset


class DegenerateProfile(_Trajectory):
    """xi = -(2k/(n-2k)) ln(a e^{-ct} + b e^{ct}); solves F_k = 0."""

    def __init__(self, params: ProblemParams, a: float, b: float):
        if a < 0 or b < 0 or a + b <= 0:
            raise ValueError("need a, b >= 0 with a + b > 0")
        self.params, self.a, self.b = params, float(a), float(b)
        self.K = None
        c = params.c
        self.c = c
        self._la = math.log(a) if a > 0 else -math.inf
        self._lb = math.log(b) if b > 0 else -math.inf

    def xi(self, t):
        t = np.asarray(t, dtype=float)
        return -np.logaddexp(self._la - self.c * t, self._lb + self.c * t) / self.c

    def psi(self, t):
        t = np.asarray(t, dtype=float)
        return 0.5 * (self._la - self._lb) - self.c * t

    def psidot(self, t):
        return np.full_like(np.asarray(t, dtype=float), -self.c)

    def xidot(self, t):
        t = np.asarray(t, dtype=float)
        if self.a == 0:
            return -np.ones_like(t)
        if self.b == 0:
            return np.ones_like(t)
        return np.tanh(self.psi(t))

    def Fk(self, t):
        # (1 - xi'^2)^{k-1} and psi' + c both vanish identically
        t = np.asarray(t, dtype=float)
        if self.a == 0 or self.b == 0:
            return np.zeros_like(t)
        return eval_Fk_rapidity(self.params, self.xi(t), self.psi(t), self.psidot(t))


def standard_bubble(params: ProblemParams, lam: float = 1.0, K0: float = 1.0) -> BubbleProfile:
    return BubbleProfile(params, lam, K0)


def degenerate_profile(params: ProblemParams, a: float, b: float) -> DegenerateProfile:
    return DegenerateProfile(params, a, b)


class CylProfile(_Trajectory):
    """Integrated trajectory with dense output in (psi, w, xi)."""

    def __init__(self, params, K, sol, t, y, events, stats, status, message, tol):
        self.params, self.K = params, K
        self._sol = sol
        self.grid = np.asarray(t)
        self.y = np.asarray(y)
        self.events = events
        self.stats = stats
        self.status = status
        self.message = message
        self.tol = tol
        self.t_span = (float(self.grid[0]), float(self.grid[-1]))

    # dense evaluation
    def _y(self, t):
        return self._sol(np.asarray(t, dtype=float))

    def psi(self, t):
        return self._y(t)[0]

    def w(self, t):
        return self._y(t)[1]

    def xi(self, t):
        return self._y(t)[2]

    def psidot(self, t):
        w = self.w(t)
        return (1.0 + self.params.c) * np.exp(-w) - self.params.c

    def xi_from_w(self, t):
        """xi reconstructed from (psi, w); carries the sub-ulp bubble deviation."""
        y = self._y(t)
        k = self.params.k
        return (y[1] + self.K.logK(t) - self.params.log_K_round) / (2 * k) + logcosh(y[0])

    def H_precise(self, t):
        """H = K e^{-n xi} expm1(w) from the integrator variables."""
        y = self._y(t)
        return np.asarray(self.K.K(t)) * np.exp(-self.params.n * y[2]) * np.expm1(y[1])

    def states(self):
        return [CylState.from_rapidity(t, xi, psi) for t, psi, xi in zip(self.grid, self.y[0], self.y[2])]

    def terminal_event(self) -> Event | None:
        for ev in self.events:
            if ev.kind != "critical point":
                return ev
        return None

    def critical_times(self):
        return [ev.t for ev in self.events if ev.kind == "critical point"]

    def residual(self, t=None, method: str = "consistency", h: float = 1e-5):
        """Relative ODE residual |F_k[xi] - K| / K at collocation points.

        F_k is always built from the separately integrated xi.  With
        ``method="consistency"`` psi' is taken from the (psi, w) equations,
        so the residual measures the drift between xi and w and scales with
        the tolerance.  ``method="fd"`` differences the dense psi instead; it
        is independent of the w equation but limited by the accuracy of the
        interpolant's derivative (about 1e-7 at tol 1e-10).
        """
        if t is None:
            a, b = sorted(self.t_span)
            t = np.linspace(a + 2 * h, b - 2 * h, 2001)
        t = np.asarray(t, dtype=float)
        if method == "consistency":
            # F_k / K with psi' + c = (1 + c) e^{-w}, taken in log form: forming psi' + c by
            # subtraction loses all digits in deep necks where e^{-w} is far below c
            y = self._y(t)
            k = self.params.k
            gap = 2 * k * (y[2] - logcosh(y[0])) - y[1] - (np.asarray(self.K.logK(t)) - self.params.log_K_round)
            return np.abs(np.expm1(gap))
        if method == "fd":
            psid = (self.psi(t + h) - self.psi(t - h)) / (2.0 * h)
        else:
            raise ValueError("method must be 'consistency' or 'fd'")
        F = eval_Fk_rapidity(self.params, self.xi(t), self.psi(t), psid)
        K = np.asarray(self.K.K(t))
        return np.abs(F - K) / K


def integrate(params: ProblemParams, K, init: CylState, t_end: float, tol: float = DEFAULT_TOL,
              cone_guard: float = DEFAULT_CONE_GUARD, w0: float | None = None,
              max_step: float = np.inf, method: str = "DOP853") -> CylProfile:
    """Integrate F_k[xi] = K from ``init`` to ``t_end`` with dense output.

    Events: zeros of xi' (critical points, recorded), |xi'| reaching
    1 - cone_guard (terminal) and w < -20, i.e. e^{2k xi} sech^{2k} psi
    collapsing relative to K (terminal, "blow-down").  That collapse happens
    in finite time; if the step size underflows first the run is closed with
    a blow-down event at the last accepted point.  ``w0`` overrides the
    initial w when the caller knows it to better than ulp(xi).
    """
    K = _as_curvature(K)
    t0 = float(init.t)
    if t_end == t0:
        raise ValueError("t_end must differ from the initial time")
    psi_max = cone_psi(cone_guard)
    if abs(init.psi) >= psi_max:
        raise ConeViolation("initial state violates the cone guard")
    k, n, c = params.k, params.n, params.c
    if w0 is None:
        w0 = 2 * k * (init.xi - float(logcosh(init.psi))) - (K.logK(t0) - params.log_K_round)
    y0 = np.array([init.psi, float(w0), init.xi])
    const = K.is_constant
    logderiv = K.logderiv_scalar

    def rhs(t, y):
        psi, w = y[0], y[1]
        w = -700.0 if w < -700.0 else w
        th = math.tanh(psi)
        dw = -n * th * math.expm1(-w)
        if not const:
            dw -= logderiv(t)
        return np.array([(1.0 + c) * math.exp(-w) - c, dw, th])

    def ev_crit(t, y):
        return y[0]

    def ev_cone(t, y):
        return psi_max - abs(y[0])

    def ev_blow(t, y):
        return y[1] + W_BLOWDOWN

    ev_cone.terminal = True
    ev_blow.terminal = True
    atol = np.array([tol, 1e-300, tol])
    res = solve_ivp(rhs, (t0, float(t_end)), y0, method=method, rtol=tol, atol=atol,
                    dense_output=True, events=(ev_crit, ev_cone, ev_blow), max_step=max_step,
                    first_step=min(1e-3, abs(float(t_end) - t0)))
    events = []
    if res.status == -1:
        yl = res.y[:, -1]
        if yl[1] < -5.0 or abs(yl[0]) > 0.5 * psi_max:
            res.t_events[2] = np.append(res.t_events[2], res.t[-1])
            res.y_events[2] = np.vstack([res.y_events[2].reshape(-1, 3), yl])
        else:
            raise RuntimeError(f"integration failed: {res.message}")
    for kind, te, ye in zip(("critical point", "cone-boundary approach", "blow-down"),
                            res.t_events, res.y_events):
        for tt, yy in zip(te, ye):
            events.append(Event(kind, float(tt), CylState.from_rapidity(tt, yy[2], yy[0])))
    events.sort(key=lambda e: e.t if t_end > t0 else -e.t)
    stats = {"nfev": int(res.nfev), "nsteps": int(len(res.t) - 1), "method": method}
    return CylProfile(params, K, res.sol, res.t, res.y, events, stats, int(res.status), res.message, tol)


# functionals ---------------------------------------------------------------

def _mbc_log(params, t, xi, psi, b, c):
    k, n = params.k, params.n
    pref = math.log(2.0 ** (1 - k) * params.binom_nk / n)
    return (pref - k * (b + c) * log_one_minus_tanh(psi) - k * (b - c) * log_one_plus_tanh(psi)
            + (n - 2 * k) * (b * xi + c * t))


def eval_functional(kind: str, params: ProblemParams, K, state: CylState, b=None, c=None) -> float:
    """Hbar, H, m or mbc at a state; K is a model, a number, or None for Hbar/m."""
    n, k = params.n, params.k
    t, xi, psi = state.t, state.xi, state.psi
    lc = float(logcosh(psi))
    if kind == "Hbar":
        return params.K_round * math.exp((2 * k - n) * xi - 2 * k * lc) - math.exp(-n * xi)
    if kind == "H":
        Kv = K.K(t) if isinstance(K, CurvatureModel) else float(K)
        return params.K_round * math.exp((2 * k - n) * xi - 2 * k * lc) - Kv * math.exp(-n * xi)
    if kind == "m":
        return math.exp(math.log(2.0 ** (1 - k) * params.binom_nk / n) + k * float(log_one_plus_tanh(psi))
                        + 0.5 * (n - 2 * k) * (t - xi))
    if kind == "mbc":
        if b is None or c is None:
            raise ValueError("mbc needs b and c")
        return math.exp(float(_mbc_log(params, t, xi, psi, b, c)))
    raise ValueError(f"unknown functional {kind!r}")


@dataclass
class FunctionalSeries:
    kind: str
    t: np.ndarray
    values: np.ndarray
    b: float | None = None
    c: float | None = None
    meta: dict = field(default_factory=dict)


def functional_series(kind, params, K, traj, t, b=None, c=None) -> FunctionalSeries:
    """Vectorized functional along a trajectory sampled at ``t``."""
    n, k = params.n, params.k
    t = np.asarray(t, dtype=float)
    xi, psi = np.asarray(traj.xi(t)), np.asarray(traj.psi(t))
    lc = logcosh(psi)
    if kind in ("Hbar", "H"):
        first = params.K_round * np.exp((2 * k - n) * xi - 2 * k * lc)
        if kind == "Hbar":
            Kv = 1.0
        else:
            Kv = K.K(t) if isinstance(K, CurvatureModel) else float(K)
        vals = first - Kv * np.exp(-n * xi)
    elif kind == "m":
        vals = np.exp(math.log(2.0 ** (1 - k) * params.binom_nk / n) + k * log_one_plus_tanh(psi)
                      + 0.5 * (n - 2 * k) * (t - xi))
    elif kind == "mbc":
        vals = np.exp(_mbc_log(params, t, xi, psi, b, c))
    else:
        raise ValueError(f"unknown functional {kind!r}")
    return FunctionalSeries(kind, t, np.asarray(vals), b, c)
