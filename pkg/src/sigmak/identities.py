"""Numerical checks of the integral identities satisfied by radial solutions.

Every check returns a :class:`ResidualReport` with both sides evaluated
independently: boundary terms from the functional closed forms, integrals
by adaptive Gauss-Kronrod quadrature (scipy ``quad``) of integrands that use
F_k recomputed from the trajectory.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import quad

from .curvature import ConstantK, CurvatureModel
from .geometry import ProblemParams
from .ode import functional_series
from .specfun import beta_integral, log_one_minus_tanh, log_one_plus_tanh, logcosh, sphere_area

__all__ = [
    "ResidualReport",
    "pohozaev_residual",
    "mass_residual",
    "mass_one_sided",
    "beta_integral",
    "beta_integral_check",
    "appendix_corollary_checks",
    "H_euclidean",
    "EuclideanView",
    "KazdanWarnerReport",
    "kazdan_warner_residual",
    "balance_function",
    "w_form_residual",
    "identity_suite",
]

QUAD_LIMIT = 500


@dataclass
class ResidualReport:
    name: str
    interval: tuple[float, float]
    lhs: float
    rhs: float
    residual: float
    quad_error: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.quad_error = max(float(self.quad_error), np.finfo(float).tiny)

    @property
    def abs_residual(self) -> float:
        return abs(self.residual)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["interval"] = list(self.interval)
        return d


def _model(K) -> CurvatureModel:
    return K if isinstance(K, CurvatureModel) else ConstantK(float(K))


def _check_span(profile, t1, t2):
    if t1 > t2:
        raise ValueError("need t1 <= t2")
    a, b = sorted(getattr(profile, "t_span", (-math.inf, math.inf)))
    if t1 < a or t2 > b:
        raise ValueError(f"interval [{t1}, {t2}] outside profile span [{a}, {b}]")


def _quad(f, a, b, epsabs=1e-14, epsrel=1e-12, points=None):
    val, err = quad(f, a, b, epsabs=epsabs, epsrel=epsrel, limit=QUAD_LIMIT, points=points)
    return val, err


def _breakpoints(profile, t1, t2):
    grid = getattr(profile, "grid", None)
    if grid is None:
        return None
    inner = [float(x) for x in np.asarray(grid) if t1 < x < t2]
    if len(inner) > 100:
        inner = inner[:: max(1, len(inner) // 100)]
    return inner or None


def pohozaev_residual(profile, K, t1: float, t2: float, kind: str = "H") -> ResidualReport:
    """H(t2) - H(t1) against the integral of -n (F_k - K) e^{-n xi} xi' - K' e^{-n xi}.

    ``kind="Hbar"`` uses the K-free quantity with F_k - 1 in the integrand.
    """
    _check_span(profile, t1, t2)
    params: ProblemParams = profile.params
    n = params.n
    Km = _model(K)
    ts = np.array([t1, t2])
    if kind == "H":
        vals = functional_series("H", params, Km, profile, ts).values

        def f(t):
            xi = float(profile.xi(t))
            e = math.exp(-n * xi)
            return -n * (float(profile.Fk(t)) - float(Km.K(t))) * e * float(profile.xidot(t)) - float(Km.Kdot(t)) * e
    elif kind == "Hbar":
        vals = functional_series("Hbar", params, Km, profile, ts).values

        def f(t):
            xi = float(profile.xi(t))
            return -n * (float(profile.Fk(t)) - 1.0) * math.exp(-n * xi) * float(profile.xidot(t))
    else:
        raise ValueError("kind must be 'H' or 'Hbar'")
    rhs, err = _quad(f, t1, t2, points=_breakpoints(profile, t1, t2))
    lhs = float(vals[1] - vals[0])
    return ResidualReport(f"pohozaev-{kind}", (t1, t2), lhs, rhs, lhs - rhs, err)


def _mass_integrand(params, profile, b, c):
    n, k = params.n, params.k

    def f(t):
        xi, psi = float(profile.xi(t)), float(profile.psi(t))
        F = float(profile.Fk(t))
        if F == 0.0:
            return 0.0
        log_mag = (-k * (b + c + 1) * float(log_one_minus_tanh(psi))
                   - k * (b - c + 1) * float(log_one_plus_tanh(psi))
                   + ((n - 2 * k) * b - 2 * k) * xi + (n - 2 * k) * c * t)
        return 2.0 * F * (b * math.tanh(psi) + c) * math.exp(log_mag)

    return f


def _m_integrand(params, profile):
    n, k = params.n, params.k

    def f(t):
        xi, psi = float(profile.xi(t)), float(profile.psi(t))
        F = float(profile.Fk(t))
        if F == 0.0:
            return 0.0
        return F * math.exp(-(k - 1) * float(log_one_minus_tanh(psi)) - 0.5 * (n + 2 * k) * xi
                            + 0.5 * (n - 2 * k) * t)

    return f


def mass_residual(profile, K, t1: float, t2: float, b: float | None = None,
                  c: float | None = None) -> ResidualReport:
    """Mass-type identity; with b, c given, the separable (b, c) member."""
    _check_span(profile, t1, t2)
    params = profile.params
    ts = np.array([t1, t2])
    if b is None and c is None:
        vals = functional_series("m", params, K, profile, ts).values
        f = _m_integrand(params, profile)
        name = "mass-m"
    else:
        if b is None or c is None:
            raise ValueError("give both b and c")
        vals = functional_series("mbc", params, K, profile, ts, b=b, c=c).values
        f = _mass_integrand(params, profile, b, c)
        name = f"mass-mbc({b:g},{c:g})"
    rhs, err = _quad(f, t1, t2, epsabs=0.0, points=_breakpoints(profile, t1, t2))
    lhs = float(vals[1] - vals[0])
    return ResidualReport(name, (t1, t2), lhs, rhs, lhs - rhs, err, {"b": b, "c": c})


def mass_one_sided(profile, K, t: float, t_lo: float | None = None) -> ResidualReport:
    """m(t) against the integral from -infinity, truncated at ``t_lo``.

    The neglected tail is bounded by m(t_lo) itself, which is reported as the
    truncation part of the error.
    """
    params = profile.params
    if t_lo is None:
        t_lo = sorted(profile.t_span)[0]
    _check_span(profile, t_lo, t)
    f = _m_integrand(params, profile)
    rhs, err = _quad(f, t_lo, t, epsabs=0.0, points=_breakpoints(profile, t_lo, t))
    m = functional_series("m", params, K, profile, np.array([t_lo, t])).values
    lhs = float(m[1])
    return ResidualReport("mass-one-sided", (t_lo, t), lhs, rhs, lhs - rhs, err + abs(float(m[0])),
                          {"tail": float(m[0])})


# appendix integrals ----------------------------------------------------------

def _beta_quad(a: float, b: float, cutoff: float = 1e-18):
    # r = e^s turns the integral into one of a smooth, two-sided exponentially
    # decaying function; truncate where the envelope falls below cutoff
    lc = math.log(cutoff)
    s_lo = lc / b
    s_hi = -lc / (2 * a - b)

    def f(s):
        return math.exp(b * s - a * math.log1p(math.exp(2 * s))) if s < 0 else \
            math.exp((b - 2 * a) * s - a * math.log1p(math.exp(-2 * s)))

    v1, e1 = quad(f, s_lo, 0.0, epsabs=0.0, epsrel=1e-13, limit=QUAD_LIMIT)
    v2, e2 = quad(f, 0.0, s_hi, epsabs=0.0, epsrel=1e-13, limit=QUAD_LIMIT)
    tail = cutoff / b + cutoff / (2 * a - b)
    return v1 + v2, e1 + e2 + tail


def beta_integral_check(a: float, b: float) -> dict:
    """Closed form against quadrature of int_0^inf (1+r^2)^{-a} r^{b-1} dr."""
    closed = beta_integral(a, b)
    num, err = _beta_quad(a, b)
    return {"a": a, "b": b, "closed": closed, "quad": num, "quad_error": err,
            "rel_err": abs(closed - num) / abs(closed)}


def appendix_corollary_checks(n: float, betas=(0.0,)) -> list[dict]:
    """The two corollary integrals: the Gamma-form for |beta| < n and the 1/n case."""
    out = []
    for beta in betas:
        if not -n < beta < n:
            raise ValueError("need -n < beta < n")
        closed = math.exp(math.lgamma(0.5 * (n - beta)) + math.lgamma(0.5 * (n + beta))
                          - math.log(2.0) - math.lgamma(n))
        chk = beta_integral_check(n, n + beta)
        out.append({"case": "gamma-form", "n": n, "beta": beta, "expected": closed,
                    "beta_integral": chk["closed"], "quad": chk["quad"],
                    "rel_err": max(abs(chk["closed"] - closed), abs(chk["quad"] - closed)) / closed})
    chk = beta_integral_check(0.5 * (n + 2), n)
    out.append({"case": "one-over-n", "n": n, "expected": 1.0 / n, "beta_integral": chk["closed"],
                "quad": chk["quad"],
                "rel_err": max(abs(chk["closed"] - 1.0 / n), abs(chk["quad"] - 1.0 / n)) * n})
    return out


# Euclidean form ----------------------------------------------------------------

class EuclideanView:
    """u(r) = e^{-(n-2)/2 (xi + t)}, r = e^t, and w = u^{(n-2k)/(k(n-2))}, from a trajectory."""

    def __init__(self, traj, params: ProblemParams | None = None):
        self.traj = traj
        self.params = params or traj.params

    def _pieces(self, r):
        t = np.log(np.asarray(r, dtype=float))
        return t, np.asarray(self.traj.xi(t)), np.asarray(self.traj.xidot(t)), np.asarray(self.traj.xiddot(t))

    def log_u(self, r):
        t, xi, _, _ = self._pieces(r)
        return -0.5 * (self.params.n - 2) * (xi + t)

    def u(self, r):
        return np.exp(self.log_u(r))

    def du(self, r):
        r = np.asarray(r, dtype=float)
        _, _, xd, _ = self._pieces(r)
        return -0.5 * (self.params.n - 2) * (xd + 1.0) * self.u(r) / r

    def w_derivs(self, r):
        """(w, w', w'') with ln w = -c (xi + t)."""
        r = np.asarray(r, dtype=float)
        t, xi, xd, xdd = self._pieces(r)
        c = self.params.c
        w = np.exp(-c * (xi + t))
        g = -c * (xd + 1.0)  # d ln w / dt
        dw = w * g / r
        # d/dr (w g / r) = (w g^2 - w g - c w xi'') / r^2
        d2w = w * (g * g - g - c * xdd) / (r * r)
        return w, dw, d2w


def H_euclidean(params: ProblemParams, K, r, u, du):
    """Euclidean Pohozaev quantity in (r, u, u')."""
    n, k = params.n, params.k
    Km = _model(K)
    r, u, du = (np.asarray(v, dtype=float) for v in (r, u, du))
    x = r * du / u
    first = ((-1.0) ** k * 2.0**k / (n - 2.0) ** (2 * k) * params.binom_nk
             * r ** (n - 2 * k) * u ** (2.0 * (n - 2 * k) / (n - 2)) * (x * (x + n - 2)) ** k)
    val = first - Km.K_euc(r) * r**n * u ** (2.0 * n / (n - 2))
    return val if val.ndim else float(val)


@dataclass
class KazdanWarnerReport:
    integral: float
    abs_integral: float
    relative: float
    quad_error: float
    interval: tuple[float, float]
    H_euc_max_err: float
    meta: dict = field(default_factory=dict)

    @property
    def residual(self) -> float:
        return self.integral

    def as_dict(self) -> dict:
        d = asdict(self)
        d["interval"] = list(self.interval)
        return d


def kazdan_warner_residual(profile, K, r_range=None, check_points: int = 9) -> KazdanWarnerReport:
    """int_0^inf K'_Euc(s) u(s)^{2n/(n-2)} s^n ds, computed as int K'_cyl e^{-n xi} dt.

    With s = e^t the two integrands agree identically (u^{2n/(n-2)} s^{n+1} =
    e^{-n xi}); the t form keeps relative precision in deep bubble tails.  At
    interior radii H_Euc(r) is compared with -int_0^r, the tail beyond the
    profile span being estimated from the neglected mass.
    """
    params = profile.params
    n = params.n
    Km = _model(K)
    if r_range is None:
        a, b = sorted(profile.t_span)
    else:
        a, b = math.log(r_range[0]), math.log(r_range[1])
    pts = _breakpoints(profile, a, b)

    def f(t):
        return float(Km.Kdot(t)) * math.exp(-n * float(profile.xi(t)))

    def g(t):
        return abs(f(t))

    val, err = _quad(f, a, b, epsabs=0.0, points=pts)
    aval, _ = _quad(g, a, b, epsabs=0.0, points=pts)
    view = EuclideanView(profile, params)
    worst = 0.0
    if check_points:
        for t in np.linspace(a, b, check_points + 2)[1:-1]:
            r = math.exp(t)
            He = H_euclidean(params, Km, r, float(view.u(r)), float(view.du(r)))
            part, _ = _quad(f, a, t, epsabs=0.0)
            H0 = float(functional_series("H", params, Km, profile, np.array([a])).values[0])
            # H_Euc(r) = H(a) - int_a^t K' e^{-n xi}
            worst = max(worst, abs(He - (H0 - part)))
    return KazdanWarnerReport(val, aval, abs(val) / aval if aval > 0 else 0.0, err, (a, b), worst)


def balance_function(K, s: float, params: ProblemParams) -> float:
    """n * int_{S^n} K(phi_s x) x_{n+1} dv for the dilation phi_s, s > 0.

    With x_{n+1} = tanh t and dv = |S^{n-1}| sech^n t dt the sphere integral
    becomes a line integral over the cylinder.
    """
    if not s > 0:
        raise ValueError("dilation parameter must be positive")
    Km = _model(K)
    n = params.n
    ls = math.log(s)

    def f(t):
        return float(Km.K(t + ls)) * math.tanh(t) * math.exp(-n * float(logcosh(t)))

    cut = 745.0 / n
    v1, _ = quad(f, -cut, 0.0, epsabs=1e-15, epsrel=1e-12, limit=QUAD_LIMIT)
    v2, _ = quad(f, 0.0, cut, epsabs=1e-15, epsrel=1e-12, limit=QUAD_LIMIT)
    return n * sphere_area(n - 1) * (v1 + v2)


def w_form_residual(profile, K, r: float) -> ResidualReport:
    """w-equation residual, E > 0 and E^k = (K / C(n,k)) (1 - rho) at radius r.

    The reported residual is the relative residual of the second-order
    w-equation; ``meta`` carries E and the E^k consistency defect.
    """
    params = profile.params
    n, k = params.n, params.k
    Km = _model(K)
    view = EuclideanView(profile, params)
    w, dw, d2w = (float(v) for v in view.w_derivs(r))
    E = 2 * k / (n - 2 * k) * w ** (-2.0 * n / (n - 2 * k)) * (-w * dw / r - k / (n - 2 * k) * dw * dw)
    if not E > 0:
        raise ValueError(f"E = {E} <= 0 at r = {r}: cone violation in w-variables")
    Ke = float(Km.K_euc(r))
    lhs = d2w + (n - k) / k * dw / r
    rhs = -n * (n - 2 * k) / (2 * k * k * params.binom_nk) * Ke * w ** ((n + 2 * k) / (n - 2 * k)) * E ** (1 - k)
    scale = max(abs(d2w), abs((n - k) / k * dw / r), abs(rhs))
    # rho from the running Kazdan-Warner integral, taken in the t form
    t_r = math.log(r)
    a = sorted(profile.t_span)[0]
    H0 = float(functional_series("H", params, Km, profile, np.array([a])).values[0])
    part, _ = _quad(lambda t: float(Km.Kdot(t)) * math.exp(-n * float(profile.xi(t))), a, t_r, epsabs=0.0)
    # int_0^r K' s^n w^{2nk/(n-2k)} ds = -H_Euc(r) = part - H(a)
    rho = (part - H0) / (Ke * r**n * w ** (2.0 * n * k / (n - 2 * k)))
    consist = E**k * params.binom_nk / Ke + rho - 1.0
    return ResidualReport("w-form", (r, r), lhs, rhs, (lhs - rhs) / scale, 0.0,
                          {"E": E, "rho": rho, "Ek_consistency": consist})


# suite -------------------------------------------------------------------------

def _relative(rep: ResidualReport) -> float:
    return abs(rep.residual) / max(1.0, abs(rep.lhs), abs(rep.rhs))


def identity_suite(params: ProblemParams, K=None, lam: float = 0.5, t_range=(-10.0, 4.0),
                   tols=(1e-6, 1e-8, 1e-10), bc=(-0.3, 0.2)) -> dict:
    """Pohozaev and mass residuals on exact profiles and on integrated trajectories.

    Exact profiles are the standard bubble (K constant) and a degenerate
    profile (F_k = 0, where only the K-free identity applies).  Trajectories
    start on the bubble for K(-inf) at ``t_range[0]`` and are integrated with
    K at each tolerance.  Residuals are relative to max(1, |lhs|, |rhs|).
    """
    import warnings

    from scipy.integrate import IntegrationWarning

    from .ode import degenerate_profile, integrate, standard_bubble

    Km = _model(1.0 if K is None else K)
    K0 = Km.K_south
    a, b = t_range
    b_, c_ = bc
    out = {"exact": {}, "integrated": [], "reports": []}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        bub = standard_bubble(params, lam, K0)
        Kc = ConstantK(K0)
        for rep in (pohozaev_residual(bub, Kc, a, b), pohozaev_residual(bub, Kc, a, b, "Hbar"),
                    mass_residual(bub, Kc, a, b), mass_residual(bub, Kc, a, b, b=b_, c=c_)):
            out["exact"][f"bubble/{rep.name}"] = _relative(rep)
            out["reports"].append({"profile": "bubble", **rep.as_dict()})
        deg = degenerate_profile(params, 1.0, 1.0)
        rep = pohozaev_residual(deg, Kc, a, b, "Hbar")
        out["exact"][f"degenerate/{rep.name}"] = _relative(rep)
        out["reports"].append({"profile": "degenerate", **rep.as_dict()})
        for tol in tols:
            st = bub.state(a)
            prof = integrate(params, Km, st, b, tol=tol, w0=math.log(K0) - float(Km.logK(a)))
            hi = min(b, prof.t_span[1])
            reps = [pohozaev_residual(prof, Km, a, hi), pohozaev_residual(prof, Km, a, hi, "Hbar"),
                    mass_residual(prof, Km, a, hi), mass_residual(prof, Km, a, hi, b=b_, c=c_)]
            out["integrated"].append({"tol": tol, "interval": [a, hi],
                                      "residuals": {r.name: _relative(r) for r in reps}})
            out["reports"] += [{"profile": f"integrated tol={tol:g}", **r.as_dict()} for r in reps]
    worst = [max(e["residuals"].values()) for e in out["integrated"]]
    out["exact_max"] = max(out["exact"].values())
    out["integrated_max_over_tol"] = [w / e["tol"] for w, e in zip(worst, out["integrated"])]
    # linear scaling: residual / tol bounded and the residual falls as tol does
    out["scaling_ok"] = all(x <= 10.0 for x in out["integrated_max_over_tol"]) and all(
        worst[i + 1] < worst[i] for i in range(len(worst) - 1))
    out["passed"] = out["exact_max"] < 1e-8 and out["scaling_ok"]
    return out
