"""Prescribed curvature families on the axisymmetric sphere.

Every model is evaluated in the cylindrical chart, K(t) and its exact
derivative K'(t); the spherical and Euclidean charts follow by the chain
rule (dtheta/dt = -sin(theta), dr/dt = r).  Besides K and K', models expose
the logarithmic derivative K'/K and ln K separately, because the solvers
need both with full relative precision even when K differs from a constant
only by 1e-40 or when K itself is 1e-120.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import ProblemParams, t_to_pi_minus_theta, t_to_theta, theta_to_t
from .specfun import smoothstep, smoothstep_deriv

__all__ = [
    "PoleFlatness",
    "CurvatureModel",
    "ConstantK",
    "FlatPoleK",
    "HeightK",
    "NonexistenceK",
    "NoncompactK",
    "PerturbationK",
    "make_constant_K",
    "make_flat_pole_K",
    "make_height_K",
    "make_nonexistence_K",
    "make_noncompact_K",
    "make_perturbation_K",
    "model_from_descriptor",
    "check_derivative",
    "EPS0_DEFAULT",
]

EPS0_DEFAULT = 1e-3
_T_CHECK = np.linspace(-40.0, 40.0, 4001)


def _arr(x):
    return np.asarray(x, dtype=float)


def _ret(x, like):
    return x if np.ndim(like) else float(x)


def _sech(t):
    t = np.clip(_arr(t), -700.0, 700.0)
    e = np.exp(-np.abs(t))
    return 2.0 * e / (1.0 + e * e)


@dataclass(frozen=True)
class PoleFlatness:
    """Leading pole behaviour K = K(pole) + a * dist^beta + R(dist).

    ``remainder_bound(d)`` bounds (|R| + d|R'|) / d^beta for 0 < d <= neighborhood.
    """

    a: float
    beta: float
    remainder_bound: Callable[[float], float] = field(default=lambda d: 0.0, compare=False)
    neighborhood: float = 1.0

    def __post_init__(self):
        if self.a == 0:
            raise ValueError("pole coefficient a must be nonzero")

    def check_range(self, n: int) -> None:
        if not (2.0 <= self.beta < n):
            raise ValueError(f"flatness exponent beta={self.beta} outside [2, {n})")


def _smooth_scalar(x: float):
    # scalar smoothstep: (S, 1 - S, dS/dx)
    if x <= 0.0:
        return 0.0, 1.0, 0.0
    if x >= 1.0:
        return 1.0, 0.0, 0.0
    f0 = math.exp(-1.0 / x)
    f1 = math.exp(-1.0 / (1.0 - x))
    den = f0 + f1
    d = (f0 / (x * x) * f1 + f0 * f1 / ((1.0 - x) ** 2)) / (den * den)
    return f0 / den, f1 / den, d


def _tan_power_remainder(a: float, beta: float):
    # K - Kpole = a 2^beta tan^beta(d/2) written as a d^beta + R(d)
    def bound(d):
        d = float(d)
        h = 2.0 * math.tan(0.5 * d)
        r = a * (h**beta - d**beta)
        dr = a * beta * (h ** (beta - 1.0) / math.cos(0.5 * d) ** 2 - d ** (beta - 1.0))
        return (abs(r) + d * abs(dr)) / d**beta

    return bound


class CurvatureModel:
    """Base class; subclasses implement ``_eval(t) -> (K, Kdot)``."""

    family = "abstract"

    def __init__(self, K_north: float, K_south: float, north: PoleFlatness | None,
                 south: PoleFlatness | None, params: dict):
        self.K_north = float(K_north)
        self.K_south = float(K_south)
        self.north = north
        self.south = south
        self.params = dict(params)
        self.metadata: dict = {}
        self.floor = self._compute_floor()

    # cylindrical chart --------------------------------------------------
    def _eval(self, t):
        raise NotImplementedError

    def K(self, t):
        return _ret(self._eval(_arr(t))[0], t)

    def Kdot(self, t):
        return _ret(self._eval(_arr(t))[1], t)

    def logderiv(self, t):
        K, Kd = self._eval(_arr(t))
        return _ret(Kd / K, t)

    def logderiv_scalar(self, t: float) -> float:
        """K'/K at one point; overridden with math-module code where integrators need speed."""
        K, Kd = self._eval(_arr(t))
        return float(Kd / K)

    def logK(self, t):
        return _ret(np.log(self._eval(_arr(t))[0]), t)

    def __call__(self, t):
        return self.K(t)

    # other charts -------------------------------------------------------
    def K_theta(self, theta):
        return self.K(theta_to_t(theta))

    def dK_dtheta(self, theta):
        th = _arr(theta)
        return _ret(-_arr(self.Kdot(theta_to_t(th))) / np.sin(th), theta)

    def K_euc(self, r):
        return self.K(np.log(_arr(r)))

    def dK_dr(self, r):
        rr = _arr(r)
        return _ret(_arr(self.Kdot(np.log(rr))) / rr, r)

    # bookkeeping --------------------------------------------------------
    def _compute_floor(self) -> float:
        vals = _arr(self._eval(_T_CHECK)[0])
        lo = float(min(vals.min(), self.K_north, self.K_south))
        if not np.all(np.isfinite(vals)) or lo <= 0.0:
            raise ValueError(f"{self.family}: curvature is not positive (min {lo:.3e})")
        return lo

    @property
    def is_constant(self) -> bool:
        return False

    def descriptor(self) -> dict:
        return {"family": self.family, **self.params}

    def __repr__(self):
        inner = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({inner})"


def check_derivative(model: CurvatureModel, t_grid=None, h: float = 1e-3) -> float:
    """Max relative gap between K' and a Richardson central difference of K.

    The step is scaled to the local e-folding length |K / K'| so that
    super-exponential transitions (flat bump joins) are resolved; the
    denominator carries the round-off floor ulp(K)/step.
    """
    t = np.linspace(-30.0, 30.0, 601) if t_grid is None else _arr(t_grid)
    K = _arr(model.K(t))
    an = _arr(model.Kdot(t))
    with np.errstate(divide="ignore"):
        scale_len = np.where(an != 0, np.abs(K / an), np.inf)
    step = h * np.minimum(1.0, scale_len)

    def cd(hh):
        return (_arr(model.K(t + hh)) - _arr(model.K(t - hh))) / (2.0 * hh)

    fd = (4.0 * cd(0.5 * step) - cd(step)) / 3.0
    floor = 1e-9 * np.abs(K) / step
    return float((np.abs(fd - an) / (np.abs(an) + floor)).max())


class ConstantK(CurvatureModel):
    family = "constant"

    def __init__(self, K0: float):
        if K0 <= 0:
            raise ValueError("constant curvature must be positive")
        self.K0 = float(K0)
        super().__init__(K0, K0, None, None, {"K0": float(K0)})

    def _eval(self, t):
        return np.full_like(t, self.K0), np.zeros_like(t)

    def logderiv(self, t):
        return _ret(np.zeros_like(_arr(t)), t)

    @property
    def is_constant(self) -> bool:
        return True


class FlatPoleK(CurvatureModel):
    """K0 + a1 theta^b1 near the north pole, Kpi + a2 (pi - theta)^b2 near the south.

    The two power laws are blended on theta in [theta_a, theta_b] with a
    C-infinity monotone partition of unity.
    """

    family = "flat-pole"

    def __init__(self, K0, a1, beta1, Kpi, a2, beta2, theta_a=1.0, theta_b=math.pi - 1.0):
        if not (0.0 < theta_a < theta_b < math.pi):
            raise ValueError("blend band must satisfy 0 < theta_a < theta_b < pi")
        if K0 <= 0 or Kpi <= 0:
            raise ValueError("pole values must be positive")
        self.K0, self.a1, self.b1 = float(K0), float(a1), float(beta1)
        self.Kpi, self.a2, self.b2 = float(Kpi), float(a2), float(beta2)
        self.theta_a, self.theta_b = float(theta_a), float(theta_b)
        north = PoleFlatness(self.a1, self.b1, neighborhood=self.theta_a)
        south = PoleFlatness(self.a2, self.b2, neighborhood=math.pi - self.theta_b)
        super().__init__(K0, Kpi, north, south, {
            "K0": self.K0, "a1": self.a1, "beta1": self.b1, "Kpi": self.Kpi,
            "a2": self.a2, "beta2": self.b2, "theta_a": self.theta_a, "theta_b": self.theta_b,
        })

    def _theta_parts(self, th, pth):
        # th = theta, pth = pi - theta, both accurate
        with np.errstate(divide="ignore"):
            lt, lp = np.log(th), np.log(pth)
        N = self.K0 + self.a1 * np.exp(self.b1 * lt)
        S = self.Kpi + self.a2 * np.exp(self.b2 * lp)
        dN = self.a1 * self.b1 * np.exp((self.b1 - 1.0) * lt)
        dS = -self.a2 * self.b2 * np.exp((self.b2 - 1.0) * lp)
        width = self.theta_b - self.theta_a
        x = (th - self.theta_a) / width
        chi, one_minus_chi = smoothstep(x)
        dchi = smoothstep_deriv(x) / width
        K = one_minus_chi * N + chi * S
        dK = one_minus_chi * dN + chi * dS + dchi * (S - N)
        return K, dK

    def _eval(self, t):
        th = t_to_theta(t)
        pth = t_to_pi_minus_theta(t)
        K, dK = self._theta_parts(_arr(th), _arr(pth))
        return K, -dK * _sech(t)

    def logderiv_scalar(self, t: float) -> float:
        tc = min(max(t, -700.0), 700.0)
        th = 2.0 * math.atan(math.exp(-tc))
        pth = 2.0 * math.atan(math.exp(tc))
        lt = math.log(th) if th > 0 else -math.inf
        lp = math.log(pth) if pth > 0 else -math.inf
        N = self.K0 + self.a1 * math.exp(self.b1 * lt)
        S = self.Kpi + self.a2 * math.exp(self.b2 * lp)
        dN = self.a1 * self.b1 * math.exp((self.b1 - 1.0) * lt)
        dS = -self.a2 * self.b2 * math.exp((self.b2 - 1.0) * lp)
        width = self.theta_b - self.theta_a
        chi, omc, dchi = _smooth_scalar((th - self.theta_a) / width)
        K = omc * N + chi * S
        dK = omc * dN + chi * dS + dchi / width * (S - N)
        return -dK / (K * math.cosh(tc))

    def K_theta(self, theta):
        th = _arr(theta)
        return _ret(self._theta_parts(th, math.pi - th)[0], theta)

    def dK_dtheta(self, theta):
        th = _arr(theta)
        return _ret(self._theta_parts(th, math.pi - th)[1], theta)


class HeightK(CurvatureModel):
    """K = c0 + c1 x^{n+1} = c0 + c1 cos(theta) = c0 + c1 tanh(t); monotone for c1 != 0."""

    family = "height"

    def __init__(self, c0: float, c1: float):
        if c0 <= abs(c1):
            raise ValueError("need c0 > |c1| for positivity")
        if c1 == 0:
            raise ValueError("c1 must be nonzero")
        self.c0, self.c1 = float(c0), float(c1)
        # cos(theta) = 1 - theta^2/2 + ..., cos(theta) = -1 + (pi-theta)^2/2 + ...
        north = PoleFlatness(-0.5 * c1, 2.0, lambda d: abs(c1) * d * d / 8.0)
        south = PoleFlatness(0.5 * c1, 2.0, lambda d: abs(c1) * d * d / 8.0)
        super().__init__(c0 + c1, c0 - c1, north, south, {"c0": self.c0, "c1": self.c1})

    def _eval(self, t):
        return self.c0 + self.c1 * np.tanh(t), self.c1 * _sech(t) ** 2

    def logderiv_scalar(self, t: float) -> float:
        tc = min(max(t, -350.0), 350.0)
        return self.c1 / math.cosh(tc) ** 2 / (self.c0 + self.c1 * math.tanh(tc))


class NonexistenceK(CurvatureModel):
    """Curvature equal to 1 - e^{...}/2 outside [-T-1, T+1] and eps on [-T, T].

    On each unit band the derivative is blended rather than the value:
    with s the distance from the outer edge,
    K'(s) = (1 - chi1) L'(s) - A chi1 (1 - chi2),
    where L is the outer exponential branch, chi1 a flat step on [0, s_a]
    and chi2 a flat step on [s_b, 1].  A is fixed by K(1) = eps.  The join
    is C-infinity at both ends, K' <= 0 and |K'| <= max(|L'(s_a)|, A).
    The tail near s = 1 is integrated with Gauss-Laguerre in u = 1/(1-x)
    so K keeps relative precision down to eps.
    """

    family = "nonexistence"
    _S_B = 0.6

    def __init__(self, eps, T, beta1, beta2, slope_cap=1.9):
        if eps <= 0 or T < 1:
            raise ValueError("need eps > 0 and T >= 1")
        if eps >= 0.5:
            raise ValueError("eps must be below 1/2 for a monotone band")
        self.eps, self.T = float(eps), float(T)
        self.b1, self.b2 = float(beta1), float(beta2)
        self._bands = {b: self._setup_band(b, slope_cap) for b in {self.b1, self.b2}}
        a1 = -0.5 * math.exp(self.b1 * (self.T + 1.0)) / 2.0**self.b1
        a2 = -0.5 * math.exp(self.b2 * (self.T + 1.0)) / 2.0**self.b2
        north = PoleFlatness(a1, self.b1, _tan_power_remainder(a1, self.b1),
                             neighborhood=float(t_to_theta(self.T + 1.0)))
        south = PoleFlatness(a2, self.b2, _tan_power_remainder(a2, self.b2),
                             neighborhood=float(t_to_pi_minus_theta(-self.T - 1.0)))
        super().__init__(1.0, 1.0, north, south, {
            "eps": self.eps, "T": self.T, "beta1": self.b1, "beta2": self.b2,
        })
        slope = max(bd["slope"] for bd in self._bands.values())
        if np.any(self.Kdot(np.linspace(-self.T - 1.0, -self.T, 401)) > 0) or np.any(
                self.Kdot(np.linspace(self.T, self.T + 1.0, 401)) < 0):
            raise ValueError("transition band is not monotone")
        self.metadata = {
            "band_slope_max": slope,
            "band_slope_ok": bool(slope <= 2.0),
            "smoothing": "derivative blend (1-chi1) L' - A chi1 (1-chi2); "
                         + ", ".join(f"beta={b}: s_a={bd['s_a']:.4g}, A={bd['A']:.6g}"
                                     for b, bd in sorted(self._bands.items())),
        }

    def _setup_band(self, beta, slope_cap):
        from scipy.integrate import quad

        # largest s_a <= 0.15 keeping |L'| = beta/2 e^{beta s} below the cap
        s_a = 0.15
        if 0.5 * beta < slope_cap:
            s_a = min(s_a, math.log(2.0 * slope_cap / beta) / beta)
        else:
            s_a = 0.02
        bd = {"beta": beta, "s_a": s_a}
        lead = quad(lambda s: float(self._chi1(s, s_a)[1]) * (-0.5 * beta * math.exp(beta * s)),
                    0.0, s_a, epsabs=0, epsrel=1e-13)[0]
        c1 = quad(lambda s: float(self._chi1(s, s_a)[0]), 0.0, s_a, epsabs=0, epsrel=1e-13)[0]
        mid = (self._S_B - s_a) + c1
        tail_b = float(self._tail(np.array([self._S_B]))[0])
        bd["A"] = (0.5 - self.eps + lead) / (mid + tail_b)
        bd["lead"], bd["c1"] = lead, c1
        bd["tail_b"] = tail_b
        bd["slope"] = max(0.5 * beta * math.exp(beta * s_a), bd["A"])
        return bd

    @staticmethod
    def _chi1(s, s_a):
        return smoothstep(np.asarray(s, dtype=float) / s_a)

    _LAG = np.polynomial.laguerre.laggauss(40)

    def _tail(self, s):
        # integral over [s, 1] of 1 - chi2, chi2 = flat step on [S_B, 1]
        s = np.asarray(s, dtype=float)
        w = 1.0 - self._S_B
        x = np.clip((s - self._S_B) / w, 0.0, 1.0)
        U = 1.0 / np.maximum(1.0 - x, 1e-300)
        nodes, weights = self._LAG
        u = U[:, None] + nodes[None, :]
        y = 1.0 - 1.0 / u
        with np.errstate(over="ignore", divide="ignore"):
            # (1 - chi2) e^u = 1 / (e^{-1/y} + e^{-u}), bounded and smooth in u
            q = 1.0 / (np.exp(-1.0 / np.maximum(y, 1e-300)) + np.exp(-u)) / u**2
            out = w * np.exp(-U) * (q @ weights)
        out = np.where(x >= 1.0, 0.0, out)
        # the Laguerre rule is only sharp for large U; below x_split add the
        # smooth head [x, x_split] by Gauss-Legendre
        x_split = 0.75
        head = x < x_split
        if np.any(head):
            xh = x[head]
            out[head] = self._tail(np.array([self._S_B + x_split * w]))[0]
            gl_nodes, gl_weights = np.polynomial.legendre.leggauss(40)
            half = 0.5 * (x_split - xh)
            yy = xh[:, None] + half[:, None] * (gl_nodes[None, :] + 1.0)
            out[head] += w * half * (smoothstep(yy)[1] @ gl_weights)
        return out + np.maximum(self._S_B - s, 0.0)

    def _band(self, s, beta):
        bd = self._bands[beta]
        s_a, A = bd["s_a"], bd["A"]
        val = np.empty_like(s)
        der = np.empty_like(s)
        chi1, omc1 = self._chi1(s, s_a)
        x2 = (s - self._S_B) / (1.0 - self._S_B)
        _, omc2 = smoothstep(x2)
        der[:] = omc1 * (-0.5 * beta * np.exp(beta * np.minimum(s, s_a))) - A * chi1 * omc2
        head = s < s_a
        if np.any(head):
            nodes, weights = np.polynomial.legendre.leggauss(30)
            sh = s[head]
            sig = 0.5 * sh[:, None] * (nodes[None, :] + 1.0)
            c, omc = self._chi1(sig, s_a)
            integrand = omc * (-0.5 * beta * np.exp(beta * sig)) - A * c
            val[head] = 0.5 + 0.5 * sh * (integrand @ weights)
        body = ~head
        if np.any(body):
            sb = s[body]
            tail = np.where(sb < self._S_B, (self._S_B - sb) + bd["tail_b"], 0.0)
            late = sb >= self._S_B
            if np.any(late):
                tail[late] = self._tail(sb[late])
            val[body] = self.eps + A * tail
        return val, der

    def logderiv_scalar(self, t: float) -> float:
        T = self.T
        if -T <= t <= T:
            return 0.0
        if t <= -T - 1.0:
            e = math.exp(self.b2 * (t + T + 1.0))
            return -0.5 * self.b2 * e / (1.0 - 0.5 * e)
        if t >= T + 1.0:
            e = math.exp(-self.b1 * (t - T - 1.0))
            return 0.5 * self.b1 * e / (1.0 - 0.5 * e)
        if t < -T:
            return self._band_logderiv(t + T + 1.0, self.b2)
        return -self._band_logderiv(T + 1.0 - t, self.b1)

    _GL30 = np.polynomial.legendre.leggauss(30)

    def _band_logderiv(self, s: float, beta: float) -> float:
        # scalar twin of _band: derivative over value in the band variable s
        bd = self._bands[beta]
        s_a, A = bd["s_a"], bd["A"]
        chi1, omc1, _ = _smooth_scalar(s / s_a)
        _, omc2, _ = _smooth_scalar((s - self._S_B) / (1.0 - self._S_B))
        der = omc1 * (-0.5 * beta * math.exp(beta * min(s, s_a))) - A * chi1 * omc2
        if s < s_a:
            nodes, weights = self._GL30
            sig = 0.5 * s * (nodes + 1.0)
            c, omc = self._chi1(sig, s_a)
            val = 0.5 + 0.5 * s * float((omc * (-0.5 * beta * np.exp(beta * sig)) - A * c) @ weights)
        elif s < self._S_B:
            val = self.eps + A * ((self._S_B - s) + bd["tail_b"])
        else:
            val = self.eps + A * float(self._tail(np.array([s]))[0])
        return der / val

    def _eval(self, t):
        T, eps = self.T, self.eps
        K = np.full_like(t, eps)
        Kd = np.zeros_like(t)
        left = t <= -T - 1.0
        right = t >= T + 1.0
        lband = (t > -T - 1.0) & (t < -T)
        rband = (t > T) & (t < T + 1.0)
        e = np.exp(self.b2 * (t[left] + T + 1.0))
        K[left], Kd[left] = 1.0 - 0.5 * e, -0.5 * self.b2 * e
        e = np.exp(-self.b1 * (t[right] - T - 1.0))
        K[right], Kd[right] = 1.0 - 0.5 * e, 0.5 * self.b1 * e
        if np.any(lband):
            v, d = self._band(t[lband] + T + 1.0, self.b2)
            K[lband], Kd[lband] = v, d
        if np.any(rband):
            v, d = self._band(T + 1.0 - t[rband], self.b1)
            K[rband], Kd[rband] = v, -d
        return K, Kd


class NoncompactK(CurvatureModel):
    """K = 2^-k binom(n,k) + eps J with J even, J = -e^{beta t} for t <= -1.

    On [-1, 1] J = -g(|t|) with g = (1 - chi) + chi e^{-beta u}, chi a flat
    step on [0, 1]; g is nonincreasing so J' <= 0 on t <= 0.
    """

    family = "noncompact"

    def __init__(self, params: ProblemParams, eps: float, beta: float, allow_any_beta=False):
        if eps < 0:
            raise ValueError("eps must be nonnegative")
        if not 2.0 <= beta < params.n:
            raise ValueError(f"beta={beta} outside [2, n)")
        if beta >= 0.5 * params.gap and not allow_any_beta:
            raise ValueError(f"beta={beta} must be below (n-2k)/2 = {0.5 * params.gap}")
        if eps > EPS0_DEFAULT:
            warnings.warn(f"eps={eps} above the default eps0={EPS0_DEFAULT}", stacklevel=2)
        self.pp, self.eps, self.beta = params, float(eps), float(beta)
        self.K0 = params.K_round
        if eps > 0:
            a = -self.eps / 2.0**self.beta
            pole = PoleFlatness(a, self.beta, _tan_power_remainder(a, self.beta),
                                neighborhood=float(t_to_theta(1.0)))
        else:
            pole = None
        super().__init__(self.K0, self.K0, pole, pole, {
            "n": params.n, "k": params.k, "eps": self.eps, "beta": self.beta,
        })

    def J(self, t):
        tt = _arr(t)
        return _ret(self._J(tt)[0], t)

    def Jdot(self, t):
        tt = _arr(t)
        return _ret(self._J(tt)[1], t)

    def _J(self, t):
        u = np.abs(t)
        e = np.exp(-self.beta * u)
        chi, one_minus_chi = smoothstep(u)
        dchi = smoothstep_deriv(u)
        g = one_minus_chi + chi * e
        dg = dchi * (e - 1.0) - self.beta * chi * e
        far = u >= 1.0
        g = np.where(far, e, g)
        dg = np.where(far, -self.beta * e, dg)
        return -g, -dg * np.sign(t)

    def _eval(self, t):
        J, Jd = self._J(t)
        return self.K0 + self.eps * J, self.eps * Jd

    def logderiv_scalar(self, t: float) -> float:
        u = abs(t)
        e = math.exp(-self.beta * u)
        if u >= 1.0:
            g, dg = e, -self.beta * e
        else:
            chi, omc, dchi = _smooth_scalar(u)
            g = omc + chi * e
            dg = dchi * (e - 1.0) - self.beta * chi * e
        sgn = 1.0 if t > 0 else (-1.0 if t < 0 else 0.0)
        return -self.eps * dg * sgn / (self.K0 - self.eps * g)

    def logK(self, t):
        J = self._J(_arr(t))[0]
        return _ret(math.log(self.K0) + np.log1p(self.eps * J / self.K0), t)

    @property
    def is_constant(self) -> bool:
        return self.eps == 0.0


class PerturbationK(CurvatureModel):
    """C + K_* + gamma (x^{n+1})^{2m} with x^{n+1} = cos(theta) = tanh(t)."""

    family = "perturbation"

    def __init__(self, Kstar: CurvatureModel, gamma: float, m: int, C: float):
        if int(m) != m or m < 1:
            raise ValueError("m must be a positive integer")
        for pole in (Kstar.north, Kstar.south):
            if pole is not None and not m > pole.beta:
                raise ValueError(f"need m > beta, got m={m}, beta={pole.beta}")
        self.Kstar, self.gamma, self.m, self.C = Kstar, float(gamma), int(m), float(C)
        # cos^{2m} = 1 - m d^2 + O(d^4) at both poles, so K_# is a beta = 2 term
        north = self._combine(Kstar.north)
        south = self._combine(Kstar.south)
        super().__init__(C + Kstar.K_north + gamma, C + Kstar.K_south + gamma, north, south, {
            "Kstar": Kstar.descriptor(), "gamma": self.gamma, "m": self.m, "C": self.C,
        })

    def _combine(self, pole):
        if self.gamma == 0.0 or pole is None:
            return pole
        extra = -self.gamma * self.m
        if pole.beta == 2.0:
            a = pole.a + extra
            return PoleFlatness(a, 2.0, neighborhood=pole.neighborhood) if a != 0 else None
        return PoleFlatness(extra, 2.0, neighborhood=pole.neighborhood)

    def K_sharp(self, t):
        return np.tanh(_arr(t)) ** (2 * self.m)

    def _eval(self, t):
        Ks, Ksd = self.Kstar._eval(t)
        th = np.tanh(t)
        ksharp = th ** (2 * self.m)
        dsharp = 2 * self.m * th ** (2 * self.m - 1) * _sech(t) ** 2
        return self.C + Ks + self.gamma * ksharp, Ksd + self.gamma * dsharp


# factory functions with the operation names used throughout ---------------

def make_constant_K(K0: float) -> ConstantK:
    return ConstantK(K0)


def make_flat_pole_K(K0, a1, beta1, Kpi, a2, beta2, blend=None, n=None) -> FlatPoleK:
    """Flat-pole model; ``blend`` is an optional (theta_a, theta_b) band."""
    if a1 == 0 or a2 == 0:
        raise ValueError("pole coefficients a1, a2 must be nonzero")
    for b in (beta1, beta2):
        if b < 2.0 or (n is not None and b >= n):
            raise ValueError(f"flatness exponent {b} outside [2, n)")
    theta_a, theta_b = blend if blend is not None else (1.0, math.pi - 1.0)
    return FlatPoleK(K0, a1, beta1, Kpi, a2, beta2, theta_a, theta_b)


def make_height_K(c0: float, c1: float) -> HeightK:
    return HeightK(c0, c1)


def make_nonexistence_K(eps, T, beta1, beta2, params: ProblemParams | None = None,
                        warn_threshold: float = 1e-3, **smoothing) -> NonexistenceK:
    if params is not None:
        for b in (beta1, beta2):
            if not 2.0 <= b < params.n:
                raise ValueError(f"exponent {b} outside [2, n)")
        if 1.0 / beta1 + 1.0 / beta2 < 2.0 / params.gap:
            raise ValueError("need 1/beta1 + 1/beta2 >= 2/(n-2k)")
        if eps * math.exp((params.n + 2 * params.k) * T) > warn_threshold:
            warnings.warn("eps e^{(n+2k)T} above threshold; outside the non-existence regime",
                          stacklevel=2)
    return NonexistenceK(eps, T, beta1, beta2, **smoothing)


def make_noncompact_K(params: ProblemParams, eps: float, beta: float,
                      allow_any_beta: bool = False) -> NoncompactK:
    return NoncompactK(params, eps, beta, allow_any_beta=allow_any_beta)


def make_perturbation_K(Kstar: CurvatureModel, gamma: float, m: int, C: float) -> PerturbationK:
    return PerturbationK(Kstar, gamma, m, C)


def model_from_descriptor(desc: dict, params: ProblemParams | None = None) -> CurvatureModel:
    """Build a model from a JSON-style descriptor ``{"family": ..., ...}``."""
    d = dict(desc)
    fam = d.pop("family", None)
    try:
        if fam == "constant":
            return ConstantK(d.pop("K0"))
        if fam == "round":
            if params is None:
                raise ValueError("round family needs n, k")
            return ConstantK(params.K_round)
        if fam == "flat-pole":
            return FlatPoleK(**d)
        if fam == "height":
            return HeightK(**d)
        if fam == "nonexistence":
            return make_nonexistence_K(params=params, **d)
        if fam == "noncompact":
            d.pop("n", None), d.pop("k", None)
            if params is None:
                raise ValueError("noncompact family needs n, k")
            return NoncompactK(params, **d)
        if fam == "perturbation":
            base = model_from_descriptor(d.pop("Kstar"), params)
            return PerturbationK(base, **d)
    except TypeError as exc:
        raise ValueError(f"bad parameters for family {fam!r}: {exc}") from None
    raise ValueError(f"unknown curvature family {fam!r}")
