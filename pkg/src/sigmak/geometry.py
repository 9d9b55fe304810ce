"""Problem parameters, the three radial charts and the v / u / xi conversions.

Charts on the axisymmetric sphere:

* spherical: polar angle theta in (0, pi), theta = 0 is the north pole;
* Euclidean: r = cot(theta / 2) (stereographic radius);
* cylindrical: t = ln r, so t -> +inf at the north pole.

Conformal factors: the spherical factor v, the Euclidean factor
u = (2 / (1 + r^2))^((n-2)/2) v and the cylindrical variable
xi = -(2/(n-2)) ln u - ln r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "ProblemParams",
    "ChartPoint",
    "SolutionTriple",
    "theta_to_t",
    "t_to_theta",
    "t_to_pi_minus_theta",
    "theta_to_r",
    "r_to_theta",
    "convert_profile",
    "DEFAULT_POLE_EPS",
]

DEFAULT_POLE_EPS = 1e-6
CHARTS = ("v", "u", "xi")
_GRID_OF = {"v": "theta", "u": "r", "xi": "t"}


@dataclass(frozen=True)
class ProblemParams:
    """Dimension n and order k with n >= 5 and 2 <= k < n/2."""

    n: int
    k: int

    def __post_init__(self):
        if int(self.n) != self.n or int(self.k) != self.k:
            raise ValueError("n and k must be integers")
        if self.n < 5:
            raise ValueError(f"n must be >= 5, got {self.n}")
        if self.k < 2:
            raise ValueError(f"k must be >= 2, got {self.k}")
        if 2 * self.k >= self.n:
            raise ValueError(f"need 2k < n, got n={self.n}, k={self.k}")

    @cached_property
    def binom_nk(self) -> int:
        return math.comb(self.n, self.k)

    @cached_property
    def binom_n1k1(self) -> int:
        return math.comb(self.n - 1, self.k - 1)

    @cached_property
    def c(self) -> float:
        """(n - 2k) / (2k), the damping coefficient of the radial ODE."""
        return (self.n - 2 * self.k) / (2.0 * self.k)

    @cached_property
    def A(self) -> float:
        """2^(k-1) / binom(n-1, k-1), the curvature coefficient of the ODE."""
        return 2.0 ** (self.k - 1) / self.binom_n1k1

    @cached_property
    def K_round(self) -> float:
        """sigma_k curvature of the round metric, 2^-k binom(n, k)."""
        return self.binom_nk / 2.0**self.k

    @cached_property
    def log_K_round(self) -> float:
        return math.log(self.K_round)

    @property
    def gap(self) -> int:
        return self.n - 2 * self.k

    def as_dict(self) -> dict:
        return {"n": self.n, "k": self.k}


def _as_float_array(x):
    return np.asarray(x, dtype=float)


def theta_to_t(theta):
    """t = ln cot(theta / 2); strictly decreasing on (0, pi)."""
    th = _as_float_array(theta)
    if np.any((th <= 0.0) | (th >= math.pi)) or np.any(~np.isfinite(th)):
        raise ValueError("theta must lie in the open interval (0, pi)")
    out = -np.log(np.tan(0.5 * th))
    return out if out.ndim else float(out)


def t_to_theta(t):
    """theta = 2 arctan(e^-t)."""
    tt = _as_float_array(t)
    out = 2.0 * np.arctan(np.exp(-np.clip(tt, -700.0, 700.0)))
    return out if out.ndim else float(out)


def t_to_pi_minus_theta(t):
    """pi - theta = 2 arctan(e^t), accurate near the south pole."""
    tt = _as_float_array(t)
    out = 2.0 * np.arctan(np.exp(np.clip(tt, -700.0, 700.0)))
    return out if out.ndim else float(out)


def theta_to_r(theta):
    th = _as_float_array(theta)
    out = 1.0 / np.tan(0.5 * th)
    return out if out.ndim else float(out)


def r_to_theta(r):
    rr = _as_float_array(r)
    if np.any(rr <= 0.0):
        raise ValueError("r must be positive")
    out = 2.0 * np.arctan(1.0 / rr)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ChartPoint:
    """One point expressed in all three charts."""

    theta: float
    r: float
    t: float

    @classmethod
    def from_theta(cls, theta: float) -> "ChartPoint":
        t = theta_to_t(theta)
        return cls(float(theta), math.exp(t), t)

    @classmethod
    def from_t(cls, t: float) -> "ChartPoint":
        return cls(t_to_theta(t), math.exp(t), float(t))

    @classmethod
    def from_r(cls, r: float) -> "ChartPoint":
        if r <= 0:
            raise ValueError("r must be positive")
        return cls(r_to_theta(r), float(r), math.log(r))

    def is_consistent(self, tol: float = 1e-12) -> bool:
        return (
            abs(math.log(self.r) - self.t) <= tol * max(1.0, abs(self.t))
            and abs(t_to_theta(self.t) - self.theta) <= tol
        )


def _log_round_factor(t, n):
    # ln of (2/(1+r^2))^((n-2)/2) written in t: -(n-2)/2 * (t + ln cosh t)
    from .specfun import logcosh

    return -0.5 * (n - 2) * (np.asarray(t) + logcosh(t))


@dataclass(frozen=True)
class SolutionTriple:
    """Values of v, u and xi at one point with radius r."""

    v: float
    u: float
    xi: float

    @classmethod
    def from_v(cls, v: float, r: float, params: ProblemParams) -> "SolutionTriple":
        if v <= 0:
            raise ValueError("conformal factor v must be positive")
        u = (2.0 / (1.0 + r * r)) ** ((params.n - 2) / 2.0) * v
        xi = -2.0 / (params.n - 2) * math.log(u) - math.log(r)
        return cls(float(v), u, xi)

    @classmethod
    def from_xi(cls, xi: float, r: float, params: ProblemParams) -> "SolutionTriple":
        u = math.exp(-0.5 * (params.n - 2) * (xi + math.log(r)))
        v = u / (2.0 / (1.0 + r * r)) ** ((params.n - 2) / 2.0)
        return cls(v, u, float(xi))


def convert_profile(grid, values, source: str, target: str, params: ProblemParams,
                    pole_eps: float = DEFAULT_POLE_EPS):
    """Convert a sampled profile between the charts 'v', 'u' and 'xi'.

    ``grid`` holds theta for 'v', r for 'u' and t for 'xi'. Returns
    ``(new_grid, new_values)``; the new grid is the image of the old one
    in the target chart (so it is decreasing when theta is mapped to r or t).
    Everything is done in log form so that round trips are exact up to
    rounding.
    """
    if source not in CHARTS or target not in CHARTS:
        raise ValueError(f"unknown chart; expected one of {CHARTS}")
    g = _as_float_array(grid)
    y = _as_float_array(values)
    if g.shape != y.shape:
        raise ValueError("grid and values must have the same shape")
    n = params.n

    # move to the cylindrical coordinate and the log form of u
    if source == "v":
        if np.any(y <= 0):
            raise ValueError("non-positive conformal factor v")
        if np.any((g < pole_eps) | (g > math.pi - pole_eps)):
            raise ValueError("theta grid enters the pole exclusion zone")
        t = theta_to_t(g)
        log_u = _log_round_factor(t, n) + np.log(y)
    elif source == "u":
        if np.any(y <= 0):
            raise ValueError("non-positive conformal factor u")
        if np.any(g <= 0):
            raise ValueError("r grid must be positive")
        t = np.log(g)
        log_u = np.log(y)
    else:
        t = g
        log_u = -0.5 * (n - 2) * (y + t)

    t = np.atleast_1d(t)
    log_u = np.atleast_1d(log_u)
    if target == "v":
        theta = t_to_theta(t)
        out_grid, out = theta, np.exp(log_u - _log_round_factor(t, n))
    elif target == "u":
        out_grid, out = np.exp(t), np.exp(log_u)
    else:
        out_grid, out = t, -2.0 / (n - 2) * log_u - t
    if g.ndim == 0:
        return float(out_grid[0]), float(out[0])
    return np.asarray(out_grid), np.asarray(out)
