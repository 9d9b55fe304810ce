"""Bubble towers: critical points, center ladders, spacing and energy diagnostics.

Minima of xi are bubble centers and maxima are the necks between them.
Along a tower built by the non-compact construction the centers follow an
affine recursion t_{j+1} = r t_j + C with r = 1 - 2 beta/(n-2k); the
additive C is an O(1) quantity fixed by the curvature, so ratios are
compared through differences (which cancel C) or about the fixed point
C/(1 - r) when one is supplied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .geometry import ProblemParams
from .ode import _Trajectory, standard_bubble
from .specfun import lgamma, logcosh, sphere_area

__all__ = [
    "CriticalPoint",
    "BubbleLadder",
    "SyntheticTower",
    "find_critical_points",
    "decompose_bubbles",
    "spacing_ratio",
    "law_ratio",
    "predicted_bubble_count",
    "check_spacing_law",
    "bubble_energy_closed_form",
    "profile_energy",
    "bubble_energy",
    "tower_energy_diag",
    "energy_growth_diag",
    "TANGENTIAL_TOL",
]

TANGENTIAL_TOL = 1e-8


@dataclass(frozen=True)
class CriticalPoint:
    t: float
    kind: str  # "min" (bubble center) or "max" (neck)
    xi: float
    xiddot: float

    @property
    def tangential(self) -> bool:
        return abs(self.xiddot) < TANGENTIAL_TOL

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["tangential"] = self.tangential
        return d


def find_critical_points(traj, t_lo: float, t_hi: float, samples: int = 20001,
                         xtol: float = 1e-12) -> list[CriticalPoint]:
    """Zeros of xi' on [t_lo, t_hi], refined by Brent's method on psi = artanh xi'."""
    tt = np.linspace(t_lo, t_hi, samples)
    ps = np.asarray(traj.psi(tt), dtype=float)
    out = []
    for i in np.nonzero(np.sign(ps[:-1]) * np.sign(ps[1:]) <= 0)[0]:
        if ps[i] == 0.0 and i > 0 and ps[i - 1] != 0.0:
            continue  # already counted through the previous interval
        if ps[i] == 0.0:
            tc = float(tt[i])
        elif ps[i + 1] == 0.0:
            tc = float(tt[i + 1])
        else:
            tc = brentq(lambda x: float(traj.psi(x)), tt[i], tt[i + 1], xtol=xtol, rtol=1e-15)
        xdd = float(traj.xiddot(tc))
        out.append(CriticalPoint(tc, "min" if xdd > 0 else "max", float(traj.xi(tc)), xdd))
    dedup = []
    for c in out:
        if not dedup or abs(c.t - dedup[-1].t) > 10 * xtol:
            dedup.append(c)
    return dedup


def spacing_ratio(t1: float, t2: float, t3: float) -> float:
    return (t3 - t2) / (t2 - t1)


@dataclass
class BubbleLadder:
    critical: list
    misfits: list = field(default_factory=list)  # one per center, C^0 on the fit window
    window: float = 10.0
    lam: float | None = None
    centers: list = field(init=False)
    necks: list = field(init=False)

    def __post_init__(self):
        self.centers = [c.t for c in self.critical if c.kind == "min"]
        self.necks = [c.t for c in self.critical if c.kind == "max"]

    @property
    def N(self) -> int:
        return len(self.centers)

    @property
    def alternates(self) -> bool:
        kinds = [c.kind for c in self.critical]
        return all(a != b for a, b in zip(kinds, kinds[1:]))

    @property
    def tangential(self) -> list[float]:
        return [c.t for c in self.critical if c.tangential]

    def count(self, up_to: float | None = None, slack: float = 1e-9) -> int:
        if up_to is None:
            return len(self.centers)
        return sum(1 for t in self.centers if t <= up_to + slack)

    def spacing_ratios(self) -> list[float]:
        c = self.centers
        return [spacing_ratio(c[i], c[i + 1], c[i + 2]) for i in range(len(c) - 2)]

    def raw_ratios(self) -> list[float]:
        c = self.centers
        return [c[i + 1] / c[i] for i in range(len(c) - 1) if c[i] != 0.0]

    def ratios_about(self, t_star: float) -> list[float]:
        c = self.centers
        return [(c[i + 1] - t_star) / (c[i] - t_star) for i in range(len(c) - 1) if c[i] != t_star]

    def affine_offsets(self, r: float) -> list[float]:
        """C_j = t_{j+1} - r t_j; constant along a tower that obeys the law."""
        c = self.centers
        return [c[i + 1] - r * c[i] for i in range(len(c) - 1)]

    def fixed_point(self, r: float) -> float | None:
        """t* = C/(1 - r) from the mean affine offset, None with fewer than two centers."""
        off = self.affine_offsets(r)
        return float(np.mean(off)) / (1.0 - r) if off else None

    def as_dict(self) -> dict:
        return {"critical": [c.as_dict() for c in self.critical], "centers": self.centers,
                "necks": self.necks, "N": self.N, "misfits": self.misfits, "window": self.window,
                "alternates": self.alternates, "tangential": self.tangential,
                "spacing_ratios": self.spacing_ratios(), "raw_ratios": self.raw_ratios()}


def _misfit(traj, params: ProblemParams, K0: float, tc: float, window: float, samples: int = 801) -> float:
    b = standard_bubble(params, math.exp(-tc), K0)
    tt = np.linspace(tc - 0.5 * window, tc + 0.5 * window, samples)
    return float(np.max(np.abs(np.asarray(traj.xi(tt)) - b.xi(tt))))


def decompose_bubbles(traj, t_lo: float, t_hi: float, K0: float | None = None, window: float = 10.0,
                      lam: float | None = None, **kw) -> BubbleLadder:
    """Critical points plus, for every center, the C^0 misfit against the bubble for K0.

    The fit window is clipped to [t_lo, t_hi] so it never leaves the data.
    """
    crit = find_critical_points(traj, t_lo, t_hi, **kw)
    misfits = []
    if K0 is not None:
        for c in crit:
            if c.kind == "min":
                w = min(window, 2.0 * (c.t - t_lo), 2.0 * (t_hi - c.t))
                misfits.append(_misfit(traj, traj.params, K0, c.t, w))
    return BubbleLadder(crit, misfits, window, lam)


def law_ratio(params: ProblemParams, beta: float) -> float:
    return 1.0 - 2.0 * beta / params.gap


def predicted_bubble_count(ln_lambda: float, r: float) -> int:
    """floor(ln ln lambda / |ln r|); zero when ln lambda <= 1."""
    if not 0 < r < 1:
        raise ValueError("ratio must lie in (0, 1)")
    if ln_lambda <= 1.0:
        return 0
    return int(math.floor(math.log(ln_lambda) / abs(math.log(r))))


def check_spacing_law(ladder: BubbleLadder, params: ProblemParams, beta: float, ln_lambda: float,
                      band: float = 0.05, t_star: float | None = None, count_at: float = 0.0,
                      require_two: bool = True) -> dict:
    """Compare a ladder with the center-ratio, neck and count laws.

    The ratio test uses difference ratios when three or more centers are
    available, otherwise ratios about ``t_star`` if given.  The count uses
    centers at or below ``count_at``.  For beta >= (n-2k)/2 the tower laws
    do not apply and only a single bubble is expected.
    """
    if beta >= 0.5 * params.gap:
        return {"applicable": False, "note": "exactly one bubble expected", "count": ladder.count(count_at),
                "count_ok": ladder.count(count_at) == 1}
    if require_two and ladder.N < 2:
        raise ValueError(f"spacing law needs at least two centers, found {ladder.N}")
    r = law_ratio(params, beta)
    sr = ladder.spacing_ratios()
    about = ladder.ratios_about(t_star) if t_star is not None else []
    tested = sr if sr else about
    ratio_ok = bool(tested) and all(abs(x - r) <= band for x in tested)
    # necks: t_{2l} ~ -(1 - beta/(n-2k)) r^{l-1} ln lambda
    q = 1.0 - beta / params.gap
    neck_pred = [-q * r**j * ln_lambda for j in range(len(ladder.necks))]
    N = ladder.count(count_at)
    N_pred = predicted_bubble_count(ln_lambda, r)
    return {"applicable": True, "r": r, "spacing_ratios": sr, "ratios_about_fixed_point": about,
            "raw_ratios": ladder.raw_ratios(),
            "ratio_source": "differences" if sr else ("fixed point" if about else "none"),
            "ratio_ok": ratio_ok, "max_deviation": max((abs(x - r) for x in tested), default=float("nan")),
            "necks": ladder.necks, "necks_leading_order": neck_pred,
            "count": N, "count_predicted": N_pred, "count_ok": abs(N - N_pred) <= 1,
            "centers": ladder.centers}


# synthetic towers ----------------------------------------------------------------------

class SyntheticTower(_Trajectory):
    """Soft minimum of bubbles at ``centers`` and optional lines of slope -1 or +1.

    xi = -(1/p) ln sum_j e^{-p f_j}; each f_j is a bubble Xi(t - c_j) + (1/2k) ln K0
    or a line.  Between neighbouring pieces the soft minimum produces one neck, so
    m bubbles and one descending tail give 2m critical points that alternate.
    """

    def __init__(self, params: ProblemParams, centers, K0: float = 1.0, tail=None, p: float = 4.0):
        self.params = params
        self.K = None
        self.p = float(p)
        self.centers = [float(c) for c in centers]
        self.tail = tail  # (slope, intercept) with slope in {-1, +1}
        self._off = standard_bubble(params, 1.0, K0).offset

    def _pieces(self, t):
        t = np.asarray(t, dtype=float)
        f, d, d2 = [], [], []
        for c in self.centers:
            f.append(logcosh(t - c) + self._off)
            d.append(np.tanh(t - c))
            d2.append(1.0 / np.cosh(t - c) ** 2)
        if self.tail is not None:
            s, b = self.tail
            f.append(s * t + b)
            d.append(np.full_like(t, s))
            d2.append(np.zeros_like(t))
        return np.array(f), np.array(d), np.array(d2)

    def _weights(self, f):
        m = np.min(f, axis=0)
        e = np.exp(-self.p * (f - m))
        return m, e / e.sum(axis=0), e.sum(axis=0)

    def xi(self, t):
        f, _, _ = self._pieces(t)
        m, _, s = self._weights(f)
        return m - np.log(s) / self.p

    def xidot(self, t):
        f, d, _ = self._pieces(t)
        _, w, _ = self._weights(f)
        return (w * d).sum(axis=0)

    def xiddot(self, t):
        f, d, d2 = self._pieces(t)
        _, w, _ = self._weights(f)
        mean = (w * d).sum(axis=0)
        return (w * d2).sum(axis=0) - self.p * ((w * d * d).sum(axis=0) - mean**2)

    def psi(self, t):
        return np.arctanh(np.clip(self.xidot(t), -1 + 1e-16, 1 - 1e-16))

    def psidot(self, t):
        xd = self.xidot(t)
        return self.xiddot(t) / (1.0 - xd * xd)


# energy ----------------------------------------------------------------------------

def bubble_energy_closed_form(params: ProblemParams, K0: float) -> float:
    """|S^{n-1}| int e^{-n xi} over a whole standard bubble for K = K0."""
    n, k = params.n, params.k
    offset = 0.5 * math.log(2.0) - math.log(params.binom_nk) / (2 * k) + math.log(K0) / (2 * k)
    log_int = 0.5 * math.log(math.pi) + lgamma(0.5 * n) - lgamma(0.5 * (n + 1))
    return sphere_area(n - 1) * math.exp(log_int - n * offset)


def profile_energy(traj, a: float, b: float, points=None, n_sphere: int | None = None) -> float:
    """|S^{n-1}| int_a^b e^{-n xi(t)} dt, the integral of u^{2n/(n-2)} over e^a < |x| < e^b."""
    n = traj.params.n if n_sphere is None else n_sphere
    f = lambda t: math.exp(-n * float(traj.xi(t)))
    pts = None if points is None else [p for p in points if a < p < b]
    val, _ = quad(f, a, b, points=pts or None, limit=500, epsabs=0.0, epsrel=1e-12)
    return sphere_area(n - 1) * val


def bubble_energy(params: ProblemParams, lam: float, K0: float, half_width: float = 40.0) -> float:
    """Energy of the bubble of scale ``lam`` by quadrature over its profile."""
    b = standard_bubble(params, lam, K0)
    c = -math.log(lam)
    return profile_energy(b, c - half_width, c + half_width, points=[c])


def tower_energy_diag(traj, ladder: BubbleLadder, quantum: float, t_lo: float) -> dict:
    """Energy cut at each neck; each completed bubble should add about one quantum."""
    cuts = ladder.necks
    E = [profile_energy(traj, t_lo, x, points=ladder.centers) for x in cuts]
    n_bub = [sum(1 for c in ladder.centers if c < x) for x in cuts]
    inc = [E[0]] + [E[i] - E[i - 1] for i in range(1, len(E))] if E else []
    per = [e / quantum for e in inc]
    slope = float(np.polyfit(n_bub, E, 1)[0]) if len(E) >= 2 else float("nan")
    return {"cuts": cuts, "energies": E, "bubbles": n_bub, "increments_in_quanta": per,
            "quantum": quantum, "slope": slope,
            "additivity_defect_in_quanta": max((abs(x - 1.0) for x in per), default=float("nan"))}


def energy_growth_diag(ln_lambdas, energies, params: ProblemParams, beta: float, quantum: float,
                       monotone_slack: float = 1e-3) -> dict:
    """Regress energy on ln ln lambda along a family ordered by lambda.

    Monotonicity allows dips of ``monotone_slack`` quanta: a partial bubble at
    the cut moves with lambda and can shift the total by a sliver.
    """
    x = np.asarray(ln_lambdas, dtype=float)
    E = np.asarray(energies, dtype=float)
    if len(x) < 3:
        raise ValueError("family too short: need at least three members")
    if np.any(np.diff(x) <= 0):
        raise ValueError("family must be ordered by increasing lambda")
    if np.any(x <= 1.0):
        raise ValueError("ln lambda must exceed 1")
    lnln = np.log(x)
    slope, icpt = np.polyfit(lnln, E, 1)
    out = {"ln_lambda": x.tolist(), "energy": E.tolist(), "slope": float(slope), "intercept": float(icpt),
           "monotone": bool(np.all(np.diff(E) >= -monotone_slack * quantum)),
           "loglog_ratio": (E / lnln).tolist(), "quantum": quantum}
    if beta < 0.5 * params.gap:
        out["reference_slope"] = quantum / abs(math.log(law_ratio(params, beta)))
    return out
