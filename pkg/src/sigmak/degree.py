"""Explicit pole constants and the compactness / degree classification.

C_{n,k}(beta, a, s) and the constants p, q attached to a flat pole with
a < 0 are evaluated from their closed forms through log-gamma.  The
classifier returns the degree table for the axisymmetric problem together
with the compactness and existence verdicts, each carrying provenance
strings so a verdict can be traced to the theorem or table cell it comes
from.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .geometry import ProblemParams
from .specfun import lgamma

__all__ = [
    "PoleData",
    "RegimeVerdict",
    "C_nk",
    "log_C_nk",
    "pole_constants",
    "balance_relation",
    "balance_product",
    "balancing_coefficient",
    "degree_of",
    "classify_regime",
    "BAND_TOL",
]

BAND_TOL = 1e-9

COMPACTNESS = ("compact", "compact-if-balance", "noncompact-family-exists", "unknown")
EXISTENCE = ("guaranteed", "depends-on-K", "obstructed-if-monotone", "unknown")


@dataclass(frozen=True)
class PoleData:
    """Leading pole behaviour K ~ Kpole + a * dist^beta."""

    a: float
    beta: float
    Kpole: float | None = None

    def check_window(self, params: ProblemParams):
        n, k = params.n, params.k
        if not self.a < 0:
            raise ValueError(f"C_nk needs a < 0, got a={self.a}")
        lo = n * (n - 2 * k) / (n + 2 * k)
        if not lo < self.beta < n:
            raise ValueError(f"beta={self.beta} outside the window ({lo}, {n})")
        if self.Kpole is None or not self.Kpole > 0:
            raise ValueError("Kpole must be a positive number")


def _log_gamma_pair(n, beta):
    # ln[Gamma((n-beta)/2) Gamma((n+beta)/2) / (2 Gamma(n))]
    return lgamma(0.5 * (n - beta)) + lgamma(0.5 * (n + beta)) - math.log(2.0) - lgamma(n)


def log_C_nk(params: ProblemParams, pole: PoleData) -> float:
    pole.check_window(params)
    n, k = params.n, params.k
    b, s = pole.beta, pole.Kpole
    inner = (-_log_gamma_pair(n, b) + (n - b) / (2 * k) * math.log(s)
             - math.log(abs(pole.a) * b))
    return -math.log(2.0) + inner / b


def C_nk(params: ProblemParams, pole: PoleData) -> float:
    """(1/2) [2 Gamma(n) s^{(n-beta)/2k} / (|a| beta Gamma((n-beta)/2) Gamma((n+beta)/2))]^{1/beta}."""
    return math.exp(log_C_nk(params, pole))


def pole_constants(params: ProblemParams, pole: PoleData) -> tuple[float, float]:
    """The pair (p, q) for one pole, from their closed forms."""
    pole.check_window(params)
    n, k = params.n, params.k
    b, s = pole.beta, pole.Kpole
    lb = math.log(params.binom_nk)
    log_bracket_p = ((b + 0.5 * (n + 2 * k)) * math.log(2.0) + (n - 2 * k) / (2 * k) * lb
                     + _log_gamma_pair(n, b) + math.log(abs(pole.a) * b) - n / (2 * k) * math.log(s))
    p = -log_bracket_p / (n - 2 * k)
    q = -((n + 2 * k) / (2 * (n - 2 * k)) * math.log(2.0) + lb / (2 * k) - math.log(s) / (2 * k))
    return p, q


def balance_relation(params: ProblemParams, pole1: PoleData, pole2: PoleData) -> float:
    """((n-2k)/beta2) p2 - q2 + ((n-2k)/beta1) p1 - q1.

    On the set 1/beta1 + 1/beta2 = 2/(n-2k) this equals ln(C_(1) C_(2)); off it
    the powers of 2 and C(n,k) no longer cancel.
    """
    g = params.n - 2 * params.k
    p1, q1 = pole_constants(params, pole1)
    p2, q2 = pole_constants(params, pole2)
    return g / pole2.beta * p2 - q2 + g / pole1.beta * p1 - q1


def balance_product(params: ProblemParams, pole1: PoleData, pole2: PoleData) -> float:
    return C_nk(params, pole1) * C_nk(params, pole2)


def balancing_coefficient(params: ProblemParams, pole1: PoleData, beta2: float, Kpi: float) -> float:
    """The a2 < 0 for which C_(1) C_(2) = 1 given the first pole."""
    n, k = params.n, params.k
    target = -log_C_nk(params, pole1)  # ln C_(2)
    inner = (target + math.log(2.0)) * beta2
    log_abs_a = -_log_gamma_pair(n, beta2) + (n - beta2) / (2 * k) * math.log(Kpi) - math.log(beta2) - inner
    return -math.exp(log_abs_a)


@dataclass
class RegimeVerdict:
    compactness: str
    degree: int | None  # None stands for "undefined"
    existence: str
    provenance: list[str] = field(default_factory=list)
    reason: str = ""
    boundary: bool = False
    product: float | None = None

    def __post_init__(self):
        if self.compactness not in COMPACTNESS:
            raise ValueError(f"bad compactness {self.compactness!r}")
        if self.existence not in EXISTENCE:
            raise ValueError(f"bad existence {self.existence!r}")
        if self.degree == -1 and self.existence != "guaranteed":
            raise ValueError("degree -1 must come with guaranteed existence")

    @property
    def degree_label(self) -> str:
        return "undefined" if self.degree is None else str(self.degree)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["degree"] = self.degree_label
        return d


def _validate(params, a1, a2, beta1, beta2):
    n = params.n
    for a, b, name in ((a1, beta1, "1"), (a2, beta2, "2")):
        if a == 0 or not math.isfinite(a):
            raise ValueError(f"a{name} must be a nonzero real")
        if not 2 <= b < n:
            raise ValueError(f"beta{name}={b} outside [2, {n})")


def _sum_side(params, beta1, beta2, tol):
    s = 1.0 / beta1 + 1.0 / beta2
    ref = 2.0 / (params.n - 2 * params.k)
    if abs(s - ref) <= tol:
        return 0
    return -1 if s < ref else 1


def degree_of(params: ProblemParams, a1, a2, beta1, beta2, K0=None, Kpi=None,
              tol: float = BAND_TOL) -> RegimeVerdict:
    """Total degree under the compactness hypotheses, with its case label."""
    _validate(params, a1, a2, beta1, beta2)
    half = 0.5 * (params.n - 2 * params.k)
    for a, b, i in ((a1, beta1, 1), (a2, beta2, 2)):
        if b < half and a < 0:
            return RegimeVerdict("unknown", None, "unknown", ["Theorem 1.1 hypothesis (i)"],
                                 reason=f"beta{i} < (n-2k)/2 with a{i} < 0: compactness not asserted")
    if a1 > 0 and a2 > 0:
        return RegimeVerdict("compact", -1, "guaranteed", ["Theorem 1.1", "Theorem 1.2 case 1", "Table 1(a)"])
    if a1 * a2 < 0:
        return RegimeVerdict("compact", 0, "obstructed-if-monotone",
                             ["Theorem 1.1", "Theorem 1.2 case 2", "Table 1(b)", "Kazdan-Warner identity"])
    side = _sum_side(params, beta1, beta2, tol)
    if side < 0:
        return RegimeVerdict("compact", -1, "guaranteed", ["Theorem 1.1", "Theorem 1.2 case 3", "Table 1(c) left"])
    if side > 0:
        return RegimeVerdict("compact", 0, "depends-on-K", ["Theorem 1.1", "Theorem 1.2 case 6", "Table 1(c) right"])
    prov = ["Theorem 1.1", "Table 1(c) middle"]
    if K0 is None or Kpi is None:
        return RegimeVerdict("compact-if-balance", None, "depends-on-K", prov,
                             reason="pole values K(0), K(pi) needed to evaluate C_(1) C_(2)")
    try:
        P = balance_product(params, PoleData(a1, beta1, K0), PoleData(a2, beta2, Kpi))
    except ValueError as exc:
        return RegimeVerdict("unknown", None, "unknown", prov, reason=f"C_nk undefined: {exc}")
    if abs(P - 1.0) <= tol:
        return RegimeVerdict("unknown", None, "unknown", prov + ["balance condition fails"],
                             reason="C_(1) C_(2) = 1 within the tolerance band", boundary=True, product=P)
    if P > 1:
        return RegimeVerdict("compact", -1, "guaranteed", prov + ["Theorem 1.2 case 4"], product=P)
    return RegimeVerdict("compact", 0, "depends-on-K", prov + ["Theorem 1.2 case 5"], product=P)


def classify_regime(params: ProblemParams, a1, a2, beta1, beta2, K0=None, Kpi=None,
                    tol: float = BAND_TOL) -> RegimeVerdict:
    """Full table verdict, including the sub-threshold non-compact regime."""
    _validate(params, a1, a2, beta1, beta2)
    half = 0.5 * (params.n - 2 * params.k)
    low1, low2 = (beta1 < half and a1 < 0), (beta2 < half and a2 < 0)
    if low1 or low2:
        if a1 < 0 and a2 < 0 and abs(beta1 - beta2) <= tol * max(1.0, beta1):
            return RegimeVerdict("noncompact-family-exists", None, "depends-on-K", ["Theorem 1.5"],
                                 reason="beta1 = beta2 < (n-2k)/2 with a1, a2 < 0")
        return RegimeVerdict("unknown", None, "unknown", ["outside Theorems 1.1 and 1.5"],
                             reason="a negative pole below (n-2k)/2 not covered by the table")
    return degree_of(params, a1, a2, beta1, beta2, K0, Kpi, tol)
