import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sigmak.degree import (
    PoleData,
    RegimeVerdict,
    C_nk,
    balance_product,
    balance_relation,
    balancing_coefficient,
    classify_regime,
    degree_of,
    pole_constants,
)
from sigmak.geometry import ProblemParams
from sigmak.specfun import gamma

P52 = ProblemParams(5, 2)
P72 = ProblemParams(7, 2)
P92 = ProblemParams(9, 2)


def _C_oracle(n, k, beta, a, s):
    # the displayed closed form, evaluated with plain gamma values
    inner = 2 * gamma(n) * s ** ((n - beta) / (2 * k)) / (abs(a) * beta * gamma((n - beta) / 2) * gamma((n + beta) / 2))
    return 0.5 * inner ** (1 / beta)


def test_C_nk_hand_value():
    assert C_nk(P52, PoleData(-1.0, 1.0, 1.0)) == pytest.approx(12.0, rel=1e-13)


@given(st.floats(0.02, 0.98), st.floats(0.05, 20.0), st.floats(0.1, 10.0))
def test_C_nk_matches_gamma_oracle(frac, absa, s):
    lo = 7 * 3 / 11
    beta = lo + frac * (7 - lo)
    assert C_nk(P72, PoleData(-absa, beta, s)) == pytest.approx(_C_oracle(7, 2, beta, -absa, s), rel=1e-12)


def test_C_nk_homogeneity():
    for beta in (2.5, 3.0, 4.2):
        c1 = C_nk(P72, PoleData(-0.7, beta, 1.3))
        c2 = C_nk(P72, PoleData(-1.4, beta, 1.3))
        assert c2 / c1 == pytest.approx(2 ** (-1 / beta), rel=1e-14)


def test_C_nk_window():
    with pytest.raises(ValueError):
        C_nk(P72, PoleData(1.0, 3.0, 1.0))
    with pytest.raises(ValueError):
        C_nk(P72, PoleData(-1.0, 1.5, 1.0))
    with pytest.raises(ValueError):
        C_nk(P72, PoleData(-1.0, 7.0, 1.0))


def test_C_nk_continuous_in_beta():
    betas = np.linspace(2.0, 6.9, 4000)
    logs = np.log([C_nk(P72, PoleData(-1.0, b, 2.0)) for b in betas])
    assert np.max(np.abs(np.diff(logs))) < 5e-3


def test_q_dilation_and_p_finite():
    _, q1 = pole_constants(P72, PoleData(-1.0, 3.0, 1.0))
    _, q4 = pole_constants(P72, PoleData(-1.0, 3.0, 4.0))
    assert q4 - q1 == pytest.approx(math.log(4.0) / 4, rel=1e-13)
    p, _ = pole_constants(P72, PoleData(-1.0, 3.0, 1.0))
    assert math.isfinite(p)


def test_balance_relation_iff_product_one():
    # admissible pairs sit on the equality set 1/b1 + 1/b2 = 2/(n-2k), where the relation is ln(C1 C2)
    rng = np.random.default_rng(11)
    hits = 0
    for _ in range(100):
        b1 = rng.uniform(2.0, 6.0)
        b2 = 1.0 / (2.0 / 3.0 - 1.0 / b1)
        p1 = PoleData(-rng.uniform(0.05, 5), b1, rng.uniform(0.2, 5))
        K2 = rng.uniform(0.2, 5)
        if rng.random() < 0.5:
            a2 = balancing_coefficient(P72, p1, b2, K2)
        else:
            a2 = -rng.uniform(0.05, 5)
        p2 = PoleData(a2, b2, K2)
        rel = balance_relation(P72, p1, p2)
        prod = balance_product(P72, p1, p2)
        assert (abs(rel) < 1e-10) == (abs(prod - 1) < 1e-10)
        assert rel == pytest.approx(math.log(prod), abs=1e-12)
        hits += abs(rel) < 1e-10
    assert 20 < hits < 80


def test_balance_relation_off_the_equality_set():
    # away from 1/b1 + 1/b2 = 2/(n-2k) the relation picks up the exponent terms and is not ln(C1 C2)
    p1, p2 = PoleData(-1.0, 2.5, 1.0), PoleData(-1.0, 4.0, 1.0)
    assert abs(balance_relation(P72, p1, p2) - math.log(balance_product(P72, p1, p2))) > 1e-3


def test_verdict_invariant():
    with pytest.raises(ValueError):
        RegimeVerdict("compact", -1, "depends-on-K")


def test_degree_examples():
    assert degree_of(P72, 1.0, 1.0, 3.0, 3.0).degree == -1
    assert degree_of(P72, 1.0, 1.0, 3.0, 3.0).existence == "guaranteed"
    assert degree_of(P72, -1.0, 1.0, 3.0, 3.0).degree == 0
    # equality case 1/b1 + 1/b2 = 2/(n-2k) = 2/3 with b1 = b2 = 3
    assert degree_of(P72, -0.01, -0.01, 3.0, 3.0, 1.0, 1.0).product > 1
    assert degree_of(P72, -0.01, -0.01, 3.0, 3.0, 1.0, 1.0).degree == -1
    assert degree_of(P72, -50.0, -50.0, 3.0, 3.0, 1.0, 1.0).degree == 0
    assert degree_of(P72, -1.0, -1.0, 3.0, 3.0).compactness == "compact-if-balance"


def test_classify_examples():
    v = classify_regime(P92, -1.0, -1.0, 2.0, 2.0)
    assert v.compactness == "noncompact-family-exists"
    v = classify_regime(P72, 0.5, 0.5, 3.0, 3.0, 1.0, 1.0)
    assert (v.compactness, v.degree, v.existence) == ("compact", -1, "guaranteed")
    v = classify_regime(P72, -50.0, -50.0, 3.0, 3.0, 1.0, 1.0)
    assert (v.compactness, v.degree) == ("compact", 0)


def test_boundary_is_unknown():
    p1 = PoleData(-0.3, 3.0, 1.0)
    a2 = balancing_coefficient(P72, p1, 3.0, 1.0)
    v = degree_of(P72, -0.3, a2, 3.0, 3.0, 1.0, 1.0)
    assert v.boundary and v.degree is None and v.compactness == "unknown"


# exhaustive table: every sign pattern against every exponent side, n = 9, k = 2 (gap 5)
BETAS = {"low": 2.0, "half": 2.5, "sum<": 3.5, "sum=": 5.0, "sum>": 6.0}
SIGNS = {"+": 0.7, "-": -0.7}


def _expected(a1, a2, b1, b2, K0, Kpi):
    half = 2.5
    if (b1 < half and a1 < 0) or (b2 < half and a2 < 0):
        if a1 < 0 and a2 < 0 and b1 == b2:
            return ("noncompact-family-exists", None)
        return ("unknown", None)
    if a1 > 0 and a2 > 0:
        return ("compact", -1)
    if a1 * a2 < 0:
        return ("compact", 0)
    s = 1 / b1 + 1 / b2
    if abs(s - 0.4) < 1e-12:
        P = _C_oracle(9, 2, b1, a1, K0) * _C_oracle(9, 2, b2, a2, Kpi)
        if abs(P - 1) < 1e-9:
            return ("unknown", None)
        return ("compact", -1) if P > 1 else ("compact", 0)
    return ("compact", -1) if s < 0.4 else ("compact", 0)


CELLS = list(itertools.product(SIGNS, SIGNS, BETAS, BETAS))


@pytest.mark.parametrize("s1, s2, e1, e2", CELLS)
def test_table_cells_and_pole_swap(s1, s2, e1, e2):
    a1, a2, b1, b2 = SIGNS[s1], SIGNS[s2], BETAS[e1], BETAS[e2]
    for K0, Kpi in ((1.0, 1.0), (0.01, 0.02), (5.0, 3.0)):
        v = classify_regime(P92, a1, a2, b1, b2, K0, Kpi)
        assert (v.compactness, v.degree) == _expected(a1, a2, b1, b2, K0, Kpi)
        w = classify_regime(P92, a2, a1, b2, b1, Kpi, K0)
        assert (w.compactness, w.degree, w.existence) == (v.compactness, v.degree, v.existence)
        if v.degree == -1:
            assert v.existence == "guaranteed"
        assert v.provenance


def test_equality_cells_cover_both_sides():
    seen = set()
    for K0 in np.logspace(-3, 3, 13):
        v = classify_regime(P92, -0.7, -0.7, 5.0, 5.0, K0, K0)
        seen.add(v.degree)
    assert {-1, 0} <= seen
