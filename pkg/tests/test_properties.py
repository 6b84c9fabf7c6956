"""Hypothesis property tests for the operator algebra invariants."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from halfeig import (Band, Homotopy, InfSup, Jet, Linear, LinearCoeffs, PucciMinus, PucciPlus,
                     Shift, evaluate, pucci_minus, pucci_plus, star_envelope)

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


@st.composite
def bands(draw):
    g = draw(st.floats(0.05, 5))
    return Band(g, g * draw(st.floats(1, 10)))


@st.composite
def sym2(draw):
    a, b, d = draw(finite), draw(finite), draw(finite)
    return np.array([[a, b], [b, d]])


@st.composite
def jets(draw, n=2, x=None):
    if n == 1:
        M = np.array([[draw(finite)]])
    else:
        M = draw(sym2())
    p = np.array([draw(finite) for _ in range(n)])
    return Jet(M, p, draw(finite), np.zeros(n) if x is None else x)


GENUINE = InfSup((
    (LinearCoeffs(((1.0, 0.0), (0.0, 2.0)), (0.5, 0.0), 0.3), LinearCoeffs(1.5, (0.0, -0.4))),
    (LinearCoeffs(((2.0, 0.3), (0.3, 1.0))), LinearCoeffs(1.2, None, -0.2)),
))

ZOO = [
    PucciPlus(Band(1, 2)), PucciMinus(Band(1, 2)),
    Linear(LinearCoeffs(((1.5, 0.2), (0.2, 1.0)), (0.3, -0.1), 0.4)),
    GENUINE, Shift(GENUINE, 0.8), Homotopy(PucciMinus(Band(1, 2)), 0.3, 2.0),
    star_envelope(GENUINE, "upper"), star_envelope(GENUINE, "lower"),
]


@settings(max_examples=300, deadline=None)
@given(sym2(), bands())
def test_duality(M, band):
    assert abs(pucci_plus(M, band) + pucci_minus(-M, band)) <= 1e-12 * (1 + np.abs(M).max())


@settings(max_examples=300, deadline=None)
@given(sym2(), bands(), st.floats(0, np.pi), st.floats(0, 1), st.floats(0, 1))
def test_extremality(M, band, theta, s1, s2):
    c, s = np.cos(theta), np.sin(theta)
    Q = np.array([[c, -s], [s, c]])
    ev = band.gamma + (band.Gamma - band.gamma) * np.array([s1, s2])
    A = Q @ np.diag(ev) @ Q.T
    v = -np.trace(A @ M)
    tol = 1e-10 * (1 + band.Gamma * np.abs(M).max())
    assert pucci_minus(M, band) - tol <= v <= pucci_plus(M, band) + tol


@settings(max_examples=100, deadline=None)
@given(jets(), st.sampled_from([0.0, 0.5, 1.0, 2.0, 10.0]), st.integers(0, len(ZOO) - 1))
def test_homogeneity_all_variants(jet, t, k):
    op = ZOO[k]
    lhs, rhs = evaluate(op, jet.scaled(t)), t * evaluate(op, jet)
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(rhs)) + 1e-12 * t * 50


@settings(max_examples=200, deadline=None)
@given(jets(), jets())
def test_envelope_sandwich(j1, j2):
    up, low = star_envelope(GENUINE, "upper"), star_envelope(GENUINE, "lower")
    d = evaluate(GENUINE, j1) - evaluate(GENUINE, j2)
    tol = 1e-10 * (1 + abs(d))
    assert evaluate(low, j1 - j2) - tol <= d <= evaluate(up, j1 - j2) + tol


@settings(max_examples=200, deadline=None)
@given(jets(), jets())
def test_envelope_convexity(j1, j2):
    up, low = star_envelope(GENUINE, "upper"), star_envelope(GENUINE, "lower")
    mid = (j1 + j2).scaled(0.5)
    tol = 1e-10 * (1 + abs(evaluate(up, j1)) + abs(evaluate(up, j2)))
    assert evaluate(up, mid) <= 0.5 * evaluate(up, j1) + 0.5 * evaluate(up, j2) + tol
    assert evaluate(low, mid) >= 0.5 * evaluate(low, j1) + 0.5 * evaluate(low, j2) - tol


@settings(max_examples=200, deadline=None)
@given(jets())
def test_envelope_reflection_exact(j):
    up, low = star_envelope(GENUINE, "upper"), star_envelope(GENUINE, "lower")
    assert evaluate(up, j) == -evaluate(low, -j)


@settings(max_examples=200, deadline=None)
@given(jets(), st.floats(-10, 10), st.integers(0, len(ZOO) - 1))
def test_shift_consistency(jet, lam, k):
    op = ZOO[k]
    assert evaluate(Shift(op, lam), jet) == evaluate(op, jet) - lam * jet.z


@settings(max_examples=200, deadline=None)
@given(jets(), jets(), st.integers(0, len(ZOO) - 1))
def test_structure_against_declared_band(j1, j2, k):
    op = ZOO[k]
    b = op.band
    d = j1 - j2
    diff = evaluate(op, j1) - evaluate(op, j2)
    first = b.delta1 * np.linalg.norm(d.p) + b.delta0 * abs(d.z)
    tol = 1e-9 * (1 + np.abs(d.M).max() + abs(diff))
    assert pucci_minus(d.M, b) - first - tol <= diff <= pucci_plus(d.M, b) + first + tol
