import math

import pytest

from halfeig import Band, InfSup, Linear, LinearCoeffs, PucciMinus, lambda2_scan_1d, shoot_1d, shooting_principal
from halfeig.shooting import _Members1D, shoot_batch

LAP1 = Linear(LinearCoeffs(1.0))
PM = PucciMinus(Band(1.0, 2.0))


@pytest.mark.parametrize("op, lam, domain, zeros", [
    (LAP1, math.pi**2, (0, 1), 0),
    (LAP1, 4 * math.pi**2, (0, 1), 1),
    (PM, 1.0, (0, math.pi), 0),
])
def test_shoot_hits_eigenvalues(op, lam, domain, zeros):
    end, count = shoot_1d(op, lam, domain, 1.0)
    assert abs(end) < 1e-8
    assert count == zeros


def test_shoot_matches_closed_form_off_eigenvalue():
    lam = 5.0
    end, _ = shoot_1d(LAP1, lam, (0, 1), 2.0)
    k = math.sqrt(lam)
    assert end == pytest.approx(2 * math.sin(k) / k, abs=1e-10)


def test_bisection_agrees_with_exact_inversion():
    op = InfSup(((LinearCoeffs(1.0, (0.5,), 0.2), LinearCoeffs(2.0, (-0.3,))),
                 (LinearCoeffs(1.5, None, -0.4),)))
    e1, c1 = shoot_1d(op, 3.0, (0, 2), 1.0, n_steps=200)
    e2, c2 = shoot_1d(op, 3.0, (0, 2), 1.0, n_steps=200, method="bisection")
    assert e1 == pytest.approx(e2, abs=1e-10) and c1 == c2


def test_bisection_bracket_failure():
    mem = _Members1D(PM)
    mem.gamma = mem.Gamma = 10.0  # pretend the band is far narrower than the operator's
    with pytest.raises(ValueError, match="bracket"):
        shoot_batch(PM, [1.0], (0, 1), 1.0, n_steps=10, method="bisection", _members=mem)


def test_shooting_rejects_2d_operator():
    with pytest.raises(ValueError):
        shoot_1d(Linear(LinearCoeffs(((1.0, 0.0), (0.0, 1.0)))), 1.0, (0, 1))


def test_shooting_principal_pucci_minus():
    pr = shooting_principal(PM, (0, math.pi))
    assert pr["plus"] == pytest.approx(1.0, abs=1e-7)
    assert pr["minus"] == pytest.approx(2.0, abs=1e-7)


def test_lambda2_laplacian():
    res = lambda2_scan_1d(LAP1, (0, 1), (10, 50), lambda1=(math.pi**2, math.pi**2))
    assert res.lambda2_estimate == pytest.approx(4 * math.pi**2, abs=1e-6)
    assert res.gap_certified
    assert res.lambda2_estimate > res.lambda1_max


def test_lambda2_pucci_minus_gap():
    res = lambda2_scan_1d(PM, (0, math.pi), (2.01, 12), lambda1=(1.0, 2.0))
    # P- second half-eigenvalue: sign-changing eigenfunction with one concave and one convex lobe,
    # lobe lengths pi/sqrt(lam) and pi*sqrt(2/lam) summing to pi
    ref = (1 + math.sqrt(2)) ** 2
    assert res.lambda2_estimate == pytest.approx(ref, abs=1e-6)
    assert res.gap_certified and res.gap >= 0.05


def test_lambda2_range_below_eigenvalues_is_empty():
    res = lambda2_scan_1d(LAP1, (0, 1), (10, 30), lambda1=(math.pi**2, math.pi**2), resolution=50)
    assert res.eigenvalues == [] and res.lambda2_estimate is None
    assert set(res.outcomes) == {"solved"}


@pytest.mark.parametrize("rng", [(5, 5), (12, 3)])
def test_lambda2_empty_range(rng):
    with pytest.raises(ValueError):
        lambda2_scan_1d(LAP1, (0, 1), rng, lambda1=(1.0, 1.0))


def test_lambda2_range_must_start_above_lambda1():
    with pytest.raises(ValueError):
        lambda2_scan_1d(LAP1, (0, 1), (5, 50), lambda1=(math.pi**2, math.pi**2))
