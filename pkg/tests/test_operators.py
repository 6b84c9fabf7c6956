import numpy as np
import pytest

from conftest import corner_oracle
from halfeig import (Band, DimensionError, Homotopy, InfSup, Jet, Linear, LinearCoeffs,
                     PucciMinus, PucciPlus, Shift, check_homogeneity, check_structure, evaluate,
                     flatten, pucci_minus, pucci_plus, reflect, star_envelope)
from halfeig.operators import random_jets, sym_matrix

BAND = Band(1.0, 2.0)


@pytest.mark.parametrize("M, expected", [
    (np.zeros((2, 2)), 0.0),
    (np.diag([1.0, -1.0]), 1.0),
    (-np.eye(2), 4.0),
])
def test_pucci_plus_examples(M, expected):
    assert pucci_plus(M, BAND) == pytest.approx(expected, abs=1e-14)
    assert corner_oracle(M, BAND, "plus") == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("M, expected", [
    (np.zeros((2, 2)), 0.0),
    (np.eye(2), -4.0),
    (np.diag([1.0, -1.0]), -1.0),
])
def test_pucci_minus_examples(M, expected):
    assert pucci_minus(M, BAND) == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize("n", [1, 2])
def test_pucci_matches_corner_oracle(n):
    rng = np.random.default_rng(n)
    for _ in range(500):
        R = rng.normal(size=(n, n)) * rng.uniform(0.1, 10)
        M = 0.5 * (R + R.T)
        g = rng.uniform(0.1, 2)
        band = Band(g, g * rng.uniform(1, 5))
        assert abs(pucci_plus(M, band) - corner_oracle(M, band, "plus")) < 1e-10
        assert abs(pucci_minus(M, band) - corner_oracle(M, band, "minus")) < 1e-10
        assert pucci_minus(M, band) == -pucci_plus(-M, band)


def test_pucci_stacked_input():
    rng = np.random.default_rng(3)
    R = rng.normal(size=(50, 2, 2))
    Ms = 0.5 * (R + np.swapaxes(R, 1, 2))
    stacked = pucci_plus(Ms, BAND)
    assert np.allclose(stacked, [pucci_plus(M, BAND) for M in Ms], atol=1e-13)


def test_sym_matrix_rejects_asymmetric_and_3d():
    with pytest.raises(ValueError):
        sym_matrix([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises((ValueError, DimensionError)):
        sym_matrix(np.eye(3))


@pytest.mark.parametrize("kw", [dict(gamma=0.0, Gamma=1.0), dict(gamma=2.0, Gamma=1.0),
                                dict(gamma=1.0, Gamma=2.0, delta1=-1.0)])
def test_band_validation(kw):
    with pytest.raises(ValueError):
        Band(**kw)


def test_linear_eval_example():
    op = Linear(LinearCoeffs(1.0))
    assert evaluate(op, Jet([[2.0]], [0.0], 0.0, [0.5])) == -2.0


def test_linear_full_coefficients():
    op = Linear(LinearCoeffs(((2.0, 0.5), (0.5, 1.0)), (1.0, -2.0), 3.0))
    jet = Jet([[1.0, 2.0], [2.0, -1.0]], [0.5, 0.25], 2.0, [0.0, 0.0])
    expected = -(2.0 * 1.0 + 2 * 0.5 * 2.0 + 1.0 * -1.0) + (0.5 - 0.5) + 6.0
    assert evaluate(op, jet) == pytest.approx(expected, abs=1e-14)


def test_min_example_eval():
    op = InfSup(((LinearCoeffs(1.0),), (LinearCoeffs(2.0),)))
    assert evaluate(op, Jet(-np.eye(2), [0, 0], 0, [0, 0])) == 2.0


def test_homotopy_endpoint_is_scaled_laplacian():
    op = Homotopy(PucciMinus(BAND), 1.0, 2.0)
    M = np.array([[0.3, -1.2], [-1.2, 2.5]])
    assert evaluate(op, Jet(M, [0, 0], 0, [0, 0])) == pytest.approx(-2 * np.trace(M), abs=1e-14)


def test_homotopy_rejects_s_outside_unit_interval():
    with pytest.raises(ValueError):
        Homotopy(PucciMinus(BAND), 1.5, 2.0)


def test_shift_consistency():
    op = Shift(PucciPlus(BAND), 0.7)
    for jet in random_jets(np.random.default_rng(0), 2, 20):
        assert evaluate(op, jet) == evaluate(PucciPlus(BAND), jet) - 0.7 * jet.z


def test_dimension_mismatch():
    op = Linear(LinearCoeffs(((1.0, 0.0), (0.0, 1.0))))
    with pytest.raises(DimensionError):
        evaluate(op, Jet([[1.0]], [0.0], 0.0, [0.0]))


def test_infsup_needs_nonempty_families():
    with pytest.raises(ValueError):
        InfSup(())
    with pytest.raises(ValueError):
        InfSup(((),))


def test_star_envelope_of_pure_sup_is_itself():
    op = InfSup(((LinearCoeffs(1.0), LinearCoeffs(2.0, (0.5,), 0.1)),))
    up = star_envelope(op, "upper")
    for jet in random_jets(np.random.default_rng(1), 1, 50):
        assert evaluate(up, jet) == evaluate(op, jet)


def test_star_envelope_of_min_family():
    op = InfSup(((LinearCoeffs(1.0),), (LinearCoeffs(2.0),)))
    up = star_envelope(op, "upper")
    for jet in random_jets(np.random.default_rng(2), 2, 50):
        tr = float(np.trace(jet.M))
        assert evaluate(up, jet) == pytest.approx(max(-tr, -2 * tr), abs=1e-13)
    assert evaluate(up, Jet.zero(2)) == 0.0


def test_star_envelope_rejects_non_infsup():
    with pytest.raises(TypeError):
        star_envelope(PucciMinus(BAND), "upper")


def test_reflect_pucci_and_envelopes():
    jets = random_jets(np.random.default_rng(4), 2, 30)
    for op in (PucciMinus(BAND), InfSup(((LinearCoeffs(1.0), LinearCoeffs(2.0)),))):
        r = reflect(op)
        for j in jets:
            assert evaluate(r, j) == pytest.approx(-evaluate(op, -j), abs=1e-13)


@pytest.mark.parametrize("dim", [1, 2])
def test_flatten_pucci_exact_on_frame_diagonal_hessians(dim):
    rng = np.random.default_rng(dim)
    for op in (PucciPlus(BAND), PucciMinus(BAND)):
        fams = flatten(op, dim)
        for _ in range(50):
            if dim == 1:
                M = np.array([[rng.normal()]])
            else:
                d = np.diag(rng.normal(size=2))
                M = d if rng.random() < 0.5 else np.array([[d[0, 0] + d[1, 1], d[0, 0] - d[1, 1]],
                                                           [d[0, 0] - d[1, 1], d[0, 0] + d[1, 1]]]) / 2
            jet = Jet(M, np.zeros(dim), 0.0, np.zeros(dim))
            flat = min(max(m.value(jet) for m in fam) for fam in fams)
            assert flat == pytest.approx(evaluate(op, jet), abs=1e-12)


@pytest.mark.parametrize("t", [0.0, 0.5, 1.0, 2.0, 10.0])
def test_check_homogeneity_pucci(t):
    jets = random_jets(np.random.default_rng(5), 2, 20)
    rep = check_homogeneity(PucciPlus(BAND), jets, [t])
    assert rep.passed and rep.counterexample is None


def test_check_homogeneity_detects_non_homogeneous():
    class Affine(PucciPlus):
        pass

    import halfeig.operators as ops
    orig = ops.pucci_plus
    try:
        ops.pucci_plus = lambda M, band: orig(M, band) + 1.0
        rep = check_homogeneity(Affine(BAND), random_jets(np.random.default_rng(0), 1, 3), [0.0])
    finally:
        ops.pucci_plus = orig
    assert not rep.passed
    assert rep.counterexample["check"] == "homogeneity"


def test_check_structure_passes_for_in_band_operators():
    rng = np.random.default_rng(6)
    x = np.zeros(2)
    pairs = list(zip(random_jets(rng, 2, 100, x=x), random_jets(rng, 2, 100, x=x)))
    for op in (PucciMinus(BAND), PucciPlus(BAND), Linear(LinearCoeffs(((1.5, 0.2), (0.2, 1.2))))):
        assert check_structure(op, BAND, pairs).passed
    j = pairs[0][0]
    assert check_structure(PucciMinus(BAND), BAND, [(j, j)]).passed


def test_check_structure_fails_with_too_narrow_band():
    rng = np.random.default_rng(7)
    x = np.zeros(1)
    pairs = list(zip(random_jets(rng, 1, 50, x=x), random_jets(rng, 1, 50, x=x)))
    rep = check_structure(PucciMinus(BAND), Band(1.2, 1.5), pairs)
    assert not rep.passed and rep.counterexample is not None


def test_band_of_composites():
    op = InfSup(((LinearCoeffs(1.0, (0.5,), 0.2), LinearCoeffs(3.0)), (LinearCoeffs(0.5, None, -1.0),)))
    b = op.band
    assert (b.gamma, b.Gamma, b.delta1, b.delta0) == (0.5, 3.0, 0.5, 1.0)
    assert Shift(op, 2.0).band.delta0 >= 1.0
