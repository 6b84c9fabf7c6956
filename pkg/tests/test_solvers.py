import math

import numpy as np
import pytest

from halfeig import (Band, EigenError, EigenOptions, GridFunction, InfSup, Linear, LinearCoeffs,
                     PucciMinus, SolveOptions, build_grid, continuation_sweep, principal_eigenpair,
                     rayleigh_bounds, solve_dirichlet)
from halfeig.config import f_from_expr

LAP1 = Linear(LinearCoeffs(1.0))
PM = PucciMinus(Band(1.0, 2.0))


def discrete_lap_eig(h, L=1.0, k=1):
    """Eigenvalue k of the 3-point Dirichlet Laplacian with spacing h on (0, L)."""
    return 4 / h**2 * math.sin(k * math.pi * h / (2 * L)) ** 2


def test_dirichlet_quadratic_closed_form():
    g = build_grid(1, 0, 1, 99)
    f = GridFunction.from_function(g, lambda x: 2 + 0 * x[:, 0], zero_boundary=True)
    rep = solve_dirichlet(LAP1, 0.0, f)
    x = g.coords[:, 0]
    assert rep.converged
    # the 3-point scheme is exact on quadratics
    assert np.max(np.abs(rep.u.values - x * (1 - x))) < 1e-12
    assert rep.residual_history[0] == pytest.approx(2.0)
    assert rep.residual <= SolveOptions().tol


def test_dirichlet_nonhomogeneous_boundary():
    g = build_grid(1, 0, 1, 19)
    rep = solve_dirichlet(LAP1, 0.0, GridFunction.zeros(g), boundary=[1.0, 3.0])
    x = g.coords[:, 0]
    assert np.max(np.abs(rep.u.values - (1 + 2 * x))) < 1e-12


def test_pucci_minus_below_lambda1_nonnegative(pi_grid):
    f = f_from_expr("sin(1)", pi_grid)
    rep = solve_dirichlet(PM, 0.0, f)
    assert rep.converged and np.all(rep.u.interior >= 0)


def test_window_has_no_converged_restart(pi_grid):
    f = f_from_expr("sin(1)", pi_grid)
    rep = solve_dirichlet(PM, 1.5, f)
    assert not rep.converged
    # the default start set is {0, +bump, -bump, random}
    assert len(rep.attempts) == 4 and not any(a.converged for a in rep.attempts)
    assert rep.residual_floor > 100 * SolveOptions().tol


def test_solve_report_summary_and_multistart(pi_grid):
    f = f_from_expr("bump()", pi_grid)
    rep = solve_dirichlet(PM, 3.9, f, SolveOptions(find_all=True))
    assert rep.converged and len(rep.solutions) >= 1
    text = rep.summary()
    assert "converged: True" in text and "residual history" in text


def test_solve_is_deterministic(pi_grid):
    f = f_from_expr("sin(1)", pi_grid)
    a = solve_dirichlet(PM, 1.5, f, SolveOptions(seed=3, max_iter=10))
    b = solve_dirichlet(PM, 1.5, f, SolveOptions(seed=3, max_iter=10))
    assert np.array_equal(a.u.values, b.u.values)
    assert a.residual_history == b.residual_history


def test_rayleigh_exact_discrete_eigenvector():
    # coarse enough that stencil cancellation (~ eps / (h^2 lam)) stays below 1e-12
    g = build_grid(1, 0, 1, 20)
    phi = GridFunction.from_function(g, lambda x: np.sin(math.pi * x[:, 0]), zero_boundary=True)
    lo, hi = rayleigh_bounds(LAP1, phi)
    ref = discrete_lap_eig(g.h[0])
    assert abs(lo - ref) <= 1e-12 and abs(hi - ref) <= 1e-12
    assert rayleigh_bounds(LAP1, 3 * phi) == pytest.approx((lo, hi), abs=1e-12)


def test_rayleigh_straddles_pi_squared():
    g = build_grid(1, 0, 1, 401)
    phi = GridFunction.from_function(
        g, lambda x: np.sin(math.pi * x[:, 0]) + 0.1 * np.sin(2 * math.pi * x[:, 0]), zero_boundary=True)
    lo, hi = rayleigh_bounds(LAP1, phi)
    assert lo < math.pi**2 < hi


def test_rayleigh_rejects_sign_change():
    g = build_grid(1, 0, 1, 21)
    phi = GridFunction.from_function(g, lambda x: np.sin(2 * math.pi * x[:, 0]), zero_boundary=True)
    with pytest.raises(ValueError):
        rayleigh_bounds(LAP1, phi)


@pytest.mark.parametrize("sign", [1, -1])
def test_laplacian_eigenpair_matches_closed_form(sign):
    g = build_grid(1, 0, 1, 101)
    ep = principal_eigenpair(LAP1, g, sign)
    assert abs(ep.lam - discrete_lap_eig(g.h[0])) < 1e-8
    x = g.interior_coords[:, 0]
    assert np.max(np.abs(ep.phi.interior - sign * np.sin(math.pi * x) / np.max(np.sin(math.pi * x)))) < 1e-6
    assert ep.rayleigh_lo <= ep.lam + 1e-12 and ep.lam <= ep.rayleigh_hi + 1e-12
    assert ep.rayleigh_hi - ep.rayleigh_lo <= 10 * EigenOptions().tol_residual


@pytest.mark.parametrize("sign, expected", [(1, 1.0), (-1, 2.0)])
def test_pucci_minus_half_eigenvalues(pi_grid, sign, expected):
    ep = principal_eigenpair(PM, pi_grid, sign)
    # discrete oracle: gamma or Gamma times the discrete Laplacian eigenvalue on (0, pi)
    ref = expected * discrete_lap_eig(pi_grid.h[0], math.pi)
    assert abs(ep.lam - ref) < 1e-8
    assert np.all(sign * ep.phi.interior > 0)
    assert abs(ep.phi.sup_norm() - 1) <= 1e-12
    assert ep.residual <= 1e-8


def test_min_example_half_eigenvalues():
    op = InfSup(((LinearCoeffs(1.0),), (LinearCoeffs(2.0),)))
    g = build_grid(1, 0, 1, 201)
    ref = discrete_lap_eig(g.h[0])
    assert principal_eigenpair(op, g, 1).lam == pytest.approx(ref, abs=1e-8)
    assert principal_eigenpair(op, g, -1).lam == pytest.approx(2 * ref, abs=1e-8)


def test_2d_laplacian_eigenvalue():
    g = build_grid(2, (0, 0), (math.pi, math.pi), 31)
    op = Linear(LinearCoeffs(((1.0, 0.0), (0.0, 1.0))))
    ref = 2 * discrete_lap_eig(g.h[0], math.pi)
    assert principal_eigenpair(op, g, 1).lam == pytest.approx(ref, abs=1e-8)


def test_eigen_iteration_limit_raises():
    g = build_grid(1, 0, 1, 21)
    with pytest.raises(EigenError) as info:
        principal_eigenpair(LAP1, g, 1, EigenOptions(max_iter=3))
    assert "lambda" in info.value.trace


def test_bad_sign_rejected():
    with pytest.raises(ValueError):
        principal_eigenpair(LAP1, build_grid(1, 0, 1, 5), 0)


def test_continuation_endpoints():
    g = build_grid(1, 0, math.pi, 201)
    tab = continuation_sweep(PM, 5, g)
    assert tab.complete and len(tab.rows) == 5
    d = discrete_lap_eig(g.h[0], math.pi)
    first, last = tab.rows[0], tab.rows[-1]
    assert (first.lambda_plus, first.lambda_minus) == pytest.approx((d, 2 * d), abs=1e-8)
    assert (last.lambda_plus, last.lambda_minus) == pytest.approx((2 * d, 2 * d), abs=1e-8)
    assert tab.max_jump <= 0.5


def test_continuation_of_linear_operator_is_affine_in_s():
    g = build_grid(1, 0, 1, 51)
    tab = continuation_sweep(LAP1, 3, g, Gamma=3.0)
    d = discrete_lap_eig(g.h[0])
    for r in tab.rows:
        assert r.lambda_plus == pytest.approx((1 + 2 * r.s) * d, abs=1e-7)
        assert r.lambda_minus == pytest.approx(r.lambda_plus, abs=1e-7)


def test_continuation_needs_two_steps():
    with pytest.raises(ValueError):
        continuation_sweep(PM, 1, build_grid(1, 0, 1, 5))
