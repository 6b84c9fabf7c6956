"""Discrete checks of the structural properties, and the property suite.

Each check returns a :class:`PropertyReport`. A failed report carries a
counterexample of the form ``{"check": name, "args": {...}}`` with every
input in plain serializable form; :func:`replay` rebuilds the inputs and
re-runs the check.
"""

from __future__ import annotations

import math
from typing import Callable, Optional, Sequence

import numpy as np

from .grammar import dump_operator, load_operator
from .grid import Grid, GridFunction
from .operators import (Band, InfSup, Jet, Linear, LinearCoeffs, Operator, PucciMinus, PucciPlus,
                        Shift, Homotopy, StarEnvelope, SubstarEnvelope, check_homogeneity,
                        check_structure, evaluate, random_jets, star_envelope)
from .reports import PropertyReport
from .scheme import check_monotone
from .solvers import (EigenError, EigenOptions, SolveOptions, principal_eigenpair, solve_dirichlet)

# --------------------------------------------------------------------------
# serialization of check inputs


def ser_grid(grid: Grid) -> dict:
    return {"dim": grid.dim, "lo": list(grid.lo), "hi": list(grid.hi), "n": list(grid.n)}


def de_grid(d: dict) -> Grid:
    return Grid(d["dim"], tuple(d["lo"]), tuple(d["hi"]), tuple(d["n"]))


def ser_gf(u: GridFunction) -> dict:
    return {"grid": ser_grid(u.grid), "values": u.values.tolist()}


def de_gf(d: dict) -> GridFunction:
    return GridFunction(de_grid(d["grid"]), d["values"])


def ser_op(op: Operator) -> str:
    return dump_operator(op)


def _cx(check: str, **args) -> dict:
    return {"check": check, "args": args}


# --------------------------------------------------------------------------
# operator-level envelope properties


def check_envelope_sandwich(op: InfSup, pairs: Sequence[tuple[Jet, Jet]], tol: float = 1e-10) -> PropertyReport:
    """``lower(j1 - j2) <= F(j1) - F(j2) <= upper(j1 - j2)``."""
    up, low = star_envelope(op, "upper"), star_envelope(op, "lower")
    worst, fails = math.inf, []
    for j1, j2 in pairs:
        d = j1 - j2
        diff = evaluate(op, j1) - evaluate(op, j2)
        slack = min(diff - evaluate(low, d) + tol, evaluate(up, d) - diff + tol)
        worst = min(worst, slack)
        if slack < 0:
            fails.append((j1, j2))
    cx = None
    if fails:
        cx = _cx("envelope_sandwich", op=ser_op(op), pairs=[[a.to_dict(), b.to_dict()] for a, b in fails[:5]], tol=tol)
    return PropertyReport("envelope_sandwich", not fails, worst, cx, details={"pairs": len(pairs)})


def check_envelope_convexity(op: InfSup, pairs: Sequence[tuple[Jet, Jet]], tol: float = 1e-10) -> PropertyReport:
    """Upper envelope convex and lower envelope concave along the midpoint of each pair."""
    up, low = star_envelope(op, "upper"), star_envelope(op, "lower")
    worst, fails = math.inf, []
    for j1, j2 in pairs:
        mid = (j1 + j2).scaled(0.5)
        s_up = 0.5 * (evaluate(up, j1) + evaluate(up, j2)) - evaluate(up, mid) + tol
        s_low = evaluate(low, mid) - 0.5 * (evaluate(low, j1) + evaluate(low, j2)) + tol
        slack = min(s_up, s_low)
        worst = min(worst, slack)
        if slack < 0:
            fails.append((j1, j2))
    cx = None
    if fails:
        cx = _cx("envelope_convexity", op=ser_op(op), pairs=[[a.to_dict(), b.to_dict()] for a, b in fails[:5]], tol=tol)
    return PropertyReport("envelope_convexity", not fails, worst, cx, details={"pairs": len(pairs)})


def check_envelope_reflection(op: InfSup, jets: Sequence[Jet]) -> PropertyReport:
    """``upper(j) == -lower(-j)`` exactly."""
    up, low = star_envelope(op, "upper"), star_envelope(op, "lower")
    fails = [j for j in jets if evaluate(up, j) != -evaluate(low, -j)]
    worst = -max((abs(evaluate(up, j) + evaluate(low, -j)) for j in jets), default=0.0)
    cx = _cx("envelope_reflection", op=ser_op(op), jets=[j.to_dict() for j in fails[:5]]) if fails else None
    return PropertyReport("envelope_reflection", not fails, worst, cx, details={"jets": len(jets)})


# --------------------------------------------------------------------------
# discrete monotonicity


def check_monotone_triples(triples: Sequence[tuple[Operator, GridFunction, int, float]],
                           drift: str = "upwind") -> PropertyReport:
    """:func:`check_monotone` over ``(op, u, node, eps)`` triples."""
    fails = []
    for op, u, node, eps in triples:
        if not check_monotone(op, u, node, eps, drift):
            fails.append({"op": ser_op(op), "u": ser_gf(u), "node": int(node), "eps": float(eps)})
    cx = _cx("monotone", triples=fails[:5], drift=drift) if fails else None
    return PropertyReport("monotone_stencil", not fails, 0.0 if not fails else -1.0, cx,
                          details={"triples": len(triples), "failures": len(fails)})


# --------------------------------------------------------------------------
# eigenpair properties


def _pair(op, grid, sign, phi0=None, opts: Optional[EigenOptions] = None):
    o = opts or EigenOptions()
    if phi0 is not None:
        o = EigenOptions(o.shift, o.tol_lambda, o.tol_residual, o.max_iter, o.eps_steps, phi0, o.drift)
    return principal_eigenpair(op, grid, sign, o)


def check_eigenpairs(op: Operator, grid: Grid, opts: Optional[EigenOptions] = None) -> PropertyReport:
    """Strict sign, unit sup-norm, eigen residual and Rayleigh bracket of both half-eigenpairs."""
    o = opts or EigenOptions()
    worst, problems, lams = math.inf, [], {}
    for sign in (1, -1):
        try:
            ep = _pair(op, grid, sign, opts=o)
        except EigenError as exc:
            problems.append(f"sign {sign:+d}: {exc}")
            continue
        lams[sign] = ep.lam
        v = ep.phi.interior
        slack = min(
            float(np.min(sign * v)),
            1e-12 - abs(float(np.max(sign * v)) - 1.0),
            o.tol_residual - ep.residual,
            ep.lam - ep.rayleigh_lo + 1e-12 * (1 + abs(ep.lam)),
            ep.rayleigh_hi - ep.lam + 1e-12 * (1 + abs(ep.lam)),
        )
        worst = min(worst, slack)
        if slack < 0:
            problems.append(f"sign {sign:+d}: property slack {slack:.3e}")
    cx = _cx("eigenpairs", op=ser_op(op), grid=ser_grid(grid)) if problems else None
    return PropertyReport("eigen_sign_residual", not problems, worst, cx,
                          note="; ".join(problems), details={"lambda": lams})


def check_simplicity(op: Operator, grid: Grid, seed: int, starts: int = 5,
                     lam_tol: float = 1e-8, phi_tol: float = 1e-6) -> PropertyReport:
    """Inverse iteration from ``starts`` random one-signed initial guesses
    lands on the same normalized eigenpair."""
    rng = np.random.default_rng(seed)
    worst, problems = math.inf, []
    for sign in (1, -1):
        pairs = []
        for _ in range(starts):
            phi0 = sign * rng.uniform(0.1, 1.0, grid.n_interior)
            try:
                pairs.append(_pair(op, grid, sign, phi0))
            except EigenError as exc:
                problems.append(f"sign {sign:+d}: {exc}")
        if len(pairs) < 2:
            continue
        ref = pairs[0]
        for ep in pairs[1:]:
            dl = abs(ep.lam - ref.lam)
            dphi = float(np.max(np.abs(ep.phi.interior - ref.phi.interior)))
            worst = min(worst, lam_tol - dl, phi_tol - dphi)
            if dl > lam_tol or dphi > phi_tol:
                problems.append(f"sign {sign:+d}: dlambda={dl:.3e}, dphi={dphi:.3e}")
    cx = _cx("simplicity", op=ser_op(op), grid=ser_grid(grid), seed=seed, starts=starts) if problems else None
    return PropertyReport("simplicity", not problems, worst, cx, note="; ".join(problems))


def check_domain_monotonicity(op: Operator, grid: Grid, factor: float = 1.2) -> PropertyReport:
    """Both half-eigenvalues strictly decrease when the box grows by ``factor``."""
    big = grid.scaled(factor)
    worst, problems, vals = math.inf, [], {}
    for sign in (1, -1):
        try:
            small_l = _pair(op, grid, sign).lam
            big_l = _pair(op, big, sign).lam
        except EigenError as exc:
            problems.append(str(exc))
            continue
        vals[sign] = (small_l, big_l)
        worst = min(worst, small_l - big_l)
        if not small_l > big_l:
            problems.append(f"sign {sign:+d}: {small_l} <= {big_l}")
    cx = _cx("domain_monotonicity", op=ser_op(op), grid=ser_grid(grid), factor=factor) if problems else None
    return PropertyReport("domain_monotonicity", not problems, worst, cx,
                          note="; ".join(problems), details={"lambda": vals})


def check_bellman_chain(members: Sequence[LinearCoeffs], grid: Grid, tol: float = 1e-8) -> PropertyReport:
    """For the pure-sup family ``H = sup_a L^a``:
    ``lam1_minus(H) <= min_a lam1(L^a) <= max_a lam1(L^a) <= lam1_plus(H)``."""
    H = InfSup((tuple(members),))
    problems = []
    try:
        lp = _pair(H, grid, 1).lam
        lm = _pair(H, grid, -1).lam
        lin = [_pair(Linear(m), grid, 1).lam for m in members]
    except EigenError as exc:
        problems.append(str(exc))
        lp = lm = math.nan
        lin = []
    worst = -math.inf
    if lin:
        worst = min(min(lin) - lm, lp - max(lin))
        if worst < -tol:
            problems.append(f"chain violated: {lm} <= {min(lin)} <= {max(lin)} <= {lp}")
    cx = None
    if problems:
        cx = _cx("bellman_chain", members=ser_op(H), grid=ser_grid(grid), tol=tol)
    return PropertyReport("bellman_chain", not problems, worst, cx, note="; ".join(problems),
                          details={"lambda_plus": lp, "lambda_minus": lm, "linear": lin})


def check_envelope_ordering(op: InfSup, grid: Grid, tol: float = 1e-8) -> PropertyReport:
    """Half-eigenvalues of the flattened envelopes bracket those of ``op``:

    ``lam+(lower) = lam-(upper) <= min lam(op) <= max lam(op) <= lam+(upper) = lam-(lower)``.
    """
    up, low = star_envelope(op, "upper"), star_envelope(op, "lower")
    problems, vals = [], {}
    try:
        vals = {
            "op_plus": _pair(op, grid, 1).lam, "op_minus": _pair(op, grid, -1).lam,
            "upper_plus": _pair(up, grid, 1).lam, "upper_minus": _pair(up, grid, -1).lam,
            "lower_plus": _pair(low, grid, 1).lam, "lower_minus": _pair(low, grid, -1).lam,
        }
    except EigenError as exc:
        problems.append(str(exc))
    worst = -math.inf
    if vals:
        lo_op = min(vals["op_plus"], vals["op_minus"])
        hi_op = max(vals["op_plus"], vals["op_minus"])
        worst = min(lo_op - vals["upper_minus"], vals["upper_plus"] - hi_op,
                    tol - abs(vals["lower_plus"] - vals["upper_minus"]),
                    tol - abs(vals["lower_minus"] - vals["upper_plus"]))
        if lo_op < vals["upper_minus"] - tol or hi_op > vals["upper_plus"] + tol:
            problems.append("ordering violated")
        if (abs(vals["lower_plus"] - vals["upper_minus"]) > tol
                or abs(vals["lower_minus"] - vals["upper_plus"]) > tol):
            problems.append("reflection identity violated")
    cx = _cx("envelope_ordering", op=ser_op(op), grid=ser_grid(grid), tol=tol) if problems else None
    return PropertyReport("envelope_ordering", not problems, worst, cx,
                          note="; ".join(problems), details=vals)


# --------------------------------------------------------------------------
# property-level checks


def check_comparison_small(op: Operator, max_nodes: int = 7, trials: int = 100, seed: int = 0,
                           dim: int = 1, tol: float = 1e-10) -> PropertyReport:
    """Discrete comparison on small grids for the proper operator ``F + delta0 z``.

    Each trial draws a box, ordered right-hand sides ``f_u <= f_v`` and
    ordered boundary data ``g_u <= g_v``, solves both problems, and checks
    ``u <= v + tol`` at every node.
    """
    if not 3 <= max_nodes <= 9:
        raise ValueError("max_nodes must lie in [3, 9]")
    if op.dim is not None:
        dim = op.dim
    rng = np.random.default_rng(seed)
    proper = Shift(op, -op.band.delta0)
    opts = SolveOptions(tol=1e-11, restarts=1)
    worst, fails, unsolved = math.inf, [], 0
    for _ in range(trials):
        n = int(rng.integers(3, max_nodes + 1))
        lo = rng.uniform(-0.5, 0.5, dim)
        grid = Grid(dim, tuple(lo), tuple(lo + rng.uniform(0.2, 1.0, dim)), (n,) * dim)
        fv = rng.normal(size=grid.n_nodes)
        fu = fv - np.abs(rng.normal(size=grid.n_nodes)) * rng.integers(0, 2)
        gv = rng.normal(size=grid.n_nodes - grid.n_interior)
        gu = gv - np.abs(rng.normal(size=gv.size)) * rng.integers(0, 2)
        res = _comparison_pair(proper, grid, fu, fv, gu, gv, opts)
        if res is None:
            unsolved += 1
            continue
        slack = res
        worst = min(worst, slack + tol)
        if slack < -tol:
            fails.append({"grid": ser_grid(grid), "fu": fu.tolist(), "fv": fv.tolist(),
                          "gu": gu.tolist(), "gv": gv.tolist()})
    cx = None
    if fails or unsolved:
        cx = _cx("comparison_small", op=ser_op(op), cases=fails[:3], tol=tol)
    return PropertyReport("comparison_small", not fails and not unsolved, worst, cx,
                          details={"trials": trials, "failures": len(fails), "unsolved": unsolved})


def _comparison_pair(op, grid, fu, fv, gu, gv, opts, lam: float = 0.0):
    """``min(v - u)`` over all nodes for the two solves, or None if either failed."""
    f_u = GridFunction(grid, np.concatenate([np.asarray(fu)[: grid.n_interior],
                                             np.zeros(grid.n_nodes - grid.n_interior)]))
    f_v = GridFunction(grid, np.concatenate([np.asarray(fv)[: grid.n_interior],
                                             np.zeros(grid.n_nodes - grid.n_interior)]))
    ru = solve_dirichlet(op, lam, f_u, opts, boundary=np.asarray(gu))
    rv = solve_dirichlet(op, lam, f_v, opts, boundary=np.asarray(gv))
    if not (ru.converged and rv.converged):
        return None
    return float(np.min(rv.u.values - ru.u.values))


def check_hopf(phi: GridFunction, sign, fraction: float = 0.01) -> PropertyReport:
    """Inward difference quotients at the boundary are at least
    ``fraction * |phi|_inf / diam`` in magnitude, with the sign of ``phi``.
    Corner nodes (no inward normal) are skipped."""
    s = 1 if sign in (1, "+", "positive") else -1
    grid = phi.grid
    T = phi.tensor()
    c = fraction * phi.sup_norm() / grid.diam
    quotients = []
    for axis in range(grid.dim):
        h = grid.h[axis]
        for side, inward in ((0, 1), (-1, -2)):
            sl = [slice(1, -1)] * grid.dim
            sl[axis] = inward
            quotients.append(T[tuple(sl)].ravel() / h)
    q = np.concatenate(quotients)
    margin = float(np.min(s * q) - c)
    passed = c > 0 and margin >= 0
    cx = None if passed else _cx("hopf", phi=ser_gf(phi), sign=s, fraction=fraction)
    return PropertyReport("hopf", passed, margin, cx, details={"threshold": c})


def check_bnv_proportionality(op: Operator, grid: Grid, lam_tol: float = 1e-6,
                              phi_tol: float = 1e-4) -> PropertyReport:
    """``|phi+ + phi-|_inf <= phi_tol`` when the two half-eigenvalues coincide;
    skipped otherwise, with the distance still reported in ``details``."""
    try:
        p, m = _pair(op, grid, 1), _pair(op, grid, -1)
    except EigenError as exc:
        return PropertyReport("bnv_proportionality", False, -math.inf,
                              _cx("bnv", op=ser_op(op), grid=ser_grid(grid)), note=str(exc))
    dist = float(np.max(np.abs(p.phi.interior + m.phi.interior)))
    details = {"lambda_plus": p.lam, "lambda_minus": m.lam, "distance": dist}
    if abs(p.lam - m.lam) > lam_tol * (1 + abs(p.lam)):
        return PropertyReport("bnv_proportionality", True, skipped=True,
                              note="half-eigenvalues differ", details=details)
    passed = dist <= phi_tol
    cx = None if passed else _cx("bnv", op=ser_op(op), grid=ser_grid(grid),
                                 lam_tol=lam_tol, phi_tol=phi_tol)
    return PropertyReport("bnv_proportionality", passed, phi_tol - dist, cx, details=details)


def check_envelope_comparison(op: InfSup, grid: Grid, trials: int = 50, seed: int = 0,
                              tol: float = 1e-8) -> PropertyReport:
    """Comparison for ``op`` itself when ``lam1_minus(upper envelope) > 0``.

    Skipped when the precondition fails on ``grid``.
    """
    lam_up = _pair(star_envelope(op, "upper"), grid, -1).lam
    if not lam_up > 0:
        return PropertyReport("envelope_comparison", True, skipped=True,
                              note=f"lambda1_minus(upper) = {lam_up:.6g} <= 0",
                              details={"lambda_minus_upper": lam_up})
    rng = np.random.default_rng(seed)
    opts = SolveOptions(tol=1e-10)
    worst, fails, unsolved = math.inf, [], 0
    nb = grid.n_nodes - grid.n_interior
    for _ in range(trials):
        fv = rng.normal(size=grid.n_nodes)
        fu = fv - np.abs(rng.normal(size=grid.n_nodes))
        gv = rng.normal(size=nb) * 0.1
        gu = gv - np.abs(rng.normal(size=nb)) * 0.1
        res = _comparison_pair(op, grid, fu, fv, gu, gv, opts)
        if res is None:
            unsolved += 1
            continue
        worst = min(worst, res + tol)
        if res < -tol:
            fails.append({"fu": fu.tolist(), "fv": fv.tolist(), "gu": gu.tolist(), "gv": gv.tolist()})
    passed = not fails and unsolved < trials
    cx = None if passed else _cx("envelope_comparison", op=ser_op(op), grid=ser_grid(grid),
                                 trials=trials, seed=seed, tol=tol)
    return PropertyReport("envelope_comparison", passed, worst, cx,
                          details={"lambda_minus_upper": lam_up, "trials": trials,
                                   "unsolved": unsolved, "failures": len(fails)})


def shrink_until_comparison(op: InfSup, grid: Grid, factor: float = 0.8, max_steps: int = 30) -> Grid:
    """Shrink the box until ``lam1_minus`` of the upper envelope is positive."""
    up = star_envelope(op, "upper")
    g = grid
    for _ in range(max_steps):
        if _pair(up, g, -1).lam > 0:
            return g
        g = g.scaled(factor)
    raise ValueError("could not make lambda1_minus(upper) positive by shrinking")


def check_nonexistence_window(op: Operator, grid: Grid, f: GridFunction, lambdas: Sequence[float],
                              opts: SolveOptions = SolveOptions(), floor_factor: float = 100.0,
                              window_slack: float = 1e-3) -> PropertyReport:
    """Evidence (not proof) that no solution exists for ``lam`` in the window
    between the half-eigenvalues: every start fails and the best residual
    stays above ``floor_factor * tol``.

    For ``f >= 0`` the window is ``[lam1_plus, lam1_minus]``; for ``f <= 0``
    it is ``[lam1_minus, lam1_plus]``. The computed (discrete) endpoints may
    differ from the continuous ones by ``O(h^2)``; ``window_slack`` (relative)
    allows for that, and ``details`` records which values lie strictly
    inside the discrete window.
    """
    fi = f.interior
    if np.all(fi == 0):
        raise ValueError("f must not vanish identically")
    if np.all(fi >= 0):
        lo_sign, hi_sign = 1, -1
    elif np.all(fi <= 0):
        lo_sign, hi_sign = -1, 1
    else:
        raise ValueError("f must be one-signed")
    w_lo = _pair(op, grid, lo_sign).lam
    w_hi = _pair(op, grid, hi_sign).lam
    rows, worst, fails = [], math.inf, []
    for lam in lambdas:
        slack = window_slack * (1 + abs(lam))
        if not (w_lo - slack <= lam <= w_hi + slack):
            raise ValueError(f"lambda={lam} lies outside the window [{w_lo:.8g}, {w_hi:.8g}]")
        rep = solve_dirichlet(op, lam, f, opts)
        floor = rep.residual_floor
        ok = (not rep.converged) and floor > floor_factor * opts.tol
        worst = min(worst, floor - floor_factor * opts.tol if not rep.converged else -math.inf)
        rows.append({"lambda": lam, "converged": rep.converged, "residual_floor": floor,
                     "inside_discrete_window": bool(w_lo <= lam <= w_hi)})
        if not ok:
            fails.append(lam)
    cx = None
    if fails:
        cx = _cx("nonexistence_window", op=ser_op(op), f=ser_gf(f), lambdas=list(fails),
                 floor_factor=floor_factor, tol=opts.tol)
    return PropertyReport("nonexistence_window", not fails, worst, cx,
                          note="evidence only: non-convergence of a solver does not prove nonexistence",
                          details={"window": (w_lo, w_hi), "rows": rows})


# --------------------------------------------------------------------------
# replay


def _jets(lst):
    return [Jet.from_dict(d) for d in lst]


def replay(counterexample: dict) -> PropertyReport:
    """Re-run the check recorded in a counterexample from its serialized inputs."""
    check = counterexample.get("check")
    a = counterexample.get("args", counterexample)
    if check == "homogeneity":
        op = load_operator(a["op"])
        return check_homogeneity(op, [Jet.from_dict(a["jet"])], [a["t"]], a["rel_tol"])
    if check == "structure":
        op = load_operator(a["op"])
        return check_structure(op, Band(**a["band"]), [(Jet.from_dict(a["j1"]), Jet.from_dict(a["j2"]))], a["tol"])
    if check == "envelope_sandwich":
        return check_envelope_sandwich(load_operator(a["op"]), [tuple(_jets(p)) for p in a["pairs"]], a["tol"])
    if check == "envelope_convexity":
        return check_envelope_convexity(load_operator(a["op"]), [tuple(_jets(p)) for p in a["pairs"]], a["tol"])
    if check == "envelope_reflection":
        return check_envelope_reflection(load_operator(a["op"]), _jets(a["jets"]))
    if check == "monotone":
        triples = [(load_operator(t["op"]), de_gf(t["u"]), t["node"], t["eps"]) for t in a["triples"]]
        return check_monotone_triples(triples, a["drift"])
    if check == "eigenpairs":
        return check_eigenpairs(load_operator(a["op"]), de_grid(a["grid"]))
    if check == "simplicity":
        return check_simplicity(load_operator(a["op"]), de_grid(a["grid"]), a["seed"], a["starts"])
    if check == "domain_monotonicity":
        return check_domain_monotonicity(load_operator(a["op"]), de_grid(a["grid"]), a["factor"])
    if check == "bellman_chain":
        H = load_operator(a["members"])
        return check_bellman_chain(H.members, de_grid(a["grid"]), a["tol"])
    if check == "envelope_ordering":
        return check_envelope_ordering(load_operator(a["op"]), de_grid(a["grid"]), a["tol"])
    if check == "comparison_small":
        op = load_operator(a["op"])
        proper = Shift(op, -op.band.delta0)
        opts = SolveOptions(tol=1e-11, restarts=1)
        worst, fails = math.inf, []
        for case in a["cases"]:
            res = _comparison_pair(proper, de_grid(case["grid"]), np.array(case["fu"]),
                                   np.array(case["fv"]), np.array(case["gu"]), np.array(case["gv"]), opts)
            worst = min(worst, -math.inf if res is None else res + a["tol"])
            if res is None or res < -a["tol"]:
                fails.append(case)
        cx = _cx("comparison_small", op=a["op"], cases=fails, tol=a["tol"]) if fails else None
        return PropertyReport("comparison_small", not fails, worst, cx)
    if check == "hopf":
        return check_hopf(de_gf(a["phi"]), a["sign"], a["fraction"])
    if check == "bnv":
        return check_bnv_proportionality(load_operator(a["op"]), de_grid(a["grid"]),
                                         a.get("lam_tol", 1e-6), a.get("phi_tol", 1e-4))
    if check == "envelope_comparison":
        return check_envelope_comparison(load_operator(a["op"]), de_grid(a["grid"]),
                                         a["trials"], a["seed"], a["tol"])
    if check == "nonexistence_window":
        f = de_gf(a["f"])
        return check_nonexistence_window(load_operator(a["op"]), f.grid, f, a["lambdas"],
                                         SolveOptions(tol=a["tol"]), a["floor_factor"])
    if check == "separation":
        return check_separation(load_operator(a["op"]), de_grid(a["grid"]), a["threshold"])
    raise ValueError(f"unknown check {check!r}")


def check_separation(op: Operator, grid: Grid, threshold: float = 1e-2) -> PropertyReport:
    """``|phi+ + phi-|_inf > threshold``: the half-eigenfunctions are not proportional."""
    p, m = _pair(op, grid, 1), _pair(op, grid, -1)
    dist = float(np.max(np.abs(p.phi.interior + m.phi.interior)))
    passed = dist > threshold
    cx = None if passed else _cx("separation", op=ser_op(op), grid=ser_grid(grid), threshold=threshold)
    return PropertyReport("eigenfunction_separation", passed, dist - threshold, cx,
                          details={"distance": dist, "lambda_plus": p.lam, "lambda_minus": m.lam})


# --------------------------------------------------------------------------
# shipped example operators and the suite

BAND12 = Band(1.0, 2.0)
MIN_EXAMPLE = InfSup(((LinearCoeffs(1.0),), (LinearCoeffs(2.0),)))
BELLMAN_MEMBERS = (LinearCoeffs(1.0), LinearCoeffs(2.0, (0.5,)), LinearCoeffs(1.5, (-1.0,), 0.5))
GENUINE_INFSUP = InfSup(((LinearCoeffs(1.0, (0.5,)), LinearCoeffs(2.0)),
                         (LinearCoeffs(1.5, (-0.5,), 0.3), LinearCoeffs(1.2, None, -0.2))))


def operator_zoo(dim: int) -> list[Operator]:
    """One instance of every operator variant in dimension ``dim``."""
    if dim == 1:
        fam = GENUINE_INFSUP
        lin = Linear(LinearCoeffs(1.5, (0.7,), 0.3))
    else:
        fam = InfSup(((LinearCoeffs(((1.5, 0.5), (0.5, 1.5)), (0.5, -0.3)), LinearCoeffs(2.0)),
                      (LinearCoeffs((1.0, 1.8), (-0.4, 0.2), 0.3), LinearCoeffs(1.2, None, -0.2))))
        lin = Linear(LinearCoeffs(((1.5, -0.4), (-0.4, 1.2)), (0.7, -0.2), 0.3))
    return [
        PucciPlus(BAND12), PucciMinus(BAND12), lin, fam,
        InfSup((fam.members,)), InfSup(tuple((m,) for m in fam.members)),
        Shift(PucciMinus(BAND12), 0.7), Homotopy(PucciMinus(BAND12), 0.3, 2.0),
        Homotopy(fam, 0.6, 2.0), StarEnvelope(fam), SubstarEnvelope(fam),
    ]


SUITE_PROPERTIES = (
    "homogeneity", "structure", "envelope_sandwich", "envelope_convexity", "envelope_reflection",
    "monotone_stencil", "eigen_sign_residual", "simplicity", "domain_monotonicity",
    "bellman_chain", "envelope_ordering", "comparison_small", "hopf", "bnv_proportionality",
    "eigenfunction_separation", "envelope_comparison", "nonexistence_window",
)


def _merge(name: str, reports: Sequence[PropertyReport]) -> PropertyReport:
    """Combine several reports of one property: fails if any failed."""
    active = [r for r in reports if not r.skipped]
    if not active:
        note = "; ".join(r.note for r in reports if r.note)
        return PropertyReport(name, True, skipped=True, note=note)
    failed = [r for r in active if not r.passed]
    margin = min(r.margin for r in active)
    cx = failed[0].counterexample if failed else None
    return PropertyReport(name, not failed, margin, cx,
                          note="; ".join(r.note for r in reports if r.note),
                          details={"parts": len(reports), "failed_parts": len(failed)})


def run_suite(op: Operator, grid: Grid, seed: int = 0, trials: int = 20, samples: int = 200,
              structure_band: Optional[Band] = None,
              log: Optional[Callable[[str], None]] = None) -> list[PropertyReport]:
    """The full property suite for ``op`` on ``grid`` plus the shipped examples.

    Randomized inputs are drawn from ``seed``; verdicts do not depend on it.
    """
    rng = np.random.default_rng(seed)
    out: list[PropertyReport] = []

    def emit(r: PropertyReport):
        out.append(r)
        if log:
            log(f"{r.name:28s} {r.status}")

    dim = grid.dim
    zoo = operator_zoo(dim)
    subject_is_new = op not in zoo
    ops = zoo + ([op] if subject_is_new else [])
    ts = [0.0, 0.5, 1.0, 2.0, 10.0]
    x = rng.uniform(0, 1, dim)

    # (F3) and (F2)
    emit(_merge("homogeneity", [
        check_homogeneity(o, random_jets(rng, dim, max(4, samples // len(ops)), x=x), ts) for o in ops]))
    band = structure_band or op.band
    pairs = [(a, b) for a, b in zip(random_jets(rng, dim, samples, x=x), random_jets(rng, dim, samples, x=x))]
    emit(check_structure(op, band, pairs))

    # envelope algebra
    fams = [o for o in ops if isinstance(o, InfSup)]
    env_pairs = list(zip(random_jets(rng, dim, samples, x=x), random_jets(rng, dim, samples, x=x)))
    emit(_merge("envelope_sandwich", [check_envelope_sandwich(f, env_pairs) for f in fams]))
    emit(_merge("envelope_convexity", [check_envelope_convexity(f, env_pairs) for f in fams]))
    emit(_merge("envelope_reflection", [check_envelope_reflection(f, [p[0] for p in env_pairs]) for f in fams]))

    # discrete monotonicity on small random grids
    triples = []
    small = Grid(dim, (0.0,) * dim, (1.0,) * dim, (7,) * dim)
    for _ in range(200):
        o = ops[int(rng.integers(len(ops)))]
        u = GridFunction(small, rng.normal(size=small.n_nodes))
        triples.append((o, u, int(rng.integers(small.n_interior)), float(10 ** rng.uniform(-3, 0))))
    emit(check_monotone_triples(triples))

    # eigenpairs of the subject operator
    emit(check_eigenpairs(op, grid))
    emit(check_simplicity(op, grid, seed))
    dm = [check_domain_monotonicity(op, grid)]
    g1 = Grid(1, 0.0, 1.0, 61)
    for o in (PucciMinus(BAND12), MIN_EXAMPLE, Linear(LinearCoeffs(1.0, (1.0,)))):
        if o != op:
            dm.append(check_domain_monotonicity(o, g1))
    emit(_merge("domain_monotonicity", dm))
    emit(check_bellman_chain(BELLMAN_MEMBERS, g1))
    emit(_merge("envelope_ordering", [check_envelope_ordering(MIN_EXAMPLE, g1),
                                      check_envelope_ordering(GENUINE_INFSUP, g1)]))

    # comparison on small domains
    emit(_merge("comparison_small", [
        check_comparison_small(op, 7, trials, seed, dim),
        check_comparison_small(PucciMinus(BAND12), 7, trials, seed + 1, 1),
    ]))

    # Hopf quotient on the subject's eigenfunctions
    hopf = []
    for sign in (1, -1):
        try:
            hopf.append(check_hopf(_pair(op, grid, sign).phi, sign))
        except EigenError as exc:
            hopf.append(PropertyReport("hopf", False, -math.inf,
                                       _cx("eigenpairs", op=ser_op(op), grid=ser_grid(grid)), note=str(exc)))
    emit(_merge("hopf", hopf))

    # proportionality: subject (skipped unless lam+ == lam-), Laplacian, and the min example
    bnv = [check_bnv_proportionality(op, grid), check_bnv_proportionality(Linear(LinearCoeffs(1.0)), g1)]
    mn = check_bnv_proportionality(MIN_EXAMPLE, g1)
    dist = mn.details.get("distance", math.inf)
    bnv.append(PropertyReport("bnv_min_example", dist <= 1e-4, 1e-4 - dist,
                              None if dist <= 1e-4 else _cx("bnv", op=ser_op(MIN_EXAMPLE), grid=ser_grid(g1),
                                                            lam_tol=math.inf, phi_tol=1e-4)))
    emit(_merge("bnv_proportionality", bnv))
    emit(check_separation(PucciMinus(BAND12), Grid(2, (0.0, 0.0), (math.pi, math.pi), 21)))

    # comparison through the upper envelope, on a domain small enough
    shifted_min = InfSup(((LinearCoeffs(1.0, None, -12.0),), (LinearCoeffs(2.0, None, -12.0),)))
    g_env = shrink_until_comparison(shifted_min, Grid(1, 0.0, 1.0, 31))
    emit(check_envelope_comparison(shifted_min, g_env, trials, seed))

    # nonexistence between the half-eigenvalues of P- (f = sin >= 0)
    gw = Grid(1, 0.0, math.pi, 101)
    f = GridFunction.from_function(gw, lambda c: np.sin(c[:, 0]), zero_boundary=True)
    lp, lm = _pair(PucciMinus(BAND12), gw, 1).lam, _pair(PucciMinus(BAND12), gw, -1).lam
    window = [lp + 0.01 * (lm - lp), 0.5 * (lp + lm), lm - 0.01 * (lm - lp)]
    emit(check_nonexistence_window(PucciMinus(BAND12), gw, f, window,
                                   SolveOptions(max_iter=40, restarts=3, seed=seed)))
    return out


def suite_passed(reports: Sequence[PropertyReport]) -> bool:
    return all(r.passed for r in reports)
