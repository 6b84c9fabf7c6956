"""Dirichlet solves, principal half-eigenpairs, and homotopy continuation.

The discrete problem ``F_h(u) - lam u = f`` with Dirichlet data is solved by
policy iteration: freeze the active linear member at every node, solve
the resulting sparse system, and accept the step through a backtracking
line search on the sup-norm residual. Since ``F_h`` is piecewise linear, a
step whose policy is self-consistent lands on an exact discrete solution.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid, GridFunction, tent
from .operators import Homotopy, Operator, Shift
from .scheme import DiscreteOperator, discrete_operator


class EigenError(RuntimeError):
    """Principal eigenpair iteration failed; ``trace`` holds the history."""

    def __init__(self, message: str, trace: Optional[dict] = None):
        super().__init__(message)
        self.trace = trace or {}


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-8
    max_iter: int = 100
    restarts: int = 4
    min_step: float = 2.0 ** -10
    max_stall: int = 5
    seed: int = 0
    find_all: bool = False
    min_iter: int = 0


@dataclass
class Attempt:
    label: str
    converged: bool
    residual: float
    iterations: int
    error: str = ""


@dataclass
class SolveReport:
    u: GridFunction
    converged: bool
    residual_history: list
    restarts_used: int
    policy_changes: list
    bound_check: float
    attempts: list = field(default_factory=list)
    solutions: list = field(default_factory=list)

    @property
    def residual(self) -> float:
        return self.residual_history[-1]

    @property
    def residual_floor(self) -> float:
        """Smallest final residual over all attempts."""
        return min(a.residual for a in self.attempts)

    def summary(self) -> str:
        lines = [
            f"converged: {self.converged}",
            f"final residual: {self.residual:.6e}",
            f"residual floor over attempts: {self.residual_floor:.6e}",
            f"restarts used: {self.restarts_used}",
            f"bound_check: {self.bound_check:.6e}",
            f"distinct solutions found: {len(self.solutions)}",
            "attempts:",
        ]
        for a in self.attempts:
            err = f" ({a.error})" if a.error else ""
            lines.append(f"  {a.label}: converged={a.converged} residual={a.residual:.6e} "
                         f"iterations={a.iterations}{err}")
        lines.append("residual history:")
        lines.extend(f"  {r:.17g}" for r in self.residual_history)
        return "\n".join(lines) + "\n"


class FrozenSolver:
    """Residual evaluation and frozen-policy solves for ``F_h(u) - lam u``.

    Factorizations are cached by policy, which makes repeated solves with a
    settled policy (inverse iteration, linear operators) cheap.
    """

    def __init__(self, dop: DiscreteOperator, lam: float, cache_size: int = 8):
        self.dop = dop
        self.lam = float(lam)
        self.grid = dop.grid
        self._cache: OrderedDict = OrderedDict()
        self._cache_size = cache_size

    def residual(self, u: GridFunction, f_int: np.ndarray):
        vals, policy = self.dop.evaluate(u)
        return vals - self.lam * u.interior - f_int, policy

    def factor(self, policy: np.ndarray):
        key = self.dop.flat_policy(policy).tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            self._cache.move_to_end(key)
            return hit
        A_int, A_bdy = self.dop.frozen_matrices(policy)
        N = A_int.shape[0]
        M = (A_int - self.lam * sp.identity(N, format="csr")).tocsc()
        lu = spla.splu(M)
        self._cache[key] = (lu, M, A_bdy)
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return lu, M, A_bdy

    def solve_frozen(self, policy, f_int, boundary, refine: int = 2) -> np.ndarray:
        """Solve the frozen system, with a few steps of iterative refinement
        (near-singular systems close to an eigenvalue lose digits otherwise)."""
        lu, M, A_bdy = self.factor(policy)
        rhs = f_int - A_bdy @ boundary
        x = lu.solve(rhs)
        for _ in range(refine):
            x = x + lu.solve(rhs - M @ x)
        if not np.all(np.isfinite(x)):
            raise np.linalg.LinAlgError("frozen system produced non-finite values")
        return x


def _sup(v: np.ndarray) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


def _newton(solver: FrozenSolver, f_int, boundary, u0_int, opts: SolveOptions):
    """One policy-iteration run. Returns (u_int, history, policy_changes, converged, error)."""
    grid = solver.grid

    def gf(v):
        return GridFunction.from_interior(grid, v, boundary)

    u = np.array(u0_int, dtype=float)
    r, policy = solver.residual(gf(u), f_int)
    rn = _sup(r)
    history, changes = [rn], []
    stalls = 0
    for it in range(opts.max_iter):
        if rn <= opts.tol and it >= opts.min_iter:
            return u, history, changes, True, ""
        try:
            target = solver.solve_frozen(policy, f_int, boundary)
        except (RuntimeError, np.linalg.LinAlgError) as exc:
            return u, history, changes, False, f"singular frozen system: {exc}"
        step = target - u
        t, accepted = 1.0, None
        while t >= opts.min_step:
            cand = u + t * step
            rc, pc = solver.residual(gf(cand), f_int)
            rcn = _sup(rc)
            if rcn <= (1 - 1e-4 * t) * rn or rcn <= opts.tol:
                accepted = (cand, rc, pc, rcn, t)
                break
            t *= 0.5
        if accepted is None:
            stalls += 1
            cand = target
            rc, pc = solver.residual(gf(cand), f_int)
            accepted = (cand, rc, pc, _sup(rc), 1.0)
        else:
            stalls = 0
        cand, rc, pc, rcn, t = accepted
        changes.append(int(np.count_nonzero(np.any(pc != policy, axis=1))))
        consistent = t == 1.0 and changes[-1] == 0
        u, r, policy, rn = cand, rc, pc, rcn
        history.append(rn)
        if rn <= opts.tol and it + 1 >= opts.min_iter:
            return u, history, changes, True, ""
        if consistent:
            return u, history, changes, False, "residual floor reached with a self-consistent policy"
        if stalls >= opts.max_stall:
            return u, history, changes, False, "line search stalled"
    return u, history, changes, rn <= opts.tol, "" if rn <= opts.tol else "iteration limit"


def default_starts(grid: Grid, boundary, seed: int) -> list[tuple[str, np.ndarray]]:
    """The multi-start set ``{0, +bump, -bump, random}``."""
    bump = tent(grid).interior
    rng = np.random.default_rng(seed)
    return [
        ("zero", np.zeros(grid.n_interior)),
        ("+bump", bump.copy()),
        ("-bump", -bump),
        ("random", rng.uniform(-1.0, 1.0, grid.n_interior)),
    ]


def _boundary_values(grid: Grid, boundary) -> np.ndarray:
    nb = grid.n_nodes - grid.n_interior
    if boundary is None:
        return np.zeros(nb)
    if isinstance(boundary, GridFunction):
        return np.array(boundary.boundary)
    arr = np.broadcast_to(np.asarray(boundary, dtype=float), (nb,))
    return np.array(arr)


def solve_dirichlet(op: Operator, lam: float, f: GridFunction,
                    opts: SolveOptions = SolveOptions(), initial: Sequence = (),
                    boundary=None, drift: str = "upwind",
                    _solver: Optional[FrozenSolver] = None) -> SolveReport:
    """Solve ``F_h(u) = lam u + f`` in the interior, ``u = boundary`` on the ring.

    Tries each entry of ``initial`` (grid functions or interior arrays), then
    the default start set, using at most ``1 + opts.restarts`` starts. Stops
    at the first converged start unless ``opts.find_all``. Non-convergence is
    reported in the result, never raised.
    """
    grid = f.grid
    f_int = np.array(f.interior)
    bvals = _boundary_values(grid, boundary)
    solver = _solver or FrozenSolver(discrete_operator(op, grid, drift), lam)
    starts = []
    for k, u0 in enumerate(initial):
        arr = u0.interior if isinstance(u0, GridFunction) else np.asarray(u0, dtype=float)
        starts.append((f"initial{k}", np.array(arr)))
    starts.extend(default_starts(grid, bvals, opts.seed))
    starts = starts[: 1 + max(0, opts.restarts)]

    attempts, solutions = [], []
    best = None
    for label, u0 in starts:
        u, hist, changes, ok, err = _newton(solver, f_int, bvals, u0, opts)
        attempts.append(Attempt(label, ok, hist[-1], len(hist) - 1, err))
        run = (u, hist, changes, ok)
        if best is None or (ok and not best[3]) or (ok == best[3] and hist[-1] < best[1][-1]):
            best = run
        if ok:
            scale = 1.0 + _sup(u)
            if all(_sup(u - s) > 1e-6 * scale for s in solutions):
                solutions.append(u)
            if not opts.find_all:
                break
    u, hist, changes, ok = best
    ugf = GridFunction.from_interior(grid, u, bvals)
    p = grid.dim + 1
    bound = ugf.sup_norm() / (1.0 + f.lp_norm(p))
    return SolveReport(
        u=ugf,
        converged=ok,
        residual_history=hist,
        restarts_used=len(attempts) - 1,
        policy_changes=changes,
        bound_check=bound,
        attempts=attempts,
        solutions=[GridFunction.from_interior(grid, s, bvals) for s in solutions],
    )


# --------------------------------------------------------------------------
# Principal half-eigenpairs


@dataclass(frozen=True)
class EigenOptions:
    shift: Optional[float] = None
    tol_lambda: float = 1e-10
    tol_residual: float = 1e-8
    max_iter: int = 500
    eps_steps: int = 11
    phi0: Optional[object] = None
    drift: str = "upwind"


@dataclass
class EigenPair:
    lam: float
    phi: GridFunction
    sign: int
    residual: float
    iterations: int
    rayleigh_lo: float
    rayleigh_hi: float
    trace: list = field(default_factory=list)

    @property
    def sign_label(self) -> str:
        return "positive" if self.sign > 0 else "negative"

    @property
    def h(self) -> tuple:
        return self.phi.grid.h


def _sign_of(sign) -> int:
    if sign in (1, "+", "positive", "plus"):
        return 1
    if sign in (-1, "-", "negative", "minus"):
        return -1
    raise ValueError(f"sign must be positive or negative, got {sign!r}")


def rayleigh_bounds(op: Operator, phi: GridFunction, drift: str = "upwind") -> tuple[float, float]:
    """``(min, max)`` over interior nodes of ``F_h(phi) / phi``."""
    v = phi.interior
    if np.any(v == 0) or not (np.all(v > 0) or np.all(v < 0)):
        raise ValueError("phi must be strictly one-signed on the interior")
    Fv = discrete_operator(op, phi.grid, drift).evaluate(phi)[0]
    q = Fv / v
    return float(np.min(q)), float(np.max(q))


def eigen_residual(op: Operator, phi: GridFunction, lam: float, drift: str = "upwind") -> float:
    Fv = discrete_operator(op, phi.grid, drift).evaluate(phi)[0]
    return _sup(Fv - lam * phi.interior)


def _positive_profile(grid: Grid) -> np.ndarray:
    x = grid.interior_coords
    lo, hi = np.array(grid.lo), np.array(grid.hi)
    return np.prod((x - lo) * (hi - x) / (0.25 * (hi - lo) ** 2), axis=1)


def principal_eigenpair(op: Operator, grid: Grid, sign, opts: EigenOptions = EigenOptions()) -> EigenPair:
    """Principal half-eigenpair with eigenfunction of the requested sign.

    Normalized inverse iteration on the proper operator ``F + sigma``
    (``sigma = delta0 + 1`` by default): ``u = (F_h + sigma)^{-1}(phi + s eps h)``,
    ``phi <- u / |u|``, ``lam = 1/|u| - sigma``. The bump weight ``eps``
    runs through ``2^-k`` for ``k < eps_steps`` and is zero afterwards;
    convergence is only declared at ``eps = 0``.
    """
    s = _sign_of(sign)
    sigma = op.band.delta0 + 1.0 if opts.shift is None else float(opts.shift)
    inner = Shift(op, -sigma)
    dop = discrete_operator(inner, grid, opts.drift)
    solver = FrozenSolver(dop, 0.0)
    bump = tent(grid).interior
    if opts.phi0 is None:
        phi = s * _positive_profile(grid)
    else:
        phi0 = opts.phi0
        phi = np.array(phi0.interior if isinstance(phi0, GridFunction) else phi0, dtype=float)
        if not np.all(s * phi > 0):
            raise ValueError("phi0 must have the requested sign at every interior node")
    phi = phi / _sup(phi)
    inner_opts = SolveOptions(tol=opts.tol_residual / 10, max_iter=100, restarts=0, min_iter=1)

    lam_prev = math.nan
    u_prev = None
    trace = []
    for k in range(opts.max_iter):
        eps = 2.0 ** -k if k < opts.eps_steps else 0.0
        rhs = phi + s * eps * bump
        start = (u_prev if u_prev is not None else phi / (1.0 + sigma),)
        f = GridFunction.from_interior(grid, rhs)
        rep = solve_dirichlet(inner, 0.0, f, inner_opts, initial=start, _solver=solver)
        if not rep.converged:
            raise EigenError(
                f"inner solve failed at iteration {k} (residual {rep.residual:.3e})",
                {"lambda": trace, "attempts": rep.attempts})
        u = np.array(rep.u.interior)
        norm = _sup(u)
        if norm == 0 or not math.isfinite(norm):
            raise EigenError(f"inner solve returned a degenerate iterate at iteration {k}",
                             {"lambda": trace})
        lam = 1.0 / norm - sigma
        phi = u / norm
        u_prev = u
        trace.append(lam)
        if eps == 0.0 and abs(lam - lam_prev) <= opts.tol_lambda:
            phi_gf = GridFunction.from_interior(grid, phi)
            res = eigen_residual(op, phi_gf, lam, opts.drift)
            if res <= opts.tol_residual:
                if not np.all(s * phi > 0):
                    raise EigenError("converged eigenfunction is not strictly signed "
                                     "(the discrete scheme should guarantee it)", {"lambda": trace})
                lo, hi = rayleigh_bounds(op, phi_gf, opts.drift)
                return EigenPair(lam, phi_gf, s, res, k + 1, lo, hi, trace)
        lam_prev = lam
    raise EigenError(f"no convergence in {opts.max_iter} iterations", {"lambda": trace})


# --------------------------------------------------------------------------
# Homotopy continuation


@dataclass
class ContinuationRow:
    s: float
    lambda_plus: float
    lambda_minus: float
    ok: bool
    error: str = ""


@dataclass
class ContinuationTable:
    rows: list
    complete: bool
    Gamma: float

    @property
    def max_jump(self) -> float:
        good = [r for r in self.rows if r.ok]
        jumps = [max(abs(b.lambda_plus - a.lambda_plus), abs(b.lambda_minus - a.lambda_minus))
                 for a, b in zip(good, good[1:])]
        return max(jumps) if jumps else 0.0


def continuation_sweep(op: Operator, n_steps: int, grid: Grid,
                       opts: EigenOptions = EigenOptions(), Gamma: Optional[float] = None) -> ContinuationTable:
    """Both half-eigenvalues of ``Homotopy(op, s, Gamma)`` at ``n_steps`` equally
    spaced ``s`` in ``[0, 1]`` (endpoints included).

    Each step is warm-started from the previous eigenfunctions. A failure is
    recorded in its row and the sweep continues.
    """
    if n_steps < 2:
        raise ValueError("continuation needs n_steps >= 2")
    G = op.band.Gamma if Gamma is None else float(Gamma)
    rows, warm = [], {1: None, -1: None}
    for s in np.linspace(0.0, 1.0, n_steps):
        Fs = Homotopy(op, float(s), G)
        lams, err = {}, ""
        for sign in (1, -1):
            o = EigenOptions(shift=opts.shift, tol_lambda=opts.tol_lambda,
                             tol_residual=opts.tol_residual, max_iter=opts.max_iter,
                             eps_steps=opts.eps_steps, phi0=warm[sign], drift=opts.drift)
            try:
                ep = principal_eigenpair(Fs, grid, sign, o)
                lams[sign] = ep.lam
                warm[sign] = ep.phi
            except EigenError as exc:
                lams[sign] = math.nan
                err = f"{'+' if sign > 0 else '-'}: {exc}"
        ok = not err
        rows.append(ContinuationRow(float(s), lams[1], lams[-1], ok, err))
    return ContinuationTable(rows, all(r.ok for r in rows), G)
