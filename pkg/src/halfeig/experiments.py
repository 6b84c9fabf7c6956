"""Experiment commands: each takes a parsed config and an output directory,
writes its CSV/text files, and returns a process exit code."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional

import numpy as np

from .config import ExperimentConfig, f_from_expr, parse_lambda
from .grammar import ConfigError
from .grid import GridFunction
from .operators import Linear, LinearCoeffs, reflect
from .shooting import DEFAULT_STEPS, lambda2_scan_1d, shooting_principal
from .solvers import (EigenError, EigenOptions, SolveOptions, continuation_sweep,
                      principal_eigenpair, solve_dirichlet)
from .verification import run_suite

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGED, EXIT_VERIFY = 0, 1, 2, 3

Log = Callable[[str], None]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_csv(path: Path, header: list, rows: Iterable) -> None:
    """Header row, LF line endings, floats with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _eig_opts(cfg: ExperimentConfig) -> EigenOptions:
    return EigenOptions(tol_lambda=float(cfg.get("tol_lambda", 1e-10)),
                        tol_residual=float(cfg.get("tol_residual", 1e-8)))


def _solve_opts(cfg: ExperimentConfig, seed: int) -> SolveOptions:
    return SolveOptions(tol=float(cfg.get("tol", 1e-8)), max_iter=int(cfg.get("max_iter", 100)),
                        restarts=int(cfg.get("restarts", 4)), seed=seed,
                        find_all=bool(cfg.get("find_all", False)))


def _f(cfg: ExperimentConfig) -> GridFunction:
    if "f" not in cfg.run:
        raise ConfigError("run.f is required for this command")
    return f_from_expr(cfg.run["f"], cfg.grid)


def resolve_lambda(cfg: ExperimentConfig) -> tuple[float, dict]:
    """Numeric lambda and, for symbolic forms, the eigenvalue it was taken from."""
    if "lambda" not in cfg.run:
        raise ConfigError("run.lambda is required for this command")
    ref, val = parse_lambda(cfg.run["lambda"])
    if ref is None:
        return val, {}
    sign = -1 if ref == "lambda1_minus" else 1
    ep = principal_eigenpair(cfg.operator, cfg.grid, sign, _eig_opts(cfg))
    return ep.lam + val, {ref: ep.lam}


# --------------------------------------------------------------------------


def cmd_eig(cfg: ExperimentConfig, out: Path, seed: int = 0, log: Log = print) -> int:
    rows, pairs = [], {}
    for sign, name in ((1, "plus"), (-1, "minus")):
        try:
            ep = principal_eigenpair(cfg.operator, cfg.grid, sign, _eig_opts(cfg))
        except EigenError as exc:
            log(f"eigenpair ({'+' if sign > 0 else '-'}) failed: {exc}")
            return EXIT_NONCONVERGED
        pairs[name] = ep
        rows.append(["+" if sign > 0 else "-", ep.lam, ep.residual, ep.rayleigh_lo,
                     ep.rayleigh_hi, ep.iterations])
        ep.phi.to_csv(out / f"phi_{name}.csv")
        log(f"lambda1_{name} = {ep.lam:.12g}  residual {ep.residual:.2e}  "
            f"bracket [{ep.rayleigh_lo:.12g}, {ep.rayleigh_hi:.12g}]  h = {cfg.grid.h}")
    write_csv(out / "eig.csv", ["sign", "lambda", "residual", "rayleigh_lo", "rayleigh_hi", "iterations"], rows)
    return EXIT_OK


def cmd_solve(cfg: ExperimentConfig, out: Path, seed: int = 0, log: Log = print) -> int:
    f = _f(cfg)
    try:
        lam, refs = resolve_lambda(cfg)
    except EigenError as exc:
        log(f"could not resolve lambda: {exc}")
        return EXIT_NONCONVERGED
    rep = solve_dirichlet(cfg.operator, lam, f, _solve_opts(cfg, seed))
    rep.u.to_csv(out / "solution.csv")
    head = f"lambda: {lam:.17g}\n" + "".join(f"{k}: {v:.17g}\n" for k, v in refs.items())
    (out / "report.txt").write_text(head + rep.summary())
    for k, s in enumerate(rep.solutions[1:], start=1):
        s.to_csv(out / f"solution_{k}.csv")
    log(f"lambda = {lam:.12g}: converged={rep.converged} residual={rep.residual:.3e} "
        f"bound_check={rep.bound_check:.4g}")
    return EXIT_OK if rep.converged else EXIT_NONCONVERGED


@dataclass
class AmpSweepRow:
    eta: float
    lam: float
    converged: bool
    min_u: float
    max_u: float
    sign_verdict: str


def sign_verdict(converged: bool, min_u: float, max_u: float) -> str:
    if not converged:
        return "unsolved"
    if max_u < 0:
        return "all_negative"
    if min_u > 0:
        return "all_positive"
    return "mixed"


def one_signed_suffix(rows: list, verdict: str) -> Optional[float]:
    """Largest eta from which every smaller eta's converged solution has ``verdict``.

    Rows are ordered by decreasing eta; None when the last converged row
    does not carry the verdict.
    """
    start = None
    for r in reversed(rows):
        if r.sign_verdict == "unsolved":
            continue
        if r.sign_verdict != verdict:
            break
        start = r.eta
    return start


def amp_sweep(op, grid, f: GridFunction, etas, eig_opts: EigenOptions,
              solve_opts: SolveOptions) -> tuple[list, dict]:
    """Solve at ``lam1 + eta`` past the larger half-eigenvalue.

    For ``f >= 0`` the sweep needs ``lam1_plus <= lam1_minus`` and runs above
    ``lam1_minus`` (negative solutions expected); for ``f <= 0`` it needs
    ``lam1_minus <= lam1_plus`` and runs above ``lam1_plus``.
    """
    fi = f.interior
    if np.all(fi == 0):
        raise ConfigError("amp-sweep needs f not identically zero")
    if np.all(fi >= 0):
        base_sign, expect = -1, "all_negative"
    elif np.all(fi <= 0):
        base_sign, expect = 1, "all_positive"
    else:
        raise ConfigError("amp-sweep needs a one-signed f")
    etas = [float(e) for e in etas]
    if not etas or any(e <= 0 for e in etas):
        raise ConfigError("amp-sweep etas must be positive (eta = 0 is an eigenvalue)")
    etas = sorted(etas, reverse=True)
    lp = principal_eigenpair(op, grid, 1, eig_opts).lam
    lm = principal_eigenpair(op, grid, -1, eig_opts).lam
    tol = 10 * eig_opts.tol_lambda
    if base_sign < 0 and lp > lm + tol:
        raise ConfigError(f"hypothesis violated: lambda1_plus={lp:.10g} > lambda1_minus={lm:.10g}")
    if base_sign > 0 and lm > lp + tol:
        raise ConfigError(f"hypothesis violated: lambda1_minus={lm:.10g} > lambda1_plus={lp:.10g}")
    base = lm if base_sign < 0 else lp
    rows = []
    prev = None
    for eta in etas:
        lam = base + eta
        rep = solve_dirichlet(op, lam, f, solve_opts, initial=() if prev is None else (prev,))
        ui = rep.u.interior
        mn, mx = float(np.min(ui)), float(np.max(ui))
        rows.append(AmpSweepRow(eta, lam, rep.converged, mn, mx, sign_verdict(rep.converged, mn, mx)))
        if rep.converged:
            prev = rep.u
    summary = {"lambda1_plus": lp, "lambda1_minus": lm, "base": base, "expected": expect,
               "largest_eta_with_expected_sign": max((r.eta for r in rows if r.sign_verdict == expect),
                                                     default=None),
               "one_signed_suffix_from_eta": one_signed_suffix(rows, expect)}
    return rows, summary


def _write_amp(out: Path, stem: str, rows, summary):
    write_csv(out / f"{stem}.csv", ["eta", "lambda", "converged", "min_u", "max_u", "sign_verdict"],
              [[r.eta, r.lam, r.converged, r.min_u, r.max_u, r.sign_verdict] for r in rows])
    lines = [f"{k}: {_fmt(v) if v is not None else 'none'}" for k, v in summary.items()]
    (out / f"{stem}_summary.txt").write_text("\n".join(lines) + "\n")


def cmd_amp_sweep(cfg: ExperimentConfig, out: Path, seed: int = 0, log: Log = print) -> int:
    f = _f(cfg)
    etas = cfg.get("etas", [0.5, 0.2, 0.1, 0.05, 0.02, 0.01])
    eo, so = _eig_opts(cfg), _solve_opts(cfg, seed)
    try:
        rows, summary = amp_sweep(cfg.operator, cfg.grid, f, etas, eo, so)
    except EigenError as exc:
        log(f"eigenvalue computation failed: {exc}")
        return EXIT_NONCONVERGED
    _write_amp(out, "amp", rows, summary)
    log(f"one-signed suffix ({summary['expected']}) from eta = {summary['one_signed_suffix_from_eta']}")
    if cfg.get("mirror", False):
        try:
            mrows, msum = amp_sweep(reflect(cfg.operator), cfg.grid, -f, etas, eo, so)
        except (EigenError, ValueError) as exc:
            log(f"mirrored sweep failed: {exc}")
            return EXIT_NONCONVERGED
        _write_amp(out, "amp_mirror", mrows, msum)
        log(f"mirrored one-signed suffix ({msum['expected']}) from eta = {msum['one_signed_suffix_from_eta']}")
    return EXIT_OK


def cmd_scan(cfg: ExperimentConfig, out: Path, seed: int = 0, log: Log = print) -> int:
    if cfg.grid.dim != 1:
        raise ConfigError("scan is only supported for 1D domains")
    if "lambda_range" not in cfg.run:
        raise ConfigError("run.lambda_range is required for scan")
    lo, hi = cfg.run["lambda_range"]
    if not lo < hi:
        raise ConfigError(f"empty lambda range [{lo}, {hi}]")
    domain = (cfg.grid.lo[0], cfg.grid.hi[0])
    steps = int(cfg.get("shoot_steps", DEFAULT_STEPS))
    pr = shooting_principal(cfg.operator, domain, steps)
    if lo <= max(pr.values()):
        raise ConfigError(f"lambda range must start above max principal eigenvalue {max(pr.values()):.10g}")
    res = lambda2_scan_1d(cfg.operator, domain, (lo, hi), int(cfg.get("resolution", 400)),
                          (pr["plus"], pr["minus"]), steps)
    write_csv(out / "scan.csv",
              ["lambda", "end_value_plus", "end_value_minus", "zero_count_plus", "zero_count_minus", "outcome"],
              zip(res.lambdas, res.end_plus, res.end_minus, res.zero_counts_plus,
                  res.zero_counts_minus, res.outcomes))
    lines = [f"lambda1_plus: {_fmt(pr['plus'])}", f"lambda1_minus: {_fmt(pr['minus'])}",
             f"lambda2: {_fmt(res.lambda2_estimate) if res.lambda2_estimate is not None else 'none'}",
             f"gap: {_fmt(res.gap) if res.gap is not None else 'none'}",
             f"gap_certified: {_fmt(res.gap_certified)}",
             "eigenvalues (lambda, slope, zero_count):"]
    lines += [f"  {_fmt(e.lam)} {e.slope:+g} {e.zero_count}" for e in res.eigenvalues]
    (out / "lambda2.txt").write_text("\n".join(lines) + "\n")
    log(f"lambda1 = ({pr['plus']:.10g}, {pr['minus']:.10g}), lambda2 = {res.lambda2_estimate}, gap = {res.gap}")
    return EXIT_OK


def cmd_continuation(cfg: ExperimentConfig, out: Path, seed: int = 0, log: Log = print) -> int:
    steps = int(cfg.get("steps", 11))
    if steps < 2:
        raise ConfigError("continuation needs steps >= 2")
    table = continuation_sweep(cfg.operator, steps, cfg.grid, _eig_opts(cfg))
    write_csv(out / "continuation.csv", ["s", "lambda_plus", "lambda_minus", "ok"],
              [[r.s, r.lambda_plus, r.lambda_minus, r.ok] for r in table.rows])
    lap = principal_eigenpair(Linear(LinearCoeffs(1.0)), cfg.grid, 1, _eig_opts(cfg)).lam
    end = table.rows[-1]
    target = table.Gamma * lap
    lines = [f"Gamma: {_fmt(table.Gamma)}", f"Gamma_times_laplacian_lambda1: {_fmt(target)}",
             f"endpoint_error: {_fmt(max(abs(end.lambda_plus - target), abs(end.lambda_minus - target)))}",
             f"max_step_jump: {_fmt(table.max_jump)}", f"complete: {_fmt(table.complete)}"]
    lines += [f"row {i}: {r.error}" for i, r in enumerate(table.rows) if r.error]
    (out / "continuation.txt").write_text("\n".join(lines) + "\n")
    log(f"continuation: complete={table.complete} max jump {table.max_jump:.4g}")
    return EXIT_OK if table.complete else EXIT_NONCONVERGED


def cmd_verify(cfg: ExperimentConfig, out: Path, seed: int = 0, log: Log = print) -> int:
    reports = run_suite(cfg.operator, cfg.grid, seed, trials=int(cfg.get("trials", 20)),
                        samples=int(cfg.get("samples", 200)),
                        structure_band=cfg.get("structure_band"))
    write_csv(out / "verify.csv", ["name", "passed", "margin"],
              [[r.name, r.passed, r.margin] for r in reports])
    failed = [r for r in reports if not r.passed]
    if failed:
        (out / "counterexamples.json").write_text(
            json.dumps({r.name: r.counterexample for r in failed}, indent=1, sort_keys=True) + "\n")
    width = max(len(r.name) for r in reports)
    for r in reports:
        note = f"  ({r.note})" if r.skipped and r.note else ""
        log(f"{r.name:<{width}}  {r.status.upper():4s}  margin {r.margin:.3e}{note}")
    log(f"{len(reports) - len(failed)}/{len(reports)} properties passed")
    return EXIT_OK if not failed else EXIT_VERIFY


COMMANDS = {
    "eig": cmd_eig,
    "solve": cmd_solve,
    "amp-sweep": cmd_amp_sweep,
    "scan": cmd_scan,
    "continuation": cmd_continuation,
    "verify": cmd_verify,
}
