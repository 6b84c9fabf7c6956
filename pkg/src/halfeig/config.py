"""Experiment configuration files.

A config is a TOML document with three tables: ``[operator]`` (see
:mod:`halfeig.grammar`), ``[domain]`` and ``[run]``::

    [operator]
    kind = "pucci_minus"
    gamma = 1.0
    Gamma = 2.0

    [domain]
    dim = 1
    lo = 0.0
    hi = "pi"
    n_interior = 801

    [run]
    lambda = "lambda1_minus + 0.1"
    f = "sin(1)"

Right-hand sides use a closed vocabulary: ``const(c)``, ``sin(k)`` (the
k-th Dirichlet mode of the box; ``sin(k1, k2)`` in 2D), ``bump(center,
width)`` (a tent; ``bump()`` covers the middle half), plain numbers, and
products of these with ``*``, optionally with a leading ``-``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .grammar import ConfigError, loads_toml, operator_from_table, parse_number
from .grid import Grid, GridFunction, tent
from .operators import Band, Operator

# every [run] key, its expected type, and a short description for the docs
RUN_KEYS: dict[str, tuple] = {
    "lambda": ((int, float, str), "spectral parameter, literal or 'lambda1_minus + eta'"),
    "f": (str, "right-hand side expression"),
    "tol": ((int, float), "Dirichlet residual tolerance"),
    "max_iter": (int, "policy iterations per start"),
    "restarts": (int, "additional starts after the first"),
    "find_all": (bool, "run every start and collect distinct solutions"),
    "seed": (int, "seed for the random start (overridden by --seed)"),
    "tol_lambda": ((int, float), "eigenvalue increment tolerance"),
    "tol_residual": ((int, float), "eigen residual tolerance"),
    "etas": (list, "amp-sweep offsets above lambda1_minus"),
    "mirror": (bool, "amp-sweep: also run the reflected problem with -f"),
    "lambda_range": (list, "scan: [lo, hi]"),
    "resolution": (int, "scan: number of grid values of lambda"),
    "shoot_steps": (int, "scan: RK4 steps across the interval"),
    "steps": (int, "continuation: number of s values in [0, 1]"),
    "trials": (int, "verify: random trials per property"),
    "samples": (int, "verify: random jets per algebraic property"),
    "structure_band": (dict, "verify: band used by the structure check"),
}


@dataclass
class ExperimentConfig:
    operator: Operator
    grid: Grid
    run: dict = field(default_factory=dict)
    source: Optional[str] = None

    def get(self, key: str, default=None):
        return self.run.get(key, default)


def _domain(t: dict) -> Grid:
    if not isinstance(t, dict):
        raise ConfigError("missing [domain] table")
    extra = set(t) - {"dim", "lo", "hi", "n_interior"}
    if extra:
        raise ConfigError(f"domain: unknown keys {sorted(extra)}")
    try:
        dim = int(t["dim"])

        def vec(v, name):
            vals = v if isinstance(v, list) else [v]
            return tuple(parse_number(x, f"domain.{name}") for x in vals)

        return Grid(dim, vec(t["lo"], "lo"), vec(t["hi"], "hi"), t["n_interior"])
    except KeyError as exc:
        raise ConfigError(f"domain: missing key {exc}") from exc
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"domain: {exc}") from exc


def _run(t: dict) -> dict:
    if t is None:
        return {}
    if not isinstance(t, dict):
        raise ConfigError("[run] must be a table")
    extra = set(t) - set(RUN_KEYS)
    if extra:
        raise ConfigError(f"run: unknown keys {sorted(extra)}")
    out = {}
    for k, v in t.items():
        typ = RUN_KEYS[k][0]
        if isinstance(v, bool) and typ is not bool:
            raise ConfigError(f"run.{k}: unexpected boolean")
        if not isinstance(v, typ):
            raise ConfigError(f"run.{k}: unexpected type {type(v).__name__}")
        out[k] = v
    if "structure_band" in out:
        sb = out["structure_band"]
        extra = set(sb) - {"gamma", "Gamma", "delta1", "delta0"}
        if extra:
            raise ConfigError(f"run.structure_band: unknown keys {sorted(extra)}")
        try:
            out["structure_band"] = Band(**{k: parse_number(v, f"run.structure_band.{k}")
                                            for k, v in sb.items()})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"run.structure_band: {exc}") from exc
    if "f" in out:
        parse_f(out["f"])  # syntax check only; evaluation needs the grid
    if "lambda" in out:
        parse_lambda(out["lambda"])
    for key in ("etas",):
        if key in out:
            out[key] = [parse_number(x, f"run.{key}") for x in out[key]]
    if "lambda_range" in out:
        lr = out["lambda_range"]
        if len(lr) != 2:
            raise ConfigError("run.lambda_range must have two entries")
        out["lambda_range"] = [parse_number(x, "run.lambda_range") for x in lr]
    return out


def loads_config(text: str, source: Optional[str] = None) -> ExperimentConfig:
    data = loads_toml(text)
    extra = set(data) - {"operator", "domain", "run"}
    if extra:
        raise ConfigError(f"unknown top-level tables {sorted(extra)}")
    if "operator" not in data:
        raise ConfigError("missing [operator] table")
    op = operator_from_table(data["operator"])
    grid = _domain(data.get("domain"))
    if op.dim is not None and op.dim != grid.dim:
        raise ConfigError(f"operator is {op.dim}-dimensional but domain.dim = {grid.dim}")
    return ExperimentConfig(op, grid, _run(data.get("run")), source)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    return loads_config(text, str(p))


# --------------------------------------------------------------------------
# right-hand sides

_FACTOR_RE = re.compile(r"^(const|sin|bump)\s*(?:\((.*)\))?$")


def parse_f(expr: str) -> tuple[float, list]:
    """Parse an f-expression into ``(sign, [(name, args), ...])``."""
    s = expr.strip()
    if not s:
        raise ConfigError("empty f expression")
    sign = 1.0
    if s.startswith("-"):
        sign, s = -1.0, s[1:].strip()
    factors = []
    depth, start = 0, 0
    parts = []
    for i, ch in enumerate(s):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "*" and depth == 0:
            parts.append(s[start:i])
            start = i + 1
    parts.append(s[start:])
    for part in parts:
        part = part.strip()
        m = _FACTOR_RE.match(part)
        if m is None:
            factors.append(("number", [parse_number(part, f"f factor {part!r}")]))
            continue
        name, args = m.group(1), m.group(2)
        vals = [] if not args or not args.strip() else [
            parse_number(a.strip(), f"f argument in {part!r}") for a in args.split(",")]
        if name == "const" and len(vals) != 1:
            raise ConfigError("const(c) takes one argument")
        if name == "sin" and len(vals) > 2:
            raise ConfigError("sin takes at most two mode numbers")
        if name == "bump" and len(vals) not in (0, 2, 3):
            raise ConfigError("bump takes (center, width) or (cx, cy, width)")
        factors.append((name, vals))
    return sign, factors


def f_from_expr(expr: str, grid: Grid) -> GridFunction:
    """Evaluate an f-expression at the nodes of ``grid``."""
    sign, factors = parse_f(expr)
    vals = np.full(grid.n_nodes, sign)
    lo, hi = np.array(grid.lo), np.array(grid.hi)
    x = grid.coords
    for name, args in factors:
        if name in ("number", "const"):
            vals = vals * args[0]
        elif name == "sin":
            ks = args or [1.0]
            ks = ks * grid.dim if len(ks) == 1 else ks
            if len(ks) != grid.dim:
                raise ConfigError(f"sin needs 1 or {grid.dim} mode numbers")
            for j, k in enumerate(ks):
                vals = vals * np.sin(k * math.pi * (x[:, j] - lo[j]) / (hi[j] - lo[j]))
        elif name == "bump":
            if not args:
                t = tent(grid)
            elif len(args) == 2:
                t = tent(grid, args[0], args[1])
            else:
                if grid.dim != 2:
                    raise ConfigError("bump(cx, cy, width) needs a 2D domain")
                t = tent(grid, args[:2], args[2])
            vals = vals * t.values
    vals[grid.n_interior:] = 0.0
    return GridFunction(grid, vals)


_LAMBDA_RE = re.compile(r"^\s*(lambda1_minus|lambda1_plus)\s*(?:([+-])\s*(.+))?$")


def parse_lambda(v) -> tuple[Optional[str], float]:
    """``(reference, offset)``: reference is None for a literal value."""
    if isinstance(v, str):
        m = _LAMBDA_RE.match(v)
        if m:
            off = 0.0
            if m.group(2):
                off = parse_number(m.group(3).strip(), "run.lambda offset")
                off = off if m.group(2) == "+" else -off
            return m.group(1), off
    return None, parse_number(v, "run.lambda")
