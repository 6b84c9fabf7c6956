"""TOML text form of operator descriptions.

An operator is a table with a ``kind`` key::

    kind = "pucci_plus" | "pucci_minus"      gamma, Gamma
    kind = "linear"                          A, b (optional), c (optional)
    kind = "infsup"                          families = [[{A=...}, ...], ...]
    kind = "shift"                           lam, [inner]
    kind = "homotopy"                        s, Gamma, [inner]
    kind = "star" | "substar"                [inner] (an infsup table)

``A`` is a number (multiple of the identity), a list (diagonal) or a list of
rows. Numbers may also be written as strings in multiples of pi, such as
``"pi"``, ``"2*pi"`` or ``"pi/2"``.
"""

from __future__ import annotations

import math
import re
import sys
from typing import Any

import tomli_w

from .operators import (Band, Homotopy, InfSup, Linear, LinearCoeffs, Operator, PucciMinus,
                        PucciPlus, Shift, StarEnvelope, SubstarEnvelope)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    """Invalid configuration text."""


_PI_RE = re.compile(r"^\s*(?:([-+]?[0-9.]+(?:[eE][-+]?\d+)?)\s*\*\s*)?(-?)pi\s*(?:/\s*([0-9.]+(?:[eE][-+]?\d+)?))?\s*$")


def parse_number(v, what: str = "value") -> float:
    """A float from a TOML number or a pi-multiple string."""
    if isinstance(v, bool):
        raise ConfigError(f"{what}: expected a number, got a boolean")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        m = _PI_RE.match(v)
        if m:
            coef = float(m.group(1)) if m.group(1) else 1.0
            if m.group(2):
                coef = -coef
            den = float(m.group(3)) if m.group(3) else 1.0
            return coef * math.pi / den
        try:
            return float(v)
        except ValueError:
            pass
    raise ConfigError(f"{what}: cannot read {v!r} as a number")


def _check_keys(table: dict, allowed: set, where: str):
    extra = set(table) - allowed
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")


def _matrix(v, where: str):
    if isinstance(v, list):
        if v and isinstance(v[0], list):
            return tuple(tuple(parse_number(x, where) for x in row) for row in v)
        return tuple(parse_number(x, where) for x in v)
    return parse_number(v, where)


def _coeffs(t: dict, where: str) -> LinearCoeffs:
    if not isinstance(t, dict):
        raise ConfigError(f"{where}: expected a table of coefficients")
    _check_keys(t, {"A", "b", "c"}, where)
    try:
        return LinearCoeffs(
            _matrix(t.get("A", 1.0), f"{where}.A"),
            None if "b" not in t else tuple(parse_number(x, f"{where}.b") for x in t["b"]),
            parse_number(t.get("c", 0.0), f"{where}.c"),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def operator_from_table(t: dict, where: str = "operator") -> Operator:
    """Build an operator from a parsed TOML table."""
    if not isinstance(t, dict) or "kind" not in t:
        raise ConfigError(f"{where}: missing 'kind'")
    kind = t["kind"]
    try:
        if kind in ("pucci_plus", "pucci_minus"):
            _check_keys(t, {"kind", "gamma", "Gamma"}, where)
            band = Band(parse_number(t["gamma"], f"{where}.gamma"),
                        parse_number(t["Gamma"], f"{where}.Gamma"))
            return PucciPlus(band) if kind == "pucci_plus" else PucciMinus(band)
        if kind == "linear":
            _check_keys(t, {"kind", "A", "b", "c"}, where)
            return Linear(_coeffs({k: v for k, v in t.items() if k != "kind"}, where))
        if kind == "infsup":
            _check_keys(t, {"kind", "families"}, where)
            fams = t["families"]
            if not isinstance(fams, list):
                raise ConfigError(f"{where}.families must be a list of lists")
            return InfSup(tuple(tuple(_coeffs(m, f"{where}.families[{i}][{j}]")
                                      for j, m in enumerate(fam)) for i, fam in enumerate(fams)))
        if kind == "shift":
            _check_keys(t, {"kind", "lam", "inner"}, where)
            return Shift(operator_from_table(t["inner"], f"{where}.inner"),
                         parse_number(t["lam"], f"{where}.lam"))
        if kind == "homotopy":
            _check_keys(t, {"kind", "s", "Gamma", "inner"}, where)
            return Homotopy(operator_from_table(t["inner"], f"{where}.inner"),
                            parse_number(t["s"], f"{where}.s"),
                            parse_number(t["Gamma"], f"{where}.Gamma"))
        if kind in ("star", "substar"):
            _check_keys(t, {"kind", "inner"}, where)
            inner = operator_from_table(t["inner"], f"{where}.inner")
            if not isinstance(inner, InfSup):
                raise ConfigError(f"{where}: envelopes need an infsup inner operator")
            return StarEnvelope(inner) if kind == "star" else SubstarEnvelope(inner)
    except KeyError as exc:
        raise ConfigError(f"{where}: missing key {exc}") from exc
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    raise ConfigError(f"{where}: unknown operator kind {kind!r}")


def _coeffs_table(m: LinearCoeffs) -> dict:
    if not m.is_constant:
        raise TypeError("operators with callable coefficients have no text form")
    out: dict[str, Any] = {}
    A = m.A
    out["A"] = [list(r) for r in A] if isinstance(A, tuple) and isinstance(A[0], tuple) else (
        list(A) if isinstance(A, tuple) else A)
    if m.b is not None:
        out["b"] = list(m.b)
    if m.c != 0.0:
        out["c"] = m.c
    return out


def operator_to_table(op: Operator) -> dict:
    if isinstance(op, (PucciPlus, PucciMinus)):
        return {"kind": "pucci_plus" if isinstance(op, PucciPlus) else "pucci_minus",
                "gamma": op.pucci_band.gamma, "Gamma": op.pucci_band.Gamma}
    if isinstance(op, Linear):
        return {"kind": "linear", **_coeffs_table(op.coeffs)}
    if isinstance(op, InfSup):
        return {"kind": "infsup", "families": [[_coeffs_table(m) for m in fam] for fam in op.families]}
    if isinstance(op, Shift):
        return {"kind": "shift", "lam": float(op.lam), "inner": operator_to_table(op.inner)}
    if isinstance(op, Homotopy):
        return {"kind": "homotopy", "s": float(op.s), "Gamma": float(op.Gamma),
                "inner": operator_to_table(op.inner)}
    if isinstance(op, (StarEnvelope, SubstarEnvelope)):
        return {"kind": "star" if isinstance(op, StarEnvelope) else "substar",
                "inner": operator_to_table(op.inner)}
    raise TypeError(f"unknown operator variant {type(op).__name__}")


def dump_operator(op: Operator) -> str:
    """TOML text with a single ``[operator]`` table; inverse of :func:`load_operator`."""
    return tomli_w.dumps({"operator": operator_to_table(op)})


def load_operator(text: str) -> Operator:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    _check_keys(data, {"operator"}, "top level")
    return operator_from_table(data.get("operator"), "operator")


def loads_toml(text: str) -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
