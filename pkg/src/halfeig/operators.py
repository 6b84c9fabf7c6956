"""Positively homogeneous, uniformly elliptic operators evaluated pointwise.

An operator acts on a second-order jet ``(M, p, z, x)`` (Hessian, gradient,
value, location). Sign convention: ``-tr(A M)`` is elliptic, so the
Laplacian enters as ``-Delta``.

The shipped variants are the Pucci extremal operators, linear operators,
finitely generated Bellman-Isaacs families ``inf_a sup_b L^{ab}``, and the
combinators ``Shift`` (``F - lam z``), ``Homotopy`` (``-s Gamma tr M +
(1-s) F``) and the two flattened envelopes of an inf-sup family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .reports import PropertyReport

Coefficient = Union[float, tuple, Callable]


class DimensionError(ValueError):
    """Jet dimension does not match what the operator expects."""


def sym_matrix(entries) -> np.ndarray:
    """Validate and return a read-only symmetric 1x1 or 2x2 matrix."""
    M = np.array(entries, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] not in (1, 2):
        raise DimensionError(f"expected a 1x1 or 2x2 matrix, got shape {M.shape}")
    if M.shape[0] == 2 and M[0, 1] != M[1, 0]:
        raise ValueError("matrix is not symmetric")
    M.setflags(write=False)
    return M


@dataclass(frozen=True, eq=False)
class Jet:
    """Pointwise second-order argument ``(M, p, z, x)`` of an operator."""

    M: np.ndarray
    p: np.ndarray
    z: float
    x: np.ndarray

    def __post_init__(self):
        M = sym_matrix(self.M)
        n = M.shape[0]
        p = np.array(self.p, dtype=float).reshape(-1)
        x = np.array(self.x, dtype=float).reshape(-1)
        if p.shape != (n,) or x.shape != (n,):
            raise DimensionError(f"jet with {n}x{n} Hessian needs p and x of length {n}")
        p.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", float(self.z))

    @property
    def n(self) -> int:
        return self.M.shape[0]

    @classmethod
    def zero(cls, n: int, x=None) -> "Jet":
        return cls(np.zeros((n, n)), np.zeros(n), 0.0, np.zeros(n) if x is None else x)

    def scaled(self, t: float) -> "Jet":
        return Jet(t * self.M, t * self.p, t * self.z, self.x)

    def _same_point(self, other: "Jet"):
        if self.n != other.n or not np.array_equal(self.x, other.x):
            raise ValueError("jets must share the same point x")

    def __add__(self, other: "Jet") -> "Jet":
        self._same_point(other)
        return Jet(self.M + other.M, self.p + other.p, self.z + other.z, self.x)

    def __sub__(self, other: "Jet") -> "Jet":
        self._same_point(other)
        return Jet(self.M - other.M, self.p - other.p, self.z - other.z, self.x)

    def __neg__(self) -> "Jet":
        return Jet(-self.M, -self.p, -self.z, self.x)

    def to_dict(self) -> dict:
        return {"M": self.M.tolist(), "p": self.p.tolist(), "z": self.z, "x": self.x.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Jet":
        return cls(d["M"], d["p"], d["z"], d["x"])


@dataclass(frozen=True)
class Band:
    """Structure constants: ellipticity ``gamma <= Gamma`` and the
    first/zeroth-order Lipschitz bounds ``delta1``, ``delta0``."""

    gamma: float
    Gamma: float
    delta1: float = 0.0
    delta0: float = 0.0

    def __post_init__(self):
        for name in ("gamma", "Gamma", "delta1", "delta0"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"band.{name} must be finite")
            object.__setattr__(self, name, v)
        if not 0 < self.gamma <= self.Gamma:
            raise ValueError(f"need 0 < gamma <= Gamma, got gamma={self.gamma}, Gamma={self.Gamma}")
        if self.delta1 < 0 or self.delta0 < 0:
            raise ValueError("delta1 and delta0 must be nonnegative")

    @staticmethod
    def join(bands: Iterable["Band"]) -> "Band":
        bands = list(bands)
        return Band(
            min(b.gamma for b in bands),
            max(b.Gamma for b in bands),
            max(b.delta1 for b in bands),
            max(b.delta0 for b in bands),
        )


def _freeze(value):
    """Coerce list/array coefficients to nested tuples so specs stay hashable."""
    if value is None or callable(value):
        return value
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return float(arr)
    return tuple(map(tuple, arr)) if arr.ndim == 2 else tuple(arr.tolist())


@dataclass(frozen=True)
class LinearCoeffs:
    """Coefficients of ``L u = -tr(A D^2u) + b.Du + c u``.

    ``A`` may be a scalar (multiple of the identity, valid in any dimension),
    a diagonal tuple, a full symmetric matrix, or a callable ``x -> matrix``.
    ``b`` and ``c`` likewise accept constants or callables. Callable
    coefficients must come with a declared ``band``; the maps are assumed
    Lipschitz in ``x``.
    """

    A: Coefficient = 1.0
    b: Optional[Coefficient] = None
    c: Coefficient = 0.0
    band: Optional[Band] = None

    def __post_init__(self):
        object.__setattr__(self, "A", _freeze(self.A))
        object.__setattr__(self, "b", _freeze(self.b))
        object.__setattr__(self, "c", _freeze(self.c))
        if not self.is_constant:
            if self.band is None:
                raise ValueError("callable coefficients need a declared band")
            return
        eig = self._A_eigs()
        if eig[0] <= 0:
            raise ValueError(f"diffusion matrix must be positive definite, eigenvalues {eig}")
        if self.band is not None:
            b = self.band
            if eig[0] < b.gamma - 1e-12 or eig[-1] > b.Gamma + 1e-12:
                raise ValueError(f"A eigenvalues {eig} outside declared band [{b.gamma}, {b.Gamma}]")
            if self._b_norm() > b.delta1 + 1e-12 or abs(self.c) > b.delta0 + 1e-12:
                raise ValueError("drift or zeroth-order coefficient exceeds declared band")

    @property
    def is_constant(self) -> bool:
        return not any(callable(v) for v in (self.A, self.b, self.c))

    @property
    def dim(self) -> Optional[int]:
        """Spatial dimension fixed by the coefficients, or None if any."""
        for v in (self.A, self.b):
            if isinstance(v, tuple):
                return len(v)
        return None

    def _A_eigs(self) -> np.ndarray:
        A = self.A
        if isinstance(A, float):
            return np.array([A])
        return np.linalg.eigvalsh(self.A_at(None, len(A)))

    def _b_norm(self) -> float:
        return 0.0 if self.b is None else float(np.linalg.norm(self.b))

    def A_at(self, x, n: int) -> np.ndarray:
        A = self.A(x) if callable(self.A) else self.A
        if isinstance(A, (int, float)):
            return float(A) * np.eye(n)
        A = np.asarray(A, dtype=float)
        if A.ndim == 1:
            A = np.diag(A)
        if A.shape != (n, n):
            raise DimensionError(f"diffusion matrix shape {A.shape} does not match dimension {n}")
        return A

    def b_at(self, x, n: int) -> np.ndarray:
        b = self.b(x) if callable(self.b) else self.b
        if b is None:
            return np.zeros(n)
        b = np.asarray(b, dtype=float).reshape(-1)
        if b.shape != (n,):
            raise DimensionError(f"drift of length {b.size} does not match dimension {n}")
        return b

    def c_at(self, x) -> float:
        return float(self.c(x) if callable(self.c) else self.c)

    def value(self, jet: Jet) -> float:
        n = jet.n
        A = self.A_at(jet.x, n)
        return float(-np.sum(A * jet.M) + self.b_at(jet.x, n) @ jet.p + self.c_at(jet.x) * jet.z)

    def structure_band(self) -> Band:
        if self.band is not None:
            return self.band
        eig = self._A_eigs()
        return Band(eig[0], eig[-1], self._b_norm(), abs(self.c))

    def affine(self, scale: float = 1.0, add_A: float = 0.0, add_c: float = 0.0) -> "LinearCoeffs":
        """Return the coefficients of ``scale * L + add_A * (-Delta) + add_c``."""
        if scale == 1.0 and add_A == 0.0 and add_c == 0.0:
            return self
        band = None
        if self.band is not None:
            b = self.band
            band = Band(scale * b.gamma + add_A, scale * b.Gamma + add_A,
                        scale * b.delta1, scale * b.delta0 + abs(add_c))
        if self.is_constant:
            A = self.A
            if isinstance(A, float):
                newA = scale * A + add_A
            else:
                M = np.asarray(A, dtype=float)
                M = np.diag(M) if M.ndim == 1 else M
                newA = scale * M + add_A * np.eye(len(M))
            newb = None if self.b is None else tuple(scale * v for v in self.b)
            return LinearCoeffs(newA, newb, scale * self.c + add_c, band)
        src = self

        def A_fn(x):
            A = np.asarray(src.A(x) if callable(src.A) else src.A, dtype=float)
            if A.ndim == 0:
                return float(scale * A + add_A)
            A = np.diag(A) if A.ndim == 1 else A
            return scale * A + add_A * np.eye(len(A))

        def b_fn(x):
            if src.b is None:
                return None
            return scale * np.asarray(src.b(x) if callable(src.b) else src.b, dtype=float)

        return LinearCoeffs(A_fn, b_fn, lambda x: scale * src.c_at(x) + add_c, band)


# --------------------------------------------------------------------------
# Pucci extremal operators


def _eig_split(M) -> tuple[np.ndarray, np.ndarray]:
    """Sum of positive and of |negative| eigenvalues of symmetric matrices.

    Closed form for n <= 2; accepts a single matrix or a stack ``(..., n, n)``.
    The arithmetic is arranged so that negating ``M`` swaps the two sums
    bit-for-bit.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[-1]
    if n == 1:
        e = M[..., 0, 0]
        return np.maximum(e, 0.0), np.maximum(-e, 0.0)
    if n != 2:
        raise DimensionError("Pucci operators are implemented for n <= 2")
    a, b, d = M[..., 0, 0], M[..., 0, 1], M[..., 1, 1]
    mean = 0.5 * (a + d)
    rad = np.hypot(0.5 * (a - d), b)
    lo, hi = mean - rad, mean + rad
    pos = np.maximum(lo, 0.0) + np.maximum(hi, 0.0)
    neg = np.maximum(-hi, 0.0) + np.maximum(-lo, 0.0)
    return pos, neg


def pucci_plus(M, band: Band):
    """``sup over A in [[gamma, Gamma]] of -tr(A M)``.

    Equals ``-gamma * sum(positive eigenvalues) + Gamma * sum(|negative|)``.
    Returns a float for one matrix, an array for a stack.
    """
    pos, neg = _eig_split(M)
    out = -band.gamma * pos + band.Gamma * neg
    return float(out) if np.ndim(out) == 0 else out


def pucci_minus(M, band: Band):
    """``inf over A in [[gamma, Gamma]] of -tr(A M)``; equals ``-pucci_plus(-M)``."""
    pos, neg = _eig_split(M)
    out = -band.Gamma * pos + band.gamma * neg
    return float(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# Operator descriptions


class Operator:
    """Base class of the operator variants; use :func:`evaluate` to apply."""

    @property
    def band(self) -> Band:
        raise NotImplementedError

    @property
    def dim(self) -> Optional[int]:
        return None

    def __call__(self, jet: Jet) -> float:
        return evaluate(self, jet)


@dataclass(frozen=True)
class PucciPlus(Operator):
    pucci_band: Band

    @property
    def band(self) -> Band:
        return Band(self.pucci_band.gamma, self.pucci_band.Gamma)


@dataclass(frozen=True)
class PucciMinus(Operator):
    pucci_band: Band

    @property
    def band(self) -> Band:
        return Band(self.pucci_band.gamma, self.pucci_band.Gamma)


@dataclass(frozen=True)
class Linear(Operator):
    coeffs: LinearCoeffs

    @property
    def band(self) -> Band:
        return self.coeffs.structure_band()

    @property
    def dim(self) -> Optional[int]:
        return self.coeffs.dim


@dataclass(frozen=True)
class InfSup(Operator):
    """``inf over families of sup over members`` of linear operators."""

    families: tuple

    def __post_init__(self):
        fams = tuple(tuple(fam) for fam in self.families)
        if not fams or any(len(f) == 0 for f in fams):
            raise ValueError("InfSup needs at least one family, each nonempty")
        for fam in fams:
            for m in fam:
                if not isinstance(m, LinearCoeffs):
                    raise TypeError("InfSup members must be LinearCoeffs")
        dims = {m.dim for fam in fams for m in fam} - {None}
        if len(dims) > 1:
            raise DimensionError(f"members disagree on dimension: {sorted(dims)}")
        object.__setattr__(self, "families", fams)

    @property
    def members(self) -> tuple:
        return tuple(m for fam in self.families for m in fam)

    @property
    def band(self) -> Band:
        return Band.join(m.structure_band() for m in self.members)

    @property
    def dim(self) -> Optional[int]:
        dims = {m.dim for m in self.members} - {None}
        return dims.pop() if dims else None

    @property
    def is_sup(self) -> bool:
        return len(self.families) == 1

    @property
    def is_inf(self) -> bool:
        return all(len(f) == 1 for f in self.families)


@dataclass(frozen=True)
class Shift(Operator):
    """``inner(M, p, z, x) - lam * z``."""

    inner: Operator
    lam: float

    @property
    def band(self) -> Band:
        b = self.inner.band
        return Band(b.gamma, b.Gamma, b.delta1, b.delta0 + abs(self.lam))

    @property
    def dim(self):
        return self.inner.dim


@dataclass(frozen=True)
class Homotopy(Operator):
    """``-s * Gamma * tr(M) + (1 - s) * inner``, connecting ``inner`` (s=0)
    to ``-Gamma * Delta`` (s=1)."""

    inner: Operator
    s: float
    Gamma: float

    def __post_init__(self):
        if not 0.0 <= self.s <= 1.0:
            raise ValueError(f"homotopy parameter s={self.s} outside [0, 1]")
        if self.Gamma <= 0:
            raise ValueError("homotopy Gamma must be positive")

    @property
    def band(self) -> Band:
        b, s = self.inner.band, self.s
        return Band(s * self.Gamma + (1 - s) * b.gamma, s * self.Gamma + (1 - s) * b.Gamma,
                    (1 - s) * b.delta1, (1 - s) * b.delta0)

    @property
    def dim(self):
        return self.inner.dim


@dataclass(frozen=True)
class StarEnvelope(Operator):
    """Upper envelope of an inf-sup family: sup over all of its members."""

    inner: InfSup

    @property
    def band(self) -> Band:
        return self.inner.band

    @property
    def dim(self):
        return self.inner.dim


@dataclass(frozen=True)
class SubstarEnvelope(Operator):
    """Lower envelope of an inf-sup family: inf over all of its members."""

    inner: InfSup

    @property
    def band(self) -> Band:
        return self.inner.band

    @property
    def dim(self):
        return self.inner.dim


def evaluate(op: Operator, jet: Jet) -> float:
    """Value of ``op`` at ``jet``."""
    if op.dim is not None and op.dim != jet.n:
        raise DimensionError(f"operator is {op.dim}-dimensional, jet is {jet.n}-dimensional")
    if isinstance(op, PucciPlus):
        return pucci_plus(jet.M, op.pucci_band)
    if isinstance(op, PucciMinus):
        return pucci_minus(jet.M, op.pucci_band)
    if isinstance(op, Linear):
        return op.coeffs.value(jet)
    if isinstance(op, InfSup):
        return min(max(m.value(jet) for m in fam) for fam in op.families)
    if isinstance(op, Shift):
        return evaluate(op.inner, jet) - op.lam * jet.z
    if isinstance(op, Homotopy):
        return -op.s * op.Gamma * float(np.trace(jet.M)) + (1 - op.s) * evaluate(op.inner, jet)
    if isinstance(op, StarEnvelope):
        return max(m.value(jet) for m in op.inner.members)
    if isinstance(op, SubstarEnvelope):
        return min(m.value(jet) for m in op.inner.members)
    raise TypeError(f"unknown operator variant {type(op).__name__}")


def star_envelope(op: Operator, which: str = "upper") -> Operator:
    """Flattened upper (``which="upper"``) or lower envelope of an InfSup operator."""
    if not isinstance(op, InfSup):
        raise TypeError(f"envelopes are defined for InfSup operators, not {type(op).__name__}")
    if which == "upper":
        return StarEnvelope(op)
    if which == "lower":
        return SubstarEnvelope(op)
    raise ValueError(f"which must be 'upper' or 'lower', got {which!r}")


def reflect(op: Operator) -> Operator:
    """The operator ``-F(-M, -p, -z, x)``.

    Defined for every variant except a genuine inf-sup family (whose
    reflection is a sup-inf and falls outside the shipped variants).
    """
    if isinstance(op, PucciPlus):
        return PucciMinus(op.pucci_band)
    if isinstance(op, PucciMinus):
        return PucciPlus(op.pucci_band)
    if isinstance(op, Linear):
        return op
    if isinstance(op, InfSup):
        if op.is_sup:
            return InfSup(tuple((m,) for m in op.members))
        if op.is_inf:
            return InfSup((op.members,))
        raise ValueError("the reflection of a genuine inf-sup family is a sup-inf family")
    if isinstance(op, Shift):
        return Shift(reflect(op.inner), op.lam)
    if isinstance(op, Homotopy):
        return Homotopy(reflect(op.inner), op.s, op.Gamma)
    if isinstance(op, StarEnvelope):
        return SubstarEnvelope(op.inner)
    if isinstance(op, SubstarEnvelope):
        return StarEnvelope(op.inner)
    raise TypeError(f"unknown operator variant {type(op).__name__}")


def pucci_corners(band: Band, dim: int, diagonal_frame: bool = True) -> list[LinearCoeffs]:
    """Constant diffusion matrices at the corners of ``[[gamma, Gamma]]``.

    In 1D these are exactly ``gamma`` and ``Gamma``. In 2D they are the
    diagonal matrices with entries in ``{gamma, Gamma}`` in the grid frame and,
    when ``diagonal_frame`` is set, in the frame of the grid diagonals.
    """
    g, G = band.gamma, band.Gamma
    if dim == 1:
        return [LinearCoeffs((g,)), LinearCoeffs((G,))] if g != G else [LinearCoeffs((g,))]
    if dim != 2:
        raise DimensionError("Pucci operators are implemented for n <= 2")
    vals = sorted({g, G})
    out = []
    for a1 in vals:
        for a2 in vals:
            out.append(LinearCoeffs(((a1, 0.0), (0.0, a2))))
    if diagonal_frame and g != G:
        for a1, a2 in ((g, G), (G, g)):
            mean, half = 0.5 * (a1 + a2), 0.5 * (a1 - a2)
            out.append(LinearCoeffs(((mean, half), (half, mean))))
    return out


def flatten(op: Operator, dim: int, diagonal_frame: bool = True) -> tuple:
    """Express ``op`` as ``inf over families of sup over members`` of linear
    coefficient sets, as a tuple of tuples of :class:`LinearCoeffs`.

    Exact for every variant in 1D. In 2D the Pucci operators are replaced by
    the sup/inf over :func:`pucci_corners`, which is exact only on Hessians
    diagonal in one of the two frames.
    """
    if isinstance(op, PucciPlus):
        return (tuple(pucci_corners(op.pucci_band, dim, diagonal_frame)),)
    if isinstance(op, PucciMinus):
        return tuple((m,) for m in pucci_corners(op.pucci_band, dim, diagonal_frame))
    if isinstance(op, Linear):
        return ((op.coeffs,),)
    if isinstance(op, InfSup):
        return op.families
    if isinstance(op, StarEnvelope):
        return (op.inner.members,)
    if isinstance(op, SubstarEnvelope):
        return tuple((m,) for m in op.inner.members)
    if isinstance(op, Shift):
        inner = flatten(op.inner, dim, diagonal_frame)
        return tuple(tuple(m.affine(add_c=-op.lam) for m in fam) for fam in inner)
    if isinstance(op, Homotopy):
        inner = flatten(op.inner, dim, diagonal_frame)
        return tuple(tuple(m.affine(scale=1 - op.s, add_A=op.s * op.Gamma) for m in fam)
                     for fam in inner)
    raise TypeError(f"unknown operator variant {type(op).__name__}")


# --------------------------------------------------------------------------
# Structural checks


def _describe(op: Operator) -> str:
    from .grammar import dump_operator

    try:
        return dump_operator(op)
    except (TypeError, ValueError):
        return repr(op)


def check_homogeneity(op: Operator, samples: Sequence[Jet], ts: Sequence[float],
                      rel_tol: float = 1e-12) -> PropertyReport:
    """Check ``F(t j) == t F(j)`` for every sample jet and every ``t >= 0``."""
    if not samples:
        raise ValueError("need at least one sample jet")
    worst, failures = math.inf, []
    for jet in samples:
        base = evaluate(op, jet)
        for t in ts:
            if t < 0:
                raise ValueError("homogeneity is checked for t >= 0 only")
            lhs, rhs = evaluate(op, jet.scaled(t)), t * base
            slack = rel_tol * (1 + abs(rhs)) - abs(lhs - rhs)
            worst = min(worst, slack)
            if slack < 0:
                failures.append({"jet": jet.to_dict(), "t": t, "lhs": lhs, "rhs": rhs})
    cx = None
    if failures:
        cx = {"check": "homogeneity", "op": _describe(op), "rel_tol": rel_tol, **failures[0]}
    return PropertyReport("homogeneity", not failures, worst, cx,
                          details={"failures": failures, "evaluations": len(samples) * len(ts)})


def check_structure(op: Operator, band: Band, sample_pairs: Sequence[tuple[Jet, Jet]],
                    tol: float = 1e-10) -> PropertyReport:
    """Check the Pucci sandwich of ``F(j1) - F(j2)`` against ``band``."""
    worst, failures = math.inf, []
    for j1, j2 in sample_pairs:
        d = j1 - j2
        diff = evaluate(op, j1) - evaluate(op, j2)
        first = band.delta1 * float(np.linalg.norm(d.p)) + band.delta0 * abs(d.z)
        lo = pucci_minus(d.M, band) - first - tol
        hi = pucci_plus(d.M, band) + first + tol
        slack = min(diff - lo, hi - diff)
        worst = min(worst, slack)
        if slack < 0:
            failures.append({"j1": j1.to_dict(), "j2": j2.to_dict(), "diff": diff,
                             "lower": lo, "upper": hi})
    cx = None
    if failures:
        cx = {"check": "structure", "op": _describe(op), "band": vars(band).copy(),
              "tol": tol, **failures[0]}
    return PropertyReport("structure", not failures, worst, cx,
                          details={"failures": failures, "pairs": len(sample_pairs)})


def random_jets(rng: np.random.Generator, n: int, count: int, scale: float = 1.0,
                x=None) -> list[Jet]:
    """Random jets at a common point (default: a random point in [0, 1]^n)."""
    x = rng.uniform(0, 1, n) if x is None else np.asarray(x, dtype=float)
    out = []
    for _ in range(count):
        R = rng.normal(size=(n, n)) * scale
        out.append(Jet(0.5 * (R + R.T), rng.normal(size=n) * scale, rng.normal() * scale, x))
    return out
