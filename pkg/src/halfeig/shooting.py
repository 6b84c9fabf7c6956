"""1D shooting: the spectrum of a homogeneous operator on an interval.

With ``u(lo) = 0`` and ``u'(lo) = +-1`` the initial value problem
``F(u'', u', u, x) = lam u`` has a unique solution (F is strictly
decreasing in ``u''``), and by positive homogeneity the two slope signs
cover every nontrivial solution up to scaling. ``lam`` is an eigenvalue
exactly when the solution for one of the slopes vanishes at ``hi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .operators import DimensionError, Operator, flatten

DEFAULT_STEPS = 2000


class _Members1D:
    """Flattened 1D coefficients ``-a u'' + b u' + c u`` grouped into families."""

    def __init__(self, op: Operator):
        if op.dim not in (None, 1):
            raise DimensionError("shooting needs a 1-dimensional operator")
        fams = flatten(op, 1)
        self.members = [m for fam in fams for m in fam]
        self.slices, start = [], 0
        for fam in fams:
            self.slices.append(slice(start, start + len(fam)))
            start += len(fam)
        self.constant = all(m.is_constant for m in self.members)
        if self.constant:
            self._abc = self._eval(None)
        band = op.band
        self.gamma, self.Gamma = band.gamma, band.Gamma

    def _eval(self, x):
        xa = None if x is None else np.array([x])
        a = np.array([m.A_at(xa, 1)[0, 0] for m in self.members])
        b = np.array([m.b_at(xa, 1)[0] for m in self.members])
        c = np.array([m.c_at(xa) for m in self.members])
        return a[:, None], b[:, None], c[:, None]

    def at(self, x: float):
        return self._abc if self.constant else self._eval(x)

    def value(self, m, p, z, x):
        """``F(m, p, z, x)`` for batches ``m, p, z`` of shape ``(B,)``."""
        a, b, c = self.at(x)
        v = -a * m + b * p + c * z
        return np.minimum.reduce([v[sl].max(axis=0) for sl in self.slices])

    def invert(self, p, z, lam, x):
        """Exact ``m`` with ``F(m, p, z, x) = lam z``: ``min_fam max_member (b p + (c - lam) z) / a``."""
        a, b, c = self.at(x)
        r = (b * p + (c - lam) * z) / a
        if len(self.slices) == 1:
            return r.max(axis=0)
        if len(self.slices) == len(self.members):
            return r.min(axis=0)
        return np.minimum.reduce([r[sl].max(axis=0) for sl in self.slices])

    def invert_bisect(self, p, z, lam, x, iters: int = 80):
        """Same root by bisection on the bracket implied by the ellipticity band."""
        g0 = self.value(np.zeros_like(z), p, z, x) - lam * z
        lo = np.where(g0 >= 0, g0 / self.Gamma, g0 / self.gamma)
        hi = np.where(g0 >= 0, g0 / self.gamma, g0 / self.Gamma)
        glo = self.value(lo, p, z, x) - lam * z
        ghi = self.value(hi, p, z, x) - lam * z
        scale = 1e-9 * (1 + np.abs(g0))
        if np.any(glo < -scale) or np.any(ghi > scale):
            raise ValueError("bisection bracket failed: operator violates the ellipticity band")
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            gm = self.value(mid, p, z, x) - lam * z
            lo = np.where(gm > 0, mid, lo)
            hi = np.where(gm > 0, hi, mid)
        return 0.5 * (lo + hi)


def _zero_count(prev_sign, u, count):
    s = np.sign(u)
    flip = (s != 0) & (prev_sign != 0) & (s != prev_sign)
    count = count + flip
    prev_sign = np.where(s != 0, s, prev_sign)
    return prev_sign, count


def shoot_batch(op: Operator, lams, domain, init_slope=1.0,
                n_steps: int = DEFAULT_STEPS, method: str = "exact", _members=None):
    """Vectorized :func:`shoot_1d`; ``lams`` and ``init_slope`` broadcast together."""
    lo, hi = map(float, domain)
    if not lo < hi:
        raise ValueError("domain must satisfy lo < hi")
    if method not in ("exact", "bisection"):
        raise ValueError(f"method must be 'exact' or 'bisection', got {method!r}")
    mem = _members or _Members1D(op)
    lams, v = np.broadcast_arrays(np.atleast_1d(np.asarray(lams, dtype=float)),
                                  np.asarray(init_slope, dtype=float))
    lams, v = lams.copy(), v.copy()
    inv = mem.invert if method == "exact" else mem.invert_bisect
    h = (hi - lo) / n_steps
    u = np.zeros_like(lams)
    prev_sign = np.zeros_like(lams)
    count = np.zeros(lams.shape, dtype=np.int64)
    for k in range(n_steps):
        x = lo + k * h
        k1u, k1v = v, inv(v, u, lams, x)
        k2u = v + 0.5 * h * k1v
        k2v = inv(k2u, u + 0.5 * h * k1u, lams, x + 0.5 * h)
        k3u = v + 0.5 * h * k2v
        k3v = inv(k3u, u + 0.5 * h * k2u, lams, x + 0.5 * h)
        k4u = v + h * k3v
        k4v = inv(k4u, u + h * k3u, lams, x + h)
        u = u + h / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
        v = v + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        if k < n_steps - 1:
            prev_sign, count = _zero_count(prev_sign, u, count)
    return u, count


def shoot_1d(op: Operator, lam: float, domain, init_slope: float = 1.0,
             n_steps: int = DEFAULT_STEPS, method: str = "exact") -> tuple[float, int]:
    """Integrate ``F(u'', u', u, x) = lam u`` from ``u(lo) = 0, u'(lo) = init_slope``.

    Returns the value at ``hi`` and the number of interior sign changes.
    ``method="exact"`` inverts the inf-sup form for ``u''`` in closed form;
    ``method="bisection"`` root-finds inside the ellipticity bracket.
    """
    u, count = shoot_batch(op, [lam], domain, init_slope, n_steps, method)
    return float(u[0]), int(count[0])


@dataclass
class Eigenvalue1D:
    lam: float
    slope: float
    zero_count: int


def _find_roots(mem, op, lams, slopes, domain, n_steps, tol, width=32):
    """End values on the ``lams`` grid for each slope, and every sign change
    refined by multisection to width ``tol``.

    The zero count of a root is taken at the left end of its final bracket,
    where the eigenfunction's last zero has not yet entered the interior.
    """
    L, S = len(lams), len(slopes)
    grid_l = np.tile(lams, S)
    grid_s = np.repeat(slopes, L)
    ends, counts = shoot_batch(op, grid_l, domain, grid_s, n_steps, _members=mem)
    ends, counts = ends.reshape(S, L), counts.reshape(S, L)
    a, b, sl, ea = [], [], [], []
    roots = []
    for j, slope in enumerate(slopes):
        sg = np.sign(ends[j])
        for i in np.nonzero(sg[:-1] * sg[1:] < 0)[0]:
            a.append(lams[i]); b.append(lams[i + 1]); sl.append(slope); ea.append(ends[j, i])
        for i in np.nonzero(sg == 0)[0]:
            roots.append(Eigenvalue1D(float(lams[i]), float(slope), int(counts[j, i])))
    if a:
        a, b, sl, ea = map(np.array, (a, b, sl, ea))
        t = np.linspace(0, 1, width + 2)[1:-1]
        rows = np.arange(len(a))
        while np.max(b - a) > tol:
            pts = a[:, None] + (b - a)[:, None] * t[None, :]
            e, _ = shoot_batch(op, pts.ravel(), domain, np.repeat(sl, width), n_steps, _members=mem)
            e = e.reshape(pts.shape)
            same = np.sign(e) == np.sign(ea)[:, None]
            k = np.where(same.all(axis=1), width, np.argmin(same, axis=1))
            left = np.maximum(k - 1, 0)
            new_a = np.where(k > 0, pts[rows, left], a)
            new_b = np.where(k < width, pts[rows, np.minimum(k, width - 1)], b)
            ea = np.where(k > 0, e[rows, left], ea)
            a, b = new_a, new_b
        _, ca = shoot_batch(op, a, domain, sl, n_steps, _members=mem)
        roots.extend(Eigenvalue1D(float(0.5 * (x + y)), float(s), int(c))
                     for x, y, s, c in zip(a, b, sl, ca))
    roots.sort(key=lambda r: r.lam)
    return ends, counts, roots


@dataclass
class ScanResult:
    lambdas: np.ndarray
    outcomes: list
    end_plus: np.ndarray
    end_minus: np.ndarray
    zero_counts_plus: np.ndarray
    zero_counts_minus: np.ndarray
    eigenvalues: list
    lambda1_max: float
    lambda2_estimate: Optional[float]
    gap: Optional[float]
    gap_certified: bool
    principal: dict = field(default_factory=dict)

    @property
    def zero_counts(self) -> np.ndarray:
        return np.maximum(self.zero_counts_plus, self.zero_counts_minus)


def shooting_principal(op: Operator, domain, n_steps: int = DEFAULT_STEPS,
                       tol: float = 1e-8, resolution: int = 100) -> dict:
    """Both principal half-eigenvalues by shooting: the smallest root with no
    interior zero for slope ``+1`` (positive eigenfunction) and for ``-1``."""
    mem = _Members1D(op)
    band = op.band
    lo, hi = map(float, domain)
    start = -band.delta0 - 1.0
    top = (band.Gamma * (math.pi / (hi - lo)) ** 2 + band.delta1 ** 2 / (4 * band.gamma)
           + band.delta0 + 1.0)
    out = {}
    a, b = start, top
    for _ in range(20):
        lams = np.linspace(a, b, resolution + 1)
        missing = [s for s in (1.0, -1.0) if ("plus" if s > 0 else "minus") not in out]
        _, _, roots = _find_roots(mem, op, lams, np.array(missing), domain, n_steps, tol)
        for s in missing:
            cand = [r.lam for r in roots if r.slope == s and r.zero_count == 0]
            if cand:
                out["plus" if s > 0 else "minus"] = min(cand)
        if len(out) == 2:
            return out
        a, b = b, b + 2 * (b - start)
    raise RuntimeError("principal eigenvalues not found by shooting")


def lambda2_scan_1d(op: Operator, domain, lambda_range, resolution: int = 400,
                    lambda1=None, n_steps: int = DEFAULT_STEPS, tol: float = 1e-8,
                    kernel_tol: float = 1e-6) -> ScanResult:
    """Scan ``lam`` over ``lambda_range`` for eigenvalues above the principal pair.

    ``lambda1`` is the pair ``(lam1_plus, lam1_minus)``; it is computed by
    shooting when omitted. ``lambda2_estimate`` is the smallest eigenvalue on
    the range whose eigenfunction changes sign. ``gap_certified`` records that
    neither end-value curve changes sign between ``max(lambda1)`` and that
    estimate (checked on the scan grid plus a dense grid below the range).
    Grid outcomes: ``nontrivial_kernel`` where an end value vanishes to
    ``kernel_tol``, ``no_convergence`` where the integration blew up, and
    ``solved`` (only the trivial solution) otherwise.
    """
    lam_lo, lam_hi = map(float, lambda_range)
    if not lam_lo < lam_hi:
        raise ValueError(f"empty lambda range ({lam_lo}, {lam_hi})")
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    mem = _Members1D(op)
    if lambda1 is None:
        pr = shooting_principal(op, domain, n_steps, tol)
        lambda1 = (pr["plus"], pr["minus"])
    l1max = float(max(lambda1))
    if lam_lo <= l1max:
        raise ValueError(f"lambda range must start above max principal eigenvalue {l1max:.10g}")
    lams = np.linspace(lam_lo, lam_hi, resolution)
    slopes = np.array([1.0, -1.0])
    ends, counts, roots = _find_roots(mem, op, lams, slopes, domain, n_steps, tol)
    eig = [r for r in roots if r.zero_count >= 1 and r.lam > l1max]
    lam2 = eig[0].lam if eig else None

    outcomes = []
    for i in range(len(lams)):
        e = ends[:, i]
        if not np.all(np.isfinite(e)):
            outcomes.append("no_convergence")
        elif np.min(np.abs(e)) <= kernel_tol:
            outcomes.append("nontrivial_kernel")
        else:
            outcomes.append("solved")

    gap = None if lam2 is None else lam2 - l1max
    certified = False
    if lam2 is not None:
        below = np.linspace(l1max + 1e-6, lam_lo, 100)
        eb, _ = shoot_batch(op, np.tile(below, 2), domain, np.repeat(slopes, len(below)),
                            n_steps, _members=mem)
        eb = eb.reshape(2, -1)
        certified = True
        for j in range(2):
            seq = np.concatenate([eb[j], ends[j][lams < lam2 - tol]])
            if np.any(np.sign(seq) != np.sign(seq[0])):
                certified = False
    return ScanResult(lams, outcomes, ends[0], ends[1], counts[0], counts[1], eig,
                      l1max, lam2, gap, certified,
                      {"plus": float(lambda1[0]), "minus": float(lambda1[1])})
