"""Monotone finite differences for operators in inf-sup form.

Every operator is first flattened into ``inf over families of sup over
members`` of linear coefficient sets. Each member is discretized once into
a stencil (diagonal weight plus one weight per neighbor offset), so
evaluating the discrete operator is a gather, a weighted sum, and a
max/min reduction.

2D diffusion ``-tr(A D^2u)`` is split over the axis and the two grid
diagonal directions::

    w_xy+ = a12+ / (hx hy),   w_xy- = a12- / (hx hy)
    w_x   = a11 / hx^2 - |a12| / (hx hy)
    w_y   = a22 / hy^2 - |a12| / (hx hy)

which is monotone exactly when ``w_x, w_y >= 0`` (diagonally dominant A
relative to the mesh). Matrices failing this raise, rather than silently
producing a non-monotone scheme.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .grid import Grid, GridFunction
from .operators import DimensionError, Jet, LinearCoeffs, Operator, Shift, flatten

OFFSETS = {
    1: ((-1,), (1,)),
    2: ((-1, 0), (1, 0), (0, -1), (0, 1), (1, 1), (-1, -1), (1, -1), (-1, 1)),
}
# offset positions of the backward / forward neighbor along each axis
_AXIS_NEIGHBORS = {1: ((0, 1),), 2: ((0, 1), (2, 3))}

DRIFT_MODES = ("upwind", "centered")


def _member_arrays(m: LinearCoeffs, coords: np.ndarray, dim: int):
    n = coords.shape[0]
    if m.is_constant:
        A = np.broadcast_to(m.A_at(None, dim), (n, dim, dim))
        b = np.broadcast_to(m.b_at(None, dim), (n, dim))
        c = np.full(n, m.c_at(None))
        return A, b, c
    A = np.stack([m.A_at(x, dim) for x in coords])
    b = np.stack([m.b_at(x, dim) for x in coords])
    c = np.array([m.c_at(x) for x in coords])
    return A, b, c


def member_stencil(A: np.ndarray, b: np.ndarray, c: np.ndarray, h: Sequence[float],
                   drift: str = "upwind"):
    """Stencil of ``-tr(A D^2) + b.D + c`` at each node.

    Returns ``(diag, offdiag)`` with shapes ``(N,)`` and ``(n_offsets, N)``;
    the discrete value at node i is ``diag[i] u_i + sum_o offdiag[o, i] u_{i+o}``.
    """
    if drift not in DRIFT_MODES:
        raise ValueError(f"drift must be one of {DRIFT_MODES}, got {drift!r}")
    dim = A.shape[-1]
    N = A.shape[0]
    C = np.zeros((len(OFFSETS[dim]), N))
    if dim == 1:
        w = A[:, 0, 0] / h[0] ** 2
        C[0] = C[1] = -w
        D = 2 * w
    else:
        hx, hy = h
        a11, a12, a22 = A[:, 0, 0], A[:, 0, 1], A[:, 1, 1]
        w3 = np.maximum(a12, 0.0) / (hx * hy)
        w4 = np.maximum(-a12, 0.0) / (hx * hy)
        w1 = a11 / hx**2 - np.abs(a12) / (hx * hy)
        w2 = a22 / hy**2 - np.abs(a12) / (hx * hy)
        scale = np.maximum(a11 / hx**2, a22 / hy**2)
        if np.any(np.minimum(w1, w2) < -1e-12 * scale):
            raise ValueError("diffusion matrix is not monotonically representable on this "
                             "grid (needs |a12| <= a11*hy/hx and |a12| <= a22*hx/hy)")
        w1, w2 = np.maximum(w1, 0.0), np.maximum(w2, 0.0)
        C[0] = C[1] = -w1
        C[2] = C[3] = -w2
        C[4] = C[5] = -w3
        C[6] = C[7] = -w4
        D = 2 * (w1 + w2 + w3 + w4)
    for axis, (back, fwd) in enumerate(_AXIS_NEIGHBORS[dim]):
        bj = b[:, axis]
        if drift == "upwind":
            bp, bm = np.maximum(bj, 0.0) / h[axis], np.minimum(bj, 0.0) / h[axis]
            D = D + bp - bm
            C[back] -= bp
            C[fwd] += bm
        else:
            C[fwd] += bj / (2 * h[axis])
            C[back] -= bj / (2 * h[axis])
    return D + c, C


@dataclass(frozen=True, eq=False)
class DiscreteLinearization:
    """Frozen-policy linear system ``matrix @ u_int + rhs_shift``.

    ``matrix`` couples interior nodes; ``boundary_matrix`` maps boundary
    values into the interior rows and ``rhs_shift`` is its product with
    the boundary values of the linearization point. ``policy`` holds the
    (family, member) indices chosen at each interior node.
    """

    matrix: sp.csr_matrix
    boundary_matrix: sp.csr_matrix
    rhs_shift: np.ndarray
    policy: np.ndarray

    def row(self, i: int) -> tuple[float, dict]:
        """Diagonal coefficient and neighbor coefficients (by node number)."""
        r = self.matrix.getrow(i).tocoo()
        rb = self.boundary_matrix.getrow(i).tocoo()
        n_int = self.matrix.shape[0]
        neigh = {int(j): float(v) for j, v in zip(r.col, r.data) if j != i}
        neigh.update({int(j) + n_int: float(v) for j, v in zip(rb.col, rb.data)})
        return float(self.matrix[i, i]), neigh


class DiscreteOperator:
    """Discretization of an operator on a grid.

    Built from :func:`flatten`; member coefficient arrays are evaluated
    once and reused for every apply / linearize call.
    """

    def __init__(self, op: Operator, grid: Grid, drift: str = "upwind"):
        if op.dim is not None and op.dim != grid.dim:
            raise DimensionError(f"operator is {op.dim}-dimensional, grid is {grid.dim}-dimensional")
        self.op = op
        self.grid = grid
        self.drift = drift
        dim = grid.dim
        square = dim == 1 or np.isclose(grid.h[0], grid.h[1], rtol=1e-12)
        self.families = flatten(op, dim, diagonal_frame=square)
        members = [m for fam in self.families for m in fam]
        self.members = members
        self.family_slices = []
        start = 0
        for fam in self.families:
            self.family_slices.append(slice(start, start + len(fam)))
            start += len(fam)

        coords = grid.interior_coords
        Ds, Cs = [], []
        for m in members:
            A, b, c = _member_arrays(m, coords, dim)
            D, C = member_stencil(A, b, c, grid.h, drift)
            Ds.append(D)
            Cs.append(C)
        self.diag = np.stack(Ds)  # (K, N)
        self.offdiag = np.stack(Cs)  # (K, n_off, N)

        # neighbor positions, as flat tensor indices and as node numbers
        shape = grid.shape
        interior_multi = np.unravel_index(grid.node_order[: grid.n_interior], shape)
        nbr = []
        for off in OFFSETS[dim]:
            idx = tuple(ix + o for ix, o in zip(interior_multi, off))
            nbr.append(np.ravel_multi_index(idx, shape))
        self.neighbor_flat = np.stack(nbr)  # (n_off, N)
        self.neighbor_node = grid.tensor_to_node[self.neighbor_flat]
        self.is_sup = len(self.families) == 1
        self.is_linear = len(members) == 1

    @property
    def n_members(self) -> int:
        return len(self.members)

    def member_values(self, u: GridFunction) -> np.ndarray:
        """Value of every linear member at every interior node, shape ``(K, N)``."""
        if u.grid != self.grid:
            raise ValueError("grid function lives on a different grid")
        U = u.values[self.neighbor_node]
        return self.diag * u.interior + np.einsum("koi,oi->ki", self.offdiag, U)

    def evaluate(self, u: GridFunction) -> tuple[np.ndarray, np.ndarray]:
        """Interior values of the inf-sup and the optimal policy.

        The policy has shape ``(N, 2)``: chosen family and the member index
        within it. Ties go to the lowest index.
        """
        V = self.member_values(u)
        N = V.shape[1]
        fam_vals = np.empty((len(self.families), N))
        fam_arg = np.empty((len(self.families), N), dtype=np.int64)
        for f, sl in enumerate(self.family_slices):
            block = V[sl]
            fam_arg[f] = np.argmax(block, axis=0)
            fam_vals[f] = block[fam_arg[f], np.arange(N)]
        best = np.argmin(fam_vals, axis=0)
        cols = np.arange(N)
        policy = np.stack([best, fam_arg[best, cols]], axis=1)
        return fam_vals[best, cols], policy

    def flat_policy(self, policy: np.ndarray) -> np.ndarray:
        starts = np.array([sl.start for sl in self.family_slices])
        return starts[policy[:, 0]] + policy[:, 1]

    def apply(self, u: GridFunction) -> GridFunction:
        vals, _ = self.evaluate(u)
        out = u.values.copy()
        out[: self.grid.n_interior] = vals
        return GridFunction(self.grid, out)

    def frozen_matrices(self, policy: np.ndarray) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        """Interior and boundary blocks of the linear operator picked by ``policy``."""
        grid = self.grid
        N = grid.n_interior
        k = self.flat_policy(policy)
        cols = np.arange(N)
        D = self.diag[k, cols]
        C = self.offdiag[k, :, cols].T  # (n_off, N)
        rows = np.broadcast_to(cols, C.shape)
        nb = self.neighbor_node
        interior = nb < N
        keep = C != 0
        mi = interior & keep
        A_int = sp.csr_matrix(
            (np.concatenate([D, C[mi]]), (np.concatenate([cols, rows[mi]]),
                                          np.concatenate([cols, nb[mi]]))),
            shape=(N, N))
        mb = ~interior & keep
        A_bdy = sp.csr_matrix((C[mb], (rows[mb], nb[mb] - N)), shape=(N, grid.n_nodes - N))
        return A_int, A_bdy

    def linearize(self, u: GridFunction) -> DiscreteLinearization:
        _, policy = self.evaluate(u)
        A_int, A_bdy = self.frozen_matrices(policy)
        return DiscreteLinearization(A_int, A_bdy, A_bdy @ u.boundary, policy)


@lru_cache(maxsize=64)
def discrete_operator(op: Operator, grid: Grid, drift: str = "upwind") -> DiscreteOperator:
    """Cached :class:`DiscreteOperator` (operators and grids are immutable)."""
    return DiscreteOperator(op, grid, drift)


def apply_operator(op: Operator, u: GridFunction, drift: str = "upwind") -> GridFunction:
    """Discrete residual field: the scheme at interior nodes, ``u`` on the boundary."""
    return discrete_operator(op, u.grid, drift).apply(u)


def linearize_at_policy(op: Operator, u: GridFunction, drift: str = "upwind") -> DiscreteLinearization:
    """Monotone linear system of the member active at each node of ``u``."""
    return discrete_operator(op, u.grid, drift).linearize(u)


def discrete_jet(u: GridFunction, node: int, drift_sign=None, cross_sign: float = 0.0) -> Jet:
    """Finite-difference jet of ``u`` at an interior node.

    Second derivatives are centered. The gradient is one-sided per axis:
    backward where ``drift_sign > 0``, forward where ``drift_sign <= 0``;
    ``drift_sign=None`` gives centered differences. In 2D the mixed
    derivative uses the ``(1, 1)`` diagonal pair when ``cross_sign > 0``,
    the ``(1, -1)`` pair when ``cross_sign < 0``, and their average
    otherwise. With these choices a linear member evaluated on this jet
    reproduces the scheme exactly.
    """
    grid = u.grid
    if not grid.is_interior(node):
        raise ValueError(f"node {node} is not an interior node")
    T = u.tensor()
    idx = np.array(grid.node_multi_index(node))
    h = grid.h
    dim = grid.dim

    def at(*off):
        return T[tuple(idx + np.array(off))]

    z = at(*(0,) * dim)
    M = np.zeros((dim, dim))
    p = np.zeros(dim)
    signs = None if drift_sign is None else np.broadcast_to(np.asarray(drift_sign, float), (dim,))
    axis_delta = []
    for j in range(dim):
        e = np.zeros(dim, dtype=int)
        e[j] = 1
        fwd, back = at(*e), at(*-e)
        delta = fwd - 2 * z + back
        axis_delta.append(delta)
        M[j, j] = delta / h[j] ** 2
        if signs is None:
            p[j] = (fwd - back) / (2 * h[j])
        elif signs[j] > 0:
            p[j] = (z - back) / h[j]
        else:
            p[j] = (fwd - z) / h[j]
    if dim == 2:
        hxy = h[0] * h[1]
        d_plus = at(1, 1) - 2 * z + at(-1, -1)
        d_minus = at(1, -1) - 2 * z + at(-1, 1)
        mixed_plus = (d_plus - axis_delta[0] - axis_delta[1]) / (2 * hxy)
        mixed_minus = (axis_delta[0] + axis_delta[1] - d_minus) / (2 * hxy)
        if cross_sign > 0:
            M[0, 1] = mixed_plus
        elif cross_sign < 0:
            M[0, 1] = mixed_minus
        else:
            M[0, 1] = (d_plus - d_minus) / (4 * hxy)
        M[1, 0] = M[0, 1]
    return Jet(M, p, z, grid.coords[node])


def check_monotone(op: Operator, u: GridFunction, node: int, eps: float,
                   drift: str = "upwind", rel_tol: float = 1e-9) -> bool:
    """Discrete degenerate ellipticity at ``node`` by direct perturbation.

    Raising any neighbor by ``eps`` must not increase the residual at
    ``node``; raising ``u(node)`` must not decrease the residual of the
    operator made proper by the shift ``+delta0 * z``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    grid = u.grid
    if not grid.is_interior(node):
        raise ValueError(f"node {node} is not an interior node")
    proper = Shift(op, -op.band.delta0)
    dop = discrete_operator(proper, grid, drift)
    base = dop.evaluate(u)[0][node]
    tol = rel_tol * (1 + abs(base) + np.max(np.abs(dop.diag[:, node])) * eps)
    for nb in np.unique(dop.neighbor_node[:, node]):
        vals = u.values.copy()
        vals[nb] += eps
        if dop.evaluate(GridFunction(grid, vals))[0][node] > base + tol:
            return False
    vals = u.values.copy()
    vals[node] += eps
    return dop.evaluate(GridFunction(grid, vals))[0][node] >= base - tol
