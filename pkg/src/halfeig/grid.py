"""Uniform tensor grids with a Dirichlet boundary ring, and nodal fields."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Union

import numpy as np


def _as_tuple(v, dim: int, cast=float) -> tuple:
    arr = np.atleast_1d(np.asarray(v))
    if arr.size == 1:
        arr = np.repeat(arr, dim)
    if arr.size != dim:
        raise ValueError(f"expected {dim} values, got {arr.size}")
    return tuple(cast(a) for a in arr)


@dataclass(frozen=True)
class Grid:
    """Uniform grid on ``[lo, hi]`` (1D) or a rectangle (2D).

    Each axis has ``n`` interior points plus two boundary points, so
    ``h = (hi - lo) / (n + 1)``. Nodes are numbered interior first, then
    boundary, each block in row-major order of the tensor index.
    """

    dim: int
    lo: tuple
    hi: tuple
    n: tuple

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        lo = _as_tuple(self.lo, self.dim)
        hi = _as_tuple(self.hi, self.dim)
        n = _as_tuple(self.n, self.dim, int)
        for a, b in zip(lo, hi):
            if not (math.isfinite(a) and math.isfinite(b)) or not a < b:
                raise ValueError(f"degenerate box: lo={lo}, hi={hi}")
        if min(n) < 3:
            raise ValueError(f"need at least 3 interior points per axis, got {n}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "n", n)

    @property
    def h(self) -> tuple:
        return tuple((b - a) / (k + 1) for a, b, k in zip(self.lo, self.hi, self.n))

    @property
    def shape(self) -> tuple:
        """Shape of the full tensor, boundary included."""
        return tuple(k + 2 for k in self.n)

    @property
    def n_interior(self) -> int:
        return int(np.prod(self.n))

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def diam(self) -> float:
        return float(math.hypot(*(b - a for a, b in zip(self.lo, self.hi))))

    @property
    def volume(self) -> float:
        return float(np.prod([b - a for a, b in zip(self.lo, self.hi)]))

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(a, b, k + 2) for a, b, k in zip(self.lo, self.hi, self.n)]

    @cached_property
    def _interior_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[(slice(1, -1),) * self.dim] = True
        return mask

    @cached_property
    def node_order(self) -> np.ndarray:
        """Flat tensor index of each node, in node-number order."""
        flat = self._interior_mask.ravel()
        idx = np.arange(flat.size)
        return np.concatenate([idx[flat], idx[~flat]])

    @cached_property
    def tensor_to_node(self) -> np.ndarray:
        inv = np.empty(self.n_nodes, dtype=np.int64)
        inv[self.node_order] = np.arange(self.n_nodes)
        return inv

    @cached_property
    def coords(self) -> np.ndarray:
        """Node coordinates in node-number order, shape ``(n_nodes, dim)``."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        full = np.stack([m.ravel() for m in mesh], axis=1)
        return full[self.node_order]

    @property
    def interior_coords(self) -> np.ndarray:
        return self.coords[: self.n_interior]

    def is_interior(self, node: int) -> bool:
        return 0 <= node < self.n_interior

    def node_multi_index(self, node: int) -> tuple:
        return np.unravel_index(int(self.node_order[node]), self.shape)

    def node_of(self, multi_index) -> int:
        return int(self.tensor_to_node[np.ravel_multi_index(tuple(multi_index), self.shape)])

    def interior_tensor(self, values_interior: np.ndarray) -> np.ndarray:
        """Reshape interior values (node order) into the ``n``-shaped tensor."""
        return np.asarray(values_interior).reshape(self.n)

    def scaled(self, factor: float) -> "Grid":
        """Same node count on the box scaled about ``lo`` by ``factor``."""
        hi = tuple(a + factor * (b - a) for a, b in zip(self.lo, self.hi))
        return Grid(self.dim, self.lo, hi, self.n)


def build_grid(dim: int, lo, hi, n_interior) -> Grid:
    """Uniform tensor grid with a Dirichlet boundary ring."""
    return Grid(dim, lo, hi, n_interior)


class GridFunction:
    """Nodal values on a grid, in node-number order (interior first).

    Values are stored read-only; arithmetic returns new instances.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        vals = np.array(values, dtype=float).reshape(-1)
        if vals.size != grid.n_nodes:
            raise ValueError(f"expected {grid.n_nodes} nodal values, got {vals.size}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function values must be finite")
        vals.setflags(write=False)
        self.grid = grid
        self.values = vals

    @classmethod
    def from_interior(cls, grid: Grid, interior, boundary=0.0) -> "GridFunction":
        vals = np.empty(grid.n_nodes)
        vals[: grid.n_interior] = np.asarray(interior, dtype=float).reshape(-1)
        vals[grid.n_interior:] = boundary
        return cls(grid, vals)

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[[np.ndarray], np.ndarray],
                      zero_boundary: bool = False) -> "GridFunction":
        """Sample ``fn`` (called with an ``(N, dim)`` coordinate array) at every node."""
        vals = np.asarray(fn(grid.coords), dtype=float).reshape(-1)
        if zero_boundary:
            vals = vals.copy()
            vals[grid.n_interior:] = 0.0
        return cls(grid, vals)

    @classmethod
    def zeros(cls, grid: Grid) -> "GridFunction":
        return cls(grid, np.zeros(grid.n_nodes))

    @property
    def interior(self) -> np.ndarray:
        return self.values[: self.grid.n_interior]

    @property
    def boundary(self) -> np.ndarray:
        return self.values[self.grid.n_interior:]

    def tensor(self) -> np.ndarray:
        """Values as the full tensor (boundary ring included)."""
        full = np.empty(self.grid.n_nodes)
        full[self.grid.node_order] = self.values
        return full.reshape(self.grid.shape)

    @classmethod
    def from_tensor(cls, grid: Grid, full: np.ndarray) -> "GridFunction":
        return cls(grid, np.asarray(full, dtype=float).ravel()[grid.node_order])

    def sup_norm(self, interior_only: bool = True) -> float:
        v = self.interior if interior_only else self.values
        return float(np.max(np.abs(v)))

    def lp_norm(self, p: float) -> float:
        """Riemann-sum ``L^p`` norm over the interior nodes."""
        cell = float(np.prod(self.grid.h))
        return float((cell * np.sum(np.abs(self.interior) ** p)) ** (1.0 / p))

    def _check(self, other: "GridFunction"):
        if other.grid != self.grid:
            raise ValueError("grid functions live on different grids")

    def __add__(self, other):
        if isinstance(other, GridFunction):
            self._check(other)
            return GridFunction(self.grid, self.values + other.values)
        return GridFunction(self.grid, self.values + other)

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            self._check(other)
            return GridFunction(self.grid, self.values - other.values)
        return GridFunction(self.grid, self.values - other)

    def __mul__(self, t):
        if isinstance(t, GridFunction):
            self._check(t)
            return GridFunction(self.grid, self.values * t.values)
        return GridFunction(self.grid, self.values * float(t))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def __repr__(self):
        return f"GridFunction(dim={self.grid.dim}, n={self.grid.n}, sup={self.sup_norm():.6g})"

    # CSV ------------------------------------------------------------------

    def to_csv(self, path: Union[str, Path, None] = None) -> str:
        """Write columns ``node_index, x, [y], value`` with 17 significant digits."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = ["x", "y"][: self.grid.dim]
        w.writerow(["node_index", *names, "value"])
        for i, (xy, v) in enumerate(zip(self.grid.coords, self.values)):
            w.writerow([i, *("%.17g" % c for c in xy), "%.17g" % v])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, newline="")
        return text

    @classmethod
    def from_csv(cls, grid: Grid, source: Union[str, Path]) -> "GridFunction":
        """Read a field written by :meth:`to_csv` (path or CSV text) onto ``grid``."""
        text = source if isinstance(source, str) and "\n" in source else Path(source).read_text()
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        expected = ["node_index", *["x", "y"][: grid.dim], "value"]
        if header != expected:
            raise ValueError(f"unexpected CSV header {header}, expected {expected}")
        if len(body) != grid.n_nodes:
            raise ValueError(f"CSV has {len(body)} rows, grid has {grid.n_nodes} nodes")
        vals = np.empty(grid.n_nodes)
        for row in body:
            vals[int(row[0])] = float(row[-1])
        return cls(grid, vals)


def tent(grid: Grid, center=None, width=None) -> GridFunction:
    """Tent of height 1 (product of 1D tents in 2D), zero on the boundary.

    Defaults to the middle half of the box: centered, with support of width
    ``(hi - lo) / 2`` per axis.
    """
    lo, hi = np.array(grid.lo), np.array(grid.hi)
    c = 0.5 * (lo + hi) if center is None else np.broadcast_to(np.asarray(center, float), lo.shape)
    w = 0.5 * (hi - lo) if width is None else np.broadcast_to(np.asarray(width, float), lo.shape)
    if np.any(w <= 0):
        raise ValueError("tent width must be positive")
    vals = np.prod(np.clip(1 - np.abs(grid.coords - c) / (0.5 * w), 0.0, None), axis=1)
    vals[grid.n_interior:] = 0.0
    return GridFunction(grid, vals)
