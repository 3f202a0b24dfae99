"""Convex compact sets represented by sampled support functions.

A set ``A`` in R^d is stored as the vector ``h_A(l)`` over a fixed grid of
unit directions ``l``.  Minkowski sums and non-negative scalings act linearly
on these vectors and the Hausdorff distance between two convex sets is the
sup-norm distance of their support functions, so everything downstream
(Aumann integrals, averaging, error estimates) is plain array arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._kernels import K

FEAS_TOL = 1e-9


class GridMismatchError(ValueError):
    """Two sets (or a set and a map) refer to different direction grids."""


class InfeasibleSetError(ValueError):
    """Support values whose halfspace intersection is empty."""


class DirectionGrid:
    """Ordered unit directions on the sphere of R^d.

    d=1 gives exactly ``(+1, -1)``; d=2 gives ``n`` equally spaced angles
    starting at 0; d>=3 maps an unscrambled Halton sequence through the
    normal quantile function and normalises (deterministic).
    """

    def __init__(self, dim: int, n: int = 256):
        if dim < 1:
            raise ValueError("dimension must be positive")
        if dim == 1:
            dirs = np.array([[1.0], [-1.0]])
        elif dim == 2:
            if n < 3:
                raise ValueError("a planar grid needs at least 3 directions")
            ang = 2.0 * np.pi * np.arange(n) / n
            dirs = np.column_stack((np.cos(ang), np.sin(ang)))
        else:
            from scipy.stats import norm, qmc

            pts = qmc.Halton(d=dim, scramble=False).random(n + 1)[1:]
            dirs = norm.ppf(pts)
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        dirs.setflags(write=False)
        self.dim = dim
        self.directions = dirs

    @property
    def size(self) -> int:
        return self.directions.shape[0]

    @cached_property
    def angular_gap(self) -> float:
        if self.dim == 1:
            return np.pi
        if self.dim == 2:
            return 2.0 * np.pi / self.size
        # covering radius estimate: worst nearest-neighbour angle
        g = np.clip(self.directions @ self.directions.T, -1.0, 1.0)
        np.fill_diagonal(g, -1.0)
        return float(np.arccos(g.max(axis=1)).max())

    def nearest(self, ell) -> int:
        """Index of the grid direction closest to ``ell``."""
        return int(np.argmax(self.directions @ np.asarray(ell, dtype=float)))

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, DirectionGrid):
            return NotImplemented
        return self.dim == other.dim and np.array_equal(self.directions, other.directions)

    def __hash__(self):
        return hash((self.dim, self.size))

    def __repr__(self):
        return f"DirectionGrid(dim={self.dim}, n={self.size})"


@dataclass(frozen=True, eq=False)
class ConvexSet:
    grid: DirectionGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} support values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("support values must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.grid.dim

    def __add__(self, other: ConvexSet) -> ConvexSet:
        return minkowski_sum(self, other)

    def __rmul__(self, lam: float) -> ConvexSet:
        return scale(self, lam)

    @cached_property
    def vertices(self) -> np.ndarray:
        """Polygon reconstructed from the grid halfspaces (d=2 only)."""
        if self.dim != 2:
            raise ValueError("polygon reconstruction is only available in d=2")
        h, dirs = self.values, self.grid.directions
        if K.edge_lengths(h, dirs).min() >= -FEAS_TOL:
            return K.polygon_vertices(h, dirs)
        # redundant constraints: fall back to explicit halfspace clipping
        radius = 2.0 * (np.abs(h).max() + 1.0)
        poly = K.clip_polygon(h + FEAS_TOL, dirs, radius)
        if poly.shape[0] == 0:
            raise InfeasibleSetError("halfspace intersection is empty")
        return poly

    def is_feasible(self, tol: float = FEAS_TOL) -> bool:
        h = self.values
        if self.dim == 1:
            return -h[1] <= h[0] + tol
        if self.dim == 2:
            try:
                self.vertices
            except InfeasibleSetError:
                return False
            return True
        from scipy.optimize import linprog

        res = linprog(
            np.zeros(self.dim),
            A_ub=self.grid.directions,
            b_ub=h + tol,
            bounds=[(None, None)] * self.dim,
            method="highs",
        )
        return res.status == 0

    def contains(self, v, tol: float = FEAS_TOL) -> bool:
        v = np.asarray(v, dtype=float)
        return bool(np.all(self.grid.directions @ v <= self.values + tol))

    def diameter(self) -> float:
        """Diameter of the reconstructed set (d<=2), else the largest width."""
        h = self.values
        if self.dim == 1:
            return float(max(h[0] + h[1], 0.0))
        if self.dim == 2:
            v = self.vertices
            diff = v[:, None, :] - v[None, :, :]
            return float(np.sqrt((diff**2).sum(axis=-1)).max())
        width = h[:, None] + h[None, :]
        anti = self.grid.directions @ self.grid.directions.T < -0.99
        return float(np.where(anti, width, 0.0).max())

    def extreme_point(self, ell) -> np.ndarray:
        """A maximiser of ``ell . y`` over the set (lowest vertex index on ties)."""
        ell = np.asarray(ell, dtype=float)
        if self.dim == 1:
            return np.array([self.values[0] if ell[0] >= 0 else -self.values[1]])
        if self.dim == 2:
            verts = self.vertices
            return verts[K.argmax_vertex(verts, ell)].copy()
        raise ValueError("extreme points are only available for d <= 2")


def _check_same_grid(a: ConvexSet, b: ConvexSet):
    if not a.grid == b.grid:
        raise GridMismatchError(f"grid mismatch: {a.grid!r} vs {b.grid!r}")


def from_points(points, grid: DirectionGrid) -> ConvexSet:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, grid.dim) if grid.dim > 1 else pts.reshape(-1, 1)
    if pts.shape[0] == 0:
        raise ValueError("need at least one point")
    if pts.shape[1] != grid.dim:
        raise ValueError(f"points have dimension {pts.shape[1]}, grid has {grid.dim}")
    return ConvexSet(grid, (grid.directions @ pts.T).max(axis=1))


def ball(center, radius: float, grid: DirectionGrid) -> ConvexSet:
    if radius < 0:
        raise ValueError("radius must be non-negative")
    c = np.asarray(center, dtype=float).reshape(grid.dim)
    return ConvexSet(grid, grid.directions @ c + radius)


def point(p, grid: DirectionGrid) -> ConvexSet:
    return ball(p, 0.0, grid)


def minkowski_sum(a: ConvexSet, b: ConvexSet) -> ConvexSet:
    _check_same_grid(a, b)
    return ConvexSet(a.grid, a.values + b.values)


def scale(a: ConvexSet, lam: float) -> ConvexSet:
    if lam < 0:
        raise ValueError("scale factor must be non-negative")
    return ConvexSet(a.grid, lam * a.values)


def hausdorff(a: ConvexSet, b: ConvexSet) -> float:
    _check_same_grid(a, b)
    return float(np.abs(a.values - b.values).max())


def project(a: ConvexSet, v) -> np.ndarray:
    """Nearest point of the reconstructed set to ``v`` (d in {1, 2})."""
    v = np.asarray(v, dtype=float).reshape(a.dim)
    if a.dim == 1:
        lo, hi = -a.values[1], a.values[0]
        if lo > hi + FEAS_TOL:
            raise InfeasibleSetError(f"empty interval [{lo}, {hi}]")
        return np.array([min(max(v[0], lo), max(lo, hi))])
    if a.dim == 2:
        if a.contains(v, tol=0.0):
            return v.copy()
        return K.nearest_on_polygon(a.vertices, v)
    raise ValueError("projection is only supported for d <= 2")


def distance(a: ConvexSet, v) -> float:
    """Euclidean distance from ``v`` to the set."""
    v = np.asarray(v, dtype=float).reshape(a.dim)
    return float(np.linalg.norm(v - project(a, v)))
