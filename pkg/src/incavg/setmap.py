"""Time-varying set-valued maps exposed as support-function oracles.

An oracle has the signature ``oracle(t, x, dirs) -> values`` where ``t`` is a
1-D array of times, ``x`` a single state of shape ``(d,)`` and ``dirs`` an
``(N, d)`` array of directions; it returns an ``(len(t), N)`` array of
support values.  Vectorising over time keeps quadrature (partial averages,
window averages) to one oracle call.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from ._kernels import K
from ._parallel import pmap
from .convex import ConvexSet, DirectionGrid

Oracle = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]

STRUCTURES = ("generic", "sum-of-periodic", "componentwise-periodic", "control-induced")
DEFAULT_QUAD_NODES = 256
DEFAULT_CONTROL_POINTS = 101


class DomainError(ValueError):
    """A state left the box on which a map is declared."""


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box ``[lo_i, hi_i]``."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("box bounds must have equal shapes and lo <= hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_pairs(cls, pairs) -> Box:
        arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])

    @classmethod
    def cube(cls, dim: int, radius: float) -> Box:
        return cls(-radius * np.ones(dim), radius * np.ones(dim))

    @property
    def dim(self) -> int:
        return self.lo.size

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=(n, self.dim))

    def pairs(self) -> list:
        return [[float(a), float(b)] for a, b in zip(self.lo, self.hi)]


@dataclass(frozen=True, eq=False)
class SetMap:
    """Set-valued map ``(t, x) -> F(t, x)`` with declared regularity metadata.

    ``bound`` is a norm bound M and ``lipschitz`` a Hausdorff-Lipschitz
    constant K in x.  ``periods`` lists the declared periods (one per term or
    per entry, depending on ``structure``).
    """

    dim: int
    oracle: Oracle
    bound: float
    lipschitz: float
    periods: tuple = ()
    structure: str = "generic"
    domain: Box | None = None
    name: str = ""
    autonomous: bool = False
    terms: tuple = ()
    system: object = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.structure not in STRUCTURES:
            raise ValueError(f"unknown structure tag {self.structure!r}")
        if self.bound < 0 or self.lipschitz < 0:
            raise ValueError("bound and Lipschitz constant must be non-negative")
        object.__setattr__(self, "periods", tuple(float(p) for p in self.periods))

    def check_state(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            x = x.reshape(self.dim)
        dom = self.domain
        if dom is None:
            if not np.isfinite(x).all():
                raise ValueError("state must be finite")
            return x
        # NaN fails both comparisons, so this also rejects non-finite states
        for xi, lo, hi in zip(x.tolist(), dom.lo.tolist(), dom.hi.tolist()):
            if not (lo - 1e-9 <= xi <= hi + 1e-9):
                raise DomainError(f"state {x} outside the domain of {self.name or 'map'}")
        return x

    def support(self, t, x, dirs) -> np.ndarray:
        """Support values; scalar ``t`` gives shape ``(N,)``, array ``t`` gives ``(nt, N)``."""
        scalar = np.ndim(t) == 0
        tt = np.array([float(t)]) if scalar else np.asarray(t, dtype=float).ravel()
        x = self.check_state(x)
        dirs = np.asarray(dirs, dtype=float)
        if dirs.ndim != 2:
            dirs = dirs.reshape(-1, self.dim)
        vals = self.oracle(tt, x, dirs)
        if not np.isfinite(vals).all():
            raise ValueError(f"non-finite support value from {self.name or 'map'}")
        return vals[0] if scalar else vals

    def eval(self, t: float, x, grid: DirectionGrid) -> ConvexSet:
        if grid.dim != self.dim:
            raise ValueError("grid dimension does not match the map")
        return ConvexSet(grid, self.support(float(t), x, grid.directions))

    def max_period(self) -> float:
        return max(self.periods) if self.periods else 1.0

    def min_period(self) -> float:
        return min(self.periods) if self.periods else 1.0


# ---------------------------------------------------------------------------
# constructors


def singleton(f, dim: int, bound: float, lipschitz: float, periods=(), domain=None, name=""):
    """``F(t, x) = {f(t, x)}`` with ``f(t_array, x) -> (nt, d)``."""

    def oracle(t, x, dirs):
        return np.reshape(f(t, x), (t.size, dim)) @ dirs.T

    return SetMap(dim, oracle, bound, lipschitz, periods, domain=domain, name=name)


def constant_ball(center, radius: float, domain=None, name="") -> SetMap:
    c = np.asarray(center, dtype=float).ravel()

    def oracle(t, x, dirs):
        norms = np.linalg.norm(dirs, axis=1)
        return np.broadcast_to(dirs @ c + radius * norms, (t.size, dirs.shape[0]))

    return SetMap(
        c.size, oracle, float(np.linalg.norm(c) + radius), 0.0, domain=domain, name=name,
        autonomous=True,
    )


def state_ball(radius: float, domain: Box, name="") -> SetMap:
    """``F(t, x) = B(x, radius)``."""

    def oracle(t, x, dirs):
        vals = dirs @ x + radius * np.linalg.norm(dirs, axis=1)
        return np.broadcast_to(vals, (t.size, dirs.shape[0]))

    if domain is None:
        raise ValueError("B(x, r) is unbounded without a domain")
    corner = np.maximum(np.abs(domain.lo), np.abs(domain.hi))
    bound = float(np.linalg.norm(corner) + radius)
    return SetMap(domain.dim, oracle, bound, 1.0, domain=domain, name=name, autonomous=True)


def interval_map(lo, hi, bound: float, lipschitz: float, periods=(), domain=None, name=""):
    """Scalar map ``F(t, x) = [lo(t, x), hi(t, x)]``."""

    def oracle(t, x, dirs):
        a = np.broadcast_to(np.asarray(lo(t, x), dtype=float), t.shape)
        b = np.broadcast_to(np.asarray(hi(t, x), dtype=float), t.shape)
        d = dirs[:, 0]
        return np.maximum(np.outer(b, d), np.outer(a, d))

    return SetMap(1, oracle, bound, lipschitz, periods, domain=domain, name=name)


def componentwise(entries: Sequence, periods: Sequence[float], bound: float, lipschitz: float,
                  domain=None, name="") -> SetMap:
    """Box-valued map whose i-th entry is the interval ``entries[i](t, x) -> (lo, hi)``.

    Entry i is declared periodic with ``periods[i]``.
    """
    entries = tuple(entries)
    dim = len(entries)
    if len(periods) != dim:
        raise ValueError("one period per entry is required")

    def oracle(t, x, dirs):
        out = np.zeros((t.size, dirs.shape[0]))
        for i, entry in enumerate(entries):
            lo, hi = entry(t, x)
            lo = np.broadcast_to(np.asarray(lo, dtype=float), t.shape)
            hi = np.broadcast_to(np.asarray(hi, dtype=float), t.shape)
            d = dirs[:, i]
            out += np.maximum(np.outer(hi, d), np.outer(lo, d))
        return out

    return SetMap(dim, oracle, bound, lipschitz, periods, "componentwise-periodic", domain,
                  name, meta={"entries": entries})


def sum_of_periodic(terms: Sequence[SetMap], name="") -> SetMap:
    """Minkowski sum of maps, term j declared periodic with its own period."""
    terms = tuple(terms)
    if not terms:
        raise ValueError("need at least one term")
    dim = terms[0].dim
    if any(f.dim != dim for f in terms):
        raise ValueError("all terms must share the dimension")
    periods = []
    for f in terms:
        if len(f.periods) != 1 and not f.autonomous:
            raise ValueError(f"term {f.name or '?'} must declare exactly one period")
        periods.append(f.periods[0] if f.periods else 0.0)

    def oracle(t, x, dirs):
        return sum(f.oracle(t, x, dirs) for f in terms)

    domain = next((f.domain for f in terms if f.domain is not None), None)
    return SetMap(
        dim, oracle, sum(f.bound for f in terms), sum(f.lipschitz for f in terms),
        tuple(p for p in periods if p > 0), "sum-of-periodic", domain, name,
        autonomous=all(f.autonomous for f in terms), terms=terms,
    )


# ---------------------------------------------------------------------------
# control systems


@dataclass(frozen=True)
class ControlTerm:
    """One summand ``g_j(t, x, u)``; ``func(t (nt,), x (d,), u (nu, k)) -> (nt, nu, d)``.

    ``period`` is either one period for the whole term or a tuple with one
    period per output entry.  ``None`` marks a time-independent term.
    """

    func: Callable
    period: float | tuple | None
    bound: float
    lipschitz: float
    name: str = ""

    def entry_periods(self, dim: int) -> tuple:
        if self.period is None:
            return (None,) * dim
        if np.ndim(self.period) == 0:
            return (float(self.period),) * dim
        per = tuple(None if p is None else float(p) for p in self.period)
        if len(per) != dim:
            raise ValueError("per-entry periods must match the state dimension")
        return per


def control_grid(box, points: int = DEFAULT_CONTROL_POINTS) -> np.ndarray:
    """Tensor grid with ``points`` samples per control axis (k <= 2)."""
    box = box if isinstance(box, Box) else Box.from_pairs(box)
    if box.dim > 2:
        raise ValueError("control grids are limited to k <= 2")
    axes = [np.linspace(a, b, points) for a, b in zip(box.lo, box.hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


@dataclass(frozen=True, eq=False)
class ControlSystem:
    dim: int
    terms: tuple
    controls: np.ndarray
    domain: Box
    control_box: Box | None = None
    name: str = ""

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise ValueError("a control system needs at least one term")
        u = np.asarray(self.controls, dtype=float)
        if u.ndim == 1:
            u = u[:, None]
        if u.shape[0] == 0:
            raise ValueError("control grid is empty")
        if self.control_box is not None:
            if not all(self.control_box.contains(ui, tol=1e-12) for ui in u):
                raise ValueError("control samples must lie in U")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "controls", u)

    @property
    def m(self) -> int:
        return len(self.terms)

    def with_controls(self, controls) -> ControlSystem:
        return replace(self, controls=np.asarray(controls, dtype=float))

    def term_values(self, j: int, t, x, u=None) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        u = self.controls if u is None else np.asarray(u, dtype=float).reshape(-1, self.controls.shape[1])
        return np.asarray(self.terms[j].func(t, x, u), dtype=float).reshape(t.size, u.shape[0], self.dim)

    def g(self, t, x, u=None) -> np.ndarray:
        """Sum of the terms, shape ``(nt, nu, d)``."""
        return sum(self.term_values(j, t, x, u) for j in range(self.m))

    def distinct_periods(self, tol: float = 1e-12) -> list:
        out: list = []
        for term in self.terms:
            for p in term.entry_periods(self.dim):
                if p is not None and not any(abs(p - q) <= tol * max(1.0, q) for q in out):
                    out.append(p)
        return out

    def bounds(self) -> tuple:
        return [t.bound for t in self.terms], [t.lipschitz for t in self.terms]


def control_map(sys: ControlSystem, estimate_grid_error: bool = True) -> SetMap:
    """Support of the convexified ``G(t, x) = {g(t, x, u) : u in U}``."""
    if sys.controls.shape[0] == 0:
        raise ValueError("control grid is empty")

    def make_oracle(s):
        def oracle(t, x, dirs):
            return K.controls_support(s.g(t, x), np.ascontiguousarray(dirs))
        return oracle

    meta = {"control_points": int(sys.controls.shape[0])}
    if estimate_grid_error and sys.control_box is not None and sys.control_box.dim <= 2:
        meta["control_grid_error"] = _control_grid_error(sys, make_oracle)
    bound = sum(t.bound for t in sys.terms)
    lip = sum(t.lipschitz for t in sys.terms)
    return SetMap(
        sys.dim, make_oracle(sys), bound, lip, tuple(sys.distinct_periods()), "control-induced",
        sys.domain, sys.name, system=sys, meta=meta,
    )


def _control_grid_error(sys: ControlSystem, make_oracle, samples: int = 16) -> float:
    # compare the current grid against one with twice the resolution
    per_axis = int(round(sys.controls.shape[0] ** (1.0 / sys.control_box.dim)))
    fine = sys.with_controls(control_grid(sys.control_box, 2 * per_axis - 1))
    rng = np.random.default_rng(0)
    grid = DirectionGrid(sys.dim, 64)
    horizon = max(sys.distinct_periods(), default=1.0)
    t = rng.uniform(0.0, horizon, samples)
    err = 0.0
    coarse_o, fine_o = make_oracle(sys), make_oracle(fine)
    for x in sys.domain.sample(rng, 4):
        diff = fine_o(t, x, grid.directions) - coarse_o(t, x, grid.directions)
        err = max(err, float(np.abs(diff).max()))
    return err


# ---------------------------------------------------------------------------
# averaging operators


def midpoint_nodes(T: float, n: int) -> np.ndarray:
    return (np.arange(n) + 0.5) * (T / n)


def partial_average(F: SetMap, T: float, quad_nodes: int = DEFAULT_QUAD_NODES) -> SetMap:
    """Sliding-window average ``F_T(t, x) = (1/T) int_0^T F(t + s, x) ds``.

    Support values of the Aumann integral are integrals of support values,
    so this is a composite midpoint rule applied to the oracle.
    """
    if not T > 0:
        raise ValueError("window length must be positive")
    if quad_nodes < 1:
        raise ValueError("need at least one quadrature node")
    if F.autonomous:
        return F
    s = midpoint_nodes(T, quad_nodes)

    def oracle(t, x, dirs):
        if t.size == 1:
            return F.oracle(t[0] + s, x, dirs).sum(axis=0, keepdims=True) / s.size
        tt = (t[:, None] + s[None, :]).ravel()
        vals = F.oracle(tt, x, dirs).reshape(t.size, s.size, dirs.shape[0])
        return vals.mean(axis=1)

    return SetMap(
        F.dim, oracle, F.bound, F.lipschitz, F.periods, "generic", F.domain,
        f"{F.name}_T{T:g}", meta={"window": T, "quad_nodes": quad_nodes},
    )


def time_shift(F: SetMap, t0: float) -> SetMap:
    def oracle(t, x, dirs):
        return F.oracle(t + t0, x, dirs)

    return replace(F, oracle=oracle, name=f"{F.name}_shift{t0:g}")


def tabulate(F: SetMap, grid: DirectionGrid, points: int = 65) -> SetMap:
    """Precompute an autonomous map on a state lattice over its domain.

    Support values are interpolated (multi-)linearly between lattice nodes,
    which keeps them support functions (convex combinations of supports).
    Queries with directions other than ``grid`` go to the original oracle.
    """
    if not F.autonomous:
        raise ValueError("only autonomous maps can be tabulated")
    if F.domain is None:
        raise ValueError("tabulation needs a bounded domain")
    if F.dim > 2:
        raise ValueError("tabulation is limited to d <= 2")
    from scipy.interpolate import RegularGridInterpolator

    axes = [np.linspace(a, b, points) for a, b in zip(F.domain.lo, F.domain.hi)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, F.dim)
    t0 = np.zeros(1)
    table = np.array(pmap(lambda x: F.oracle(t0, x, grid.directions)[0], mesh))
    table = table.reshape(*(points,) * F.dim, grid.size)
    interp = RegularGridInterpolator(axes, table)
    gdirs = grid.directions
    lo, hi = F.domain.lo, F.domain.hi

    def lookup(x):
        x = np.clip(x, lo, hi)
        if F.dim == 1:
            pos = (x[0] - lo[0]) / (hi[0] - lo[0]) * (points - 1)
            i = min(int(pos), points - 2)
            w = pos - i
            return (1.0 - w) * table[i] + w * table[i + 1]
        return interp(x[None, :])[0]

    def columns(dirs):
        # indices of query directions inside the tabulated grid, or None
        if dirs.shape == gdirs.shape and np.array_equal(dirs, gdirs):
            return slice(None)
        if dirs.shape[1] != gdirs.shape[1]:
            return None
        hit = np.all(dirs[:, None, :] == gdirs[None, :, :], axis=2)
        if not np.all(hit.any(axis=1)):
            return None
        return hit.argmax(axis=1)

    def oracle(t, x, dirs):
        cols = columns(dirs)
        if cols is None:
            return F.oracle(t, x, dirs)
        vals = lookup(np.asarray(x, dtype=float))[cols]
        return np.broadcast_to(vals, (t.size, vals.shape[0]))

    return replace(F, oracle=oracle, name=f"{F.name}_tab", meta={**F.meta, "table_points": points})
