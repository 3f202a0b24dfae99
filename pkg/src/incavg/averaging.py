"""Averaged maps and empirical averaging gauges.

``average_periodic`` builds the long-run time average of a map with declared
periods; ``chattering_average`` builds the averaged set of a multi-frequency
control system by replacing the time average with an average over the phase
torus, where the control may depend on all phases at once.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping

import numpy as np

from ._kernels import K
from .bounds import gauge_bound
from .convex import ConvexSet, DirectionGrid
from .setmap import (
    ControlSystem,
    SetMap,
    midpoint_nodes,
    partial_average,
    tabulate,
)

ALPHA_PRINTED = 0.815
ALPHA_CLOSED_FORM = 8.0 / math.pi**2
DEFAULT_TORUS_NODES = 128
MAX_TIME = 1e9


class CommensurabilityWarning(UserWarning):
    """Two declared periods look like a ratio of small integers."""


def check_commensurability(periods, max_den: int = 64, tol: float = 1e-9) -> list:
    """Pairs of periods whose ratio is within ``tol`` of p/q with p, q <= ``max_den``."""
    hits = []
    for i in range(len(periods)):
        for j in range(i + 1, len(periods)):
            r = periods[i] / periods[j]
            frac = Fraction(r).limit_denominator(max_den)
            if frac.numerator <= max_den and abs(r - float(frac)) <= tol * max(1.0, r):
                hits.append((periods[i], periods[j], f"{frac.numerator}/{frac.denominator}"))
    return hits


# ---------------------------------------------------------------------------
# periodic averages


def average_periodic(F: SetMap, quad_nodes: int = 256, nested_nodes: int = 64,
                     torus_nodes: int = DEFAULT_TORUS_NODES) -> SetMap:
    """Autonomous average of a map with declared periods."""
    if F.autonomous:
        return F
    if F.structure == "control-induced":
        return chattering_map(F.system, torus_nodes=torus_nodes)
    if not F.periods:
        raise ValueError(f"{F.name or 'map'} declares no periods")

    if F.structure == "sum-of-periodic":
        avgs = [f if f.autonomous else partial_average(f, f.periods[0], quad_nodes) for f in F.terms]

        t0 = np.zeros(1)

        def oracle(t, x, dirs):
            vals = avgs[0].oracle(t0, x, dirs)
            for a in avgs[1:]:
                vals = vals + a.oracle(t0, x, dirs)
            return vals if t.size == 1 else np.broadcast_to(vals, (t.size, dirs.shape[0]))

        method = "per-term"
    elif F.structure == "componentwise-periodic" and "entries" in F.meta:
        entries = F.meta["entries"]
        nodes = [midpoint_nodes(T, quad_nodes) for T in F.periods]

        def oracle(t, x, dirs):
            out = np.zeros(dirs.shape[0])
            for entry, s, i in zip(entries, nodes, range(len(entries))):
                lo, hi = entry(s, x)
                lo = float(np.mean(np.broadcast_to(lo, s.shape)))
                hi = float(np.mean(np.broadcast_to(hi, s.shape)))
                out += np.maximum(hi * dirs[:, i], lo * dirs[:, i])
            return np.broadcast_to(out, (t.size, dirs.shape[0]))

        method = "per-entry"
    else:
        distinct = sorted(set(F.periods))
        n = quad_nodes if len(distinct) == 1 else nested_nodes
        if n ** len(distinct) > 2**20:
            raise ValueError("too many nested periods for tensor quadrature")
        shifts = np.zeros(1)
        for T in distinct:
            shifts = (shifts[:, None] + midpoint_nodes(T, n)[None, :]).ravel()

        def oracle(t, x, dirs):
            vals = F.oracle(shifts, x, dirs).mean(axis=0)
            return np.broadcast_to(vals, (t.size, dirs.shape[0]))

        method = "nested"

    return SetMap(
        F.dim, oracle, F.bound, F.lipschitz, (), "generic", F.domain, f"{F.name}_avg",
        autonomous=True, meta={"method": method, "quad_nodes": quad_nodes},
    )


# ---------------------------------------------------------------------------
# chattering (space) averages


def _torus_layout(sys: ControlSystem):
    periods = sys.distinct_periods()
    if len(periods) > 3:
        raise ValueError("at most 3 distinct periods are supported on the torus")
    axis_of = {}
    for j, term in enumerate(sys.terms):
        for i, p in enumerate(term.entry_periods(sys.dim)):
            if p is None:
                axis_of[j, i] = None
            else:
                axis_of[j, i] = next(a for a, q in enumerate(periods) if abs(p - q) <= 1e-12 * max(1.0, q))
    return periods, axis_of


def chattering_support(sys: ControlSystem, y, dirs, torus_nodes: int = DEFAULT_TORUS_NODES,
                       chunk: int = 1 << 15) -> np.ndarray:
    """Support values of the averaged control set at state ``y``.

    ``h(l) = int_{[0,1)^p} max_u l . sum_j g_j(phi T, y, u) dphi`` with a
    tensor midpoint rule, one torus axis per distinct period.
    """
    y = np.asarray(y, dtype=float).reshape(sys.dim)
    dirs = np.ascontiguousarray(np.asarray(dirs, dtype=float).reshape(-1, sys.dim))
    periods, axis_of = _torus_layout(sys)
    if sys.controls.shape[0] == 0:
        raise ValueError("control grid is empty")
    p = len(periods)
    nu, d = sys.controls.shape[0], sys.dim
    phases = midpoint_nodes(1.0, torus_nodes)

    # per-axis samples: contrib[a] has shape (n, nu, d); the static part is (nu, d)
    static = np.zeros((nu, d))
    contrib = [np.zeros((torus_nodes, nu, d)) for _ in range(p)]
    for j in range(sys.m):
        for a in set(axis_of[j, i] for i in range(d)):
            if a is None:
                vals = sys.term_values(j, np.zeros(1), y)[0]
                mask = [axis_of[j, i] is None for i in range(d)]
                static[:, mask] += vals[:, mask]
            else:
                vals = sys.term_values(j, phases * periods[a], y)
                mask = [axis_of[j, i] == a for i in range(d)]
                contrib[a][:, :, mask] += vals[:, :, mask]

    if p == 0:
        return K.controls_support(static[None], dirs)[0]

    # stream the tensor grid in chunks over the leading axis
    rows_per_chunk = max(1, chunk // torus_nodes ** (p - 1))
    acc = np.zeros(dirs.shape[0])
    for start in range(0, torus_nodes, rows_per_chunk):
        block = contrib[0][start:start + rows_per_chunk] + static
        for a in range(1, p):
            block = (block[:, None] + contrib[a][None, :]).reshape(-1, nu, d)
        acc += K.controls_support_mean(np.ascontiguousarray(block), dirs) * block.shape[0]
    return acc / torus_nodes**p


def chattering_average(sys: ControlSystem, y, grid: DirectionGrid,
                       torus_nodes: int = DEFAULT_TORUS_NODES) -> ConvexSet:
    hits = check_commensurability(sys.distinct_periods())
    if hits:
        warnings.warn(f"periods look commensurable: {hits}", CommensurabilityWarning, stacklevel=2)
    return ConvexSet(grid, chattering_support(sys, y, grid.directions, torus_nodes))


def chattering_map(sys: ControlSystem, torus_nodes: int = DEFAULT_TORUS_NODES,
                   grid: DirectionGrid | None = None, table_points: int | None = None) -> SetMap:
    """The averaged control system as an autonomous map.

    With ``grid`` and ``table_points`` the map is precomputed on a state
    lattice (see :func:`incavg.setmap.tabulate`).
    """

    def oracle(t, x, dirs):
        vals = chattering_support(sys, x, dirs, torus_nodes)
        return np.broadcast_to(vals, (t.size, dirs.shape[0]))

    bound = sum(term.bound for term in sys.terms)
    lip = sum(term.lipschitz for term in sys.terms)
    F = SetMap(sys.dim, oracle, bound, lip, (), "generic", sys.domain, f"{sys.name}_chattering",
               autonomous=True, meta={"torus_nodes": torus_nodes,
                                      "commensurable": check_commensurability(sys.distinct_periods())})
    if table_points:
        if grid is None:
            raise ValueError("tabulation needs a direction grid")
        F = tabulate(F, grid, table_points)
    return F


def alpha_quadrature(n: int = 512) -> float:
    """Midpoint rule for (2 pi)^-2 int |cos p1 + cos p2| over the torus."""
    phi = 2.0 * np.pi * midpoint_nodes(1.0, n)
    c = np.cos(phi)
    return float(np.abs(c[:, None] + c[None, :]).mean())


# ---------------------------------------------------------------------------
# gauges


@dataclass
class Gauge:
    name: str
    eps: np.ndarray
    delta: np.ndarray
    eta: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.eps = np.asarray(self.eps, dtype=float)
        self.delta = np.asarray(self.delta, dtype=float)
        self.eta = np.asarray(self.eta, dtype=float)
        if np.any(self.delta <= 0) or np.any(self.eta < 0):
            raise ValueError("gauge needs delta > 0 and eta >= 0")

    def bound(self, M: float, Kc: float) -> np.ndarray:
        return np.array([gauge_bound(M, Kc, d, e) for d, e in zip(self.delta, self.eta)])


@dataclass
class DeltaModulus:
    eps: float
    delta: float
    refinement: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta modulus must be non-negative")


def default_candidates(F: SetMap, c: float | None = None) -> dict:
    c = F.max_period() if c is None else c
    return {
        "c*eps": lambda e: c * e,
        "c*sqrt(eps)": lambda e: c * math.sqrt(e),
    }


def _window_support(F: SetMap, s0: float, W: float, x, dirs, nodes_per_period: int) -> np.ndarray:
    n = max(64, int(math.ceil(nodes_per_period * W / F.min_period())))
    s = s0 + midpoint_nodes(W, n)
    return F.oracle(s, x, dirs).mean(axis=0)


def estimate_gauge(F: SetMap, Fbar: SetMap, candidates: Mapping[str, Callable] | None,
                   eps_values, x_samples, s0_samples, grid: DirectionGrid | None = None,
                   nodes_per_period: int = 64) -> list:
    """Measured window deviation ``eta(eps)`` for each candidate ``Delta(eps)``."""
    if not Fbar.autonomous:
        raise ValueError("the reference average must be autonomous")
    candidates = default_candidates(F) if candidates is None else candidates
    grid = grid or DirectionGrid(F.dim, 64)
    dirs = grid.directions
    xs = [F.check_state(x) for x in x_samples]
    out = []
    for name, sched in candidates.items():
        deltas, etas = [], []
        for eps in eps_values:
            D = float(sched(eps))
            W = D / eps
            if not D > 0:
                raise ValueError(f"schedule {name} gave non-positive window")
            if max(s0_samples) + W > MAX_TIME:
                raise ValueError("window exceeds the representable time range")
            eta = 0.0
            for x in xs:
                hbar = Fbar.oracle(np.zeros(1), x, dirs)[0]
                if F.autonomous:
                    continue
                for s0 in s0_samples:
                    hw = _window_support(F, s0, W, x, dirs, nodes_per_period)
                    eta = max(eta, float(np.abs(hw - hbar).max()))
            deltas.append(D)
            etas.append(eta)
        out.append(Gauge(name, eps_values, deltas, etas, meta={"grid": grid.size,
                                                               "nodes_per_period": nodes_per_period}))
    return out


def best_gauge(gauges, M: float, Kc: float) -> list:
    """Per eps, the candidate with the smallest total bound: (eps, name, bound)."""
    rows = []
    eps = gauges[0].eps
    for k, e in enumerate(eps):
        vals = [(g.bound(M, Kc)[k], g.name) for g in gauges]
        b, name = min(vals)
        rows.append((float(e), name, float(b)))
    return rows


def _delta_sup(F, Fbar, eps, xs, dirs, T_grid, nodes_per_period):
    horizon = 1.0 / eps
    n = int(math.ceil(nodes_per_period * horizon / F.min_period()))
    ds = horizon / n
    s = midpoint_nodes(horizon, n)
    best = 0.0
    for x in xs:
        hbar = Fbar.oracle(np.zeros(1), x, dirs)[0]
        vals = F.oracle(s, x, dirs)
        cum = np.vstack([np.zeros(dirs.shape[0]), np.cumsum(vals, axis=0) * ds])
        knots = np.linspace(0.0, horizon, n + 1)
        integ = np.column_stack([np.interp(T_grid, knots, cum[:, k]) for k in range(dirs.shape[0])])
        dev = np.abs(integ - T_grid[:, None] * hbar[None, :]).max()
        best = max(best, float(dev))
    return eps * best


def estimate_delta_modulus(F: SetMap, Fbar: SetMap, eps: float, x_samples,
                           grid: DirectionGrid | None = None, n_T: int = 512,
                           nodes_per_period: int = 256) -> DeltaModulus:
    """``sup_{x, T in [0, 1/eps]} eps * d_H(int_0^T F, T Fbar)`` on a geometric T grid."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not Fbar.autonomous:
        raise ValueError("the reference average must be autonomous")
    grid = grid or DirectionGrid(F.dim, 64)
    xs = [F.check_state(x) for x in x_samples]
    if F.autonomous:
        return DeltaModulus(eps, 0.0, 0.0, meta={"n_T": n_T})
    t_lo = F.min_period() / 1024.0

    def sup_on(nT):
        T_grid = np.geomspace(t_lo, 1.0 / eps, nT)
        return _delta_sup(F, Fbar, eps, xs, grid.directions, T_grid, nodes_per_period)

    fine = sup_on(n_T)
    coarse = sup_on(n_T // 2)
    return DeltaModulus(eps, fine, abs(fine - coarse), meta={"n_T": n_T, "grid": grid.size,
                                                             "nodes_per_period": nodes_per_period})
