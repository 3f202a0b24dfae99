"""Solution sets of ``x' in eps F(t, x)`` on the horizon ``[0, 1/eps]``.

Trajectories are explicit-Euler polygons driven by a selection strategy.
``filippov_track`` turns any reference curve into a true (discrete) solution
of another inclusion by projecting the reference velocity onto the admissible
velocity set at every step, together with the Gronwall-type certificate.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from ._parallel import derive_seed, pmap
from .convex import ConvexSet, DirectionGrid, distance, project
from .setmap import DomainError, SetMap

KINDS = ("extremal-direction", "fixed-control", "random-switching")


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    derivs: np.ndarray
    eps: float = 1.0

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def n_steps(self) -> int:
        return self.derivs.shape[0]

    def euler_defect(self) -> float:
        pred = self.states[:-1] + self.dt * self.derivs
        return float(np.abs(pred - self.states[1:]).max())

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        cols = ["t"] + [f"x_{i + 1}" for i in range(self.dim)]
        buf.write(",".join(cols) + "\n")
        for t, x in zip(self.times, self.states):
            buf.write(",".join(f"{v:.17g}" for v in (t, *x)) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def sup_distance(a: Trajectory, b: Trajectory) -> float:
    if a.states.shape != b.states.shape:
        raise ValueError("trajectories must share the time grid")
    return float(np.linalg.norm(a.states - b.states, axis=1).max())


@dataclass(frozen=True)
class SelectionStrategy:
    """Piecewise-constant selection rule.

    ``starts`` holds the switching times (first entry 0); piece ``i`` uses
    ``directions[i]`` (extremal kinds) or ``controls[i]`` (fixed-control).
    """

    kind: str
    starts: np.ndarray
    directions: np.ndarray | None = None
    controls: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown selection kind {self.kind!r}")
        starts = np.asarray(self.starts, dtype=float)
        if starts.size == 0 or starts[0] != 0.0 or np.any(np.diff(starts) < 0):
            raise ValueError("switch times must start at 0 and be sorted")
        object.__setattr__(self, "starts", starts)
        if self.kind == "fixed-control":
            if self.controls is None or len(self.controls) != starts.size:
                raise ValueError("one control per piece is required")
            object.__setattr__(self, "controls", np.atleast_2d(np.asarray(self.controls, dtype=float)))
        else:
            if self.directions is None or len(self.directions) != starts.size:
                raise ValueError("one direction per piece is required")
            dirs = np.asarray(self.directions, dtype=float)
            dirs = dirs.reshape(starts.size, -1)
            norms = np.linalg.norm(dirs, axis=1, keepdims=True)
            if np.any(norms == 0):
                raise ValueError("directions must be non-zero")
            object.__setattr__(self, "directions", dirs / norms)

    def piece(self, t: float) -> int:
        return int(np.searchsorted(self.starts, t, side="right") - 1)

    @classmethod
    def extremal(cls, direction) -> SelectionStrategy:
        return cls("extremal-direction", np.zeros(1), np.atleast_2d(direction))

    @classmethod
    def fixed_control(cls, controls, starts=None) -> SelectionStrategy:
        controls = np.atleast_2d(np.asarray(controls, dtype=float))
        starts = np.zeros(1) if starts is None else starts
        return cls("fixed-control", starts, controls=controls)

    @classmethod
    def random_switching(cls, dim: int, horizon: float, n_switches: int, seed: int) -> SelectionStrategy:
        rng = np.random.default_rng(seed)
        starts = np.concatenate(([0.0], np.sort(rng.uniform(0.0, horizon, n_switches))))
        if dim == 1:
            dirs = rng.choice([-1.0, 1.0], size=(starts.size, 1))
        else:
            dirs = rng.normal(size=(starts.size, dim))
        return cls("random-switching", starts, dirs, seed=seed)


def default_steps(F: SetMap, eps: float, per_period: int = 200) -> int:
    return int(math.ceil(per_period / eps / F.min_period()))


def _grid_for(F: SetMap, grid: DirectionGrid | None) -> DirectionGrid:
    if grid is None:
        grid = DirectionGrid(F.dim, 256)
    if grid.dim != F.dim:
        raise ValueError("grid dimension does not match the map")
    return grid


_DIRS_1D = np.array([[1.0], [-1.0]])


def _interval(F: SetMap, t: float, x: float) -> tuple:
    """``F(t, x) = [lo, hi]`` for scalar maps; the lean path of the hot loops."""
    dom = F.domain
    if dom is not None and not (dom.lo[0] - 1e-9 <= x <= dom.hi[0] + 1e-9):
        raise DomainError(f"state {x} outside the domain of {F.name or 'map'}")
    h = F.oracle(np.array([t]), np.array([x]), _DIRS_1D)[0]
    lo, hi = -float(h[1]), float(h[0])
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError(f"non-finite support value from {F.name or 'map'}")
    return lo, hi


def integrate_selection(F: SetMap, eps: float, x0, strategy: SelectionStrategy,
                        n_steps: int, grid: DirectionGrid | None = None) -> Trajectory:
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if not eps > 0:
        raise ValueError("eps must be positive")
    grid = _grid_for(F, grid)
    x = F.check_state(x0).copy()
    horizon = 1.0 / eps
    times = np.linspace(0.0, horizon, n_steps + 1)
    dt = horizon / n_steps
    states = np.empty((n_steps + 1, F.dim))
    derivs = np.empty((n_steps, F.dim))
    states[0] = x
    sys = F.system
    if strategy.kind == "fixed-control" and sys is None:
        raise ValueError("fixed-control selections need a control-induced map")
    for k in range(n_steps):
        t = times[k]
        i = strategy.piece(t)
        if strategy.kind == "fixed-control":
            F.check_state(x)
            v = sys.g(t, x, strategy.controls[i])[0, 0]
        else:
            ell = strategy.directions[i]
            if F.dim == 1:
                lo, hi = _interval(F, t, x[0])
                v = hi if ell[0] >= 0 else lo
            else:
                v = F.eval(t, x, grid).extreme_point(ell)
        derivs[k] = eps * v
        x = x + dt * derivs[k]
        states[k + 1] = x
    F.check_state(x)
    return Trajectory(times, states, derivs, eps)


def filippov_track(F: SetMap, eps: float, reference: Trajectory,
                   grid: DirectionGrid | None = None) -> tuple:
    """Solution of ``x' in eps F`` shadowing ``reference``, plus its certificate.

    Returns ``(trajectory, bound)`` where ``bound`` is
    ``exp(eps K H) * sum_k dt * d(y'_k, eps F(t_k, y_k))``.
    """
    grid = _grid_for(F, grid)
    n, dt = reference.n_steps, reference.dt
    x = F.check_state(reference.states[0]).copy()
    states = np.empty_like(reference.states)
    derivs = np.empty_like(reference.derivs)
    states[0] = x
    defect = 0.0
    dirs = grid.directions
    for k in range(n):
        t = reference.times[k]
        v = reference.derivs[k]
        if F.dim == 1:
            # interval fast path: clamp and distance in closed form
            lo, hi = _interval(F, t, x[0])
            derivs[k, 0] = min(max(v[0], eps * lo), eps * hi)
            lo, hi = _interval(F, t, reference.states[k, 0])
            defect += dt * max(eps * lo - v[0], v[0] - eps * hi, 0.0)
        else:
            target = ConvexSet(grid, eps * F.support(t, x, dirs))
            derivs[k] = project(target, v)
            at_ref = ConvexSet(grid, eps * F.support(t, reference.states[k], dirs))
            defect += dt * distance(at_ref, v)
        x = x + dt * derivs[k]
        states[k + 1] = x
    F.check_state(x)
    horizon = n * dt
    bound = math.exp(eps * F.lipschitz * horizon) * defect
    return Trajectory(reference.times, states, derivs, eps), bound


def smooth_reference(dim: int, eps: float, x0, n_steps: int, seed: int,
                     amplitude: float = 0.5, n_modes: int = 3) -> Trajectory:
    """Random smooth curve ``y' = eps (a_0 + sum_k a_k sin(w_k t + p_k))``.

    States and velocities are sampled from the closed form, so the same seed
    with a different ``n_steps`` samples the same curve.
    """
    rng = np.random.default_rng(seed)
    a0 = rng.uniform(-amplitude, amplitude, dim)
    a = rng.uniform(-amplitude, amplitude, (n_modes, dim))
    w = rng.uniform(0.5, 8.0, (n_modes, 1))
    p = rng.uniform(0.0, 2.0 * np.pi, (n_modes, 1))
    x0 = np.asarray(x0, dtype=float).reshape(dim)
    t = np.linspace(0.0, 1.0 / eps, n_steps + 1)
    arg = w * t[None, :] + p  # (modes, nt)
    vel = eps * (a0[None, :] + np.einsum("mk,mt->tk", a, np.sin(arg)))
    pos = x0 + eps * (a0[None, :] * t[:, None]
                      + np.einsum("mk,mt->tk", a, (np.cos(p) - np.cos(arg)) / w))
    return Trajectory(t, pos, vel[:-1], eps)


def pursuit_track(F: SetMap, eps: float, reference: Trajectory, lookahead: float,
                  grid: DirectionGrid | None = None) -> Trajectory:
    """Solution of ``x' in eps F`` that chases the reference ``lookahead`` ahead.

    At each step the desired velocity ``(y(t + W) - x) / W`` is projected onto
    the admissible set.  For oscillating references this follows the
    window-averaged motion, where step-by-step projection lags behind.  A
    zero look-ahead aims at the next reference point (maximal catch-up).
    """
    grid = _grid_for(F, grid)
    n, dt = reference.n_steps, reference.dt
    L = max(1, int(round(lookahead / dt)))
    x = F.check_state(reference.states[0]).copy()
    states = np.empty_like(reference.states)
    derivs = np.empty_like(reference.derivs)
    states[0] = x
    dirs = grid.directions
    for k in range(n):
        t = reference.times[k]
        j = min(k + L, n)
        v = (reference.states[j] - x) / ((j - k) * dt)
        if F.dim == 1:
            lo, hi = _interval(F, t, x[0])
            derivs[k, 0] = min(max(v[0], eps * lo), eps * hi)
        else:
            derivs[k] = project(ConvexSet(grid, eps * F.support(t, x, dirs)), v)
        x = x + dt * derivs[k]
        states[k + 1] = x
    F.check_state(x)
    return Trajectory(reference.times, states, derivs, eps)


def sample_strategies(F: SetMap, eps: float, n_samples: int, seed: int) -> list:
    """Boundary-spanning selections: constant extremal directions, extreme
    fixed controls (control-induced maps), then random switching."""
    out = []
    if F.dim == 1:
        out += [SelectionStrategy.extremal([1.0]), SelectionStrategy.extremal([-1.0])]
    else:
        ang = 2.0 * np.pi * np.arange(8) / 8
        for a in ang:
            d = np.zeros(F.dim)
            d[0], d[1] = math.cos(a), math.sin(a)
            out.append(SelectionStrategy.extremal(d))
    sys = F.system
    if sys is not None and sys.control_box is not None and sys.control_box.dim <= 2:
        box = sys.control_box
        corners = np.array(np.meshgrid(*zip(box.lo, box.hi), indexing="ij")).reshape(box.dim, -1).T
        out += [SelectionStrategy.fixed_control(c) for c in corners]
    horizon = 1.0 / eps
    n_switch = max(1, int(round(horizon / F.max_period())))
    i = 0
    while len(out) < n_samples:
        out.append(SelectionStrategy.random_switching(F.dim, horizon, n_switch, derive_seed(seed, i)))
        i += 1
    return out


def _one_sided(F, G, eps, x0, n_samples, n_steps, seed, grid_F, grid_G, lookaheads):
    strategies = sample_strategies(F, eps, n_samples, seed)

    def run(strategy):
        ref = integrate_selection(F, eps, x0, strategy, n_steps, grid_F)
        tracked, _ = filippov_track(G, eps, ref, grid_G)
        best = sup_distance(ref, tracked)
        for W in lookaheads:
            # every tracker yields a genuine G-solution, so the minimum is still an upper bound
            best = min(best, sup_distance(ref, pursuit_track(G, eps, ref, W, grid_G)))
        return best

    return max(pmap(run, strategies))


def solution_set_distance(F: SetMap, G: SetMap, eps: float, x0, n_samples: int = 16,
                          n_steps: int | None = None, seed: int = 0,
                          grid: DirectionGrid | None = None, lookaheads=None) -> tuple:
    """Two one-sided excess estimates ``(forward, backward)`` between solution sets.

    ``forward`` tracks sampled F-solutions with G-solutions; ``backward``
    swaps the roles.  Each sampled term upper-bounds the distance of that
    trajectory to the other solution set: it is the smallest sup-distance
    achieved by the Filippov projection tracker and by pursuit trackers with
    the given look-ahead windows (default: a single step and the longest
    period; pass ``()`` for projection only).
    """
    if F.dim != G.dim:
        raise ValueError("maps must share the dimension")
    if n_steps is None:
        n_steps = max(default_steps(F, eps), default_steps(G, eps))
    grid = _grid_for(F, grid)
    if lookaheads is None:
        T = max(F.max_period(), G.max_period())
        lookaheads = (0.0, T)
    fwd = _one_sided(F, G, eps, x0, n_samples, n_steps, seed, grid, grid, lookaheads)
    bwd = _one_sided(G, F, eps, x0, n_samples, n_steps, seed, grid, grid, lookaheads)
    return fwd, bwd


def _rk4(rhs, x0: float, horizon: float, n: int) -> float:
    dt = horizon / n
    x = x0
    for k in range(n):
        t = k * dt
        k1 = rhs(t, x)
        k2 = rhs(t + 0.5 * dt, x + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, x + 0.5 * dt * k2)
        k4 = rhs(t + dt, x + dt * k3)
        x = x + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
    return x


def endpoint_reach_interval(F: SetMap, eps: float, x0, n_steps: int | None = None) -> tuple:
    """Reachable interval at ``t = 1/eps`` of a scalar inclusion.

    Extremal branches ``x' = eps h(t, x, +1)`` and ``x' = -eps h(t, x, -1)``
    are integrated with classical fourth-order stepping.
    """
    if F.dim != 1:
        raise ValueError("endpoint reach intervals need d = 1")
    if n_steps is None:
        n_steps = default_steps(F, eps, per_period=400)
    x0 = float(F.check_state(x0)[0])
    horizon = 1.0 / eps
    up = np.array([[1.0]])
    down = np.array([[-1.0]])

    def hi(t, x):
        F.check_state([x])
        return eps * F.oracle(np.array([t]), np.array([x]), up)[0, 0]

    def lo(t, x):
        F.check_state([x])
        return -eps * F.oracle(np.array([t]), np.array([x]), down)[0, 0]

    return _rk4(lo, x0, horizon, n_steps), _rk4(hi, x0, horizon, n_steps)


def interval_hausdorff(a: tuple, b: tuple) -> float:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))
