"""Decoupled lift of a multi-frequency control system.

Each of the ``m`` terms gets its own state block ``z_j`` in R^d, driven by
``g_j(t, z_1 + ... + z_m, u)``.  The aggregation ``Phi(z) = sum_j z_j`` maps
lifted solutions exactly onto solutions of the original system, and each
block carries a single period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .averaging import DEFAULT_TORUS_NODES, chattering_support
from .bounds import lifted_constants
from .setmap import Box, ControlSystem, ControlTerm, DomainError, SetMap


def phi(z, m: int, d: int) -> np.ndarray:
    """Sum of the ``m`` blocks of ``z``; Lipschitz with constant ``sqrt(m)``."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != m * d:
        raise ValueError(f"expected length {m * d}, got {z.shape[-1]}")
    return z.reshape(*z.shape[:-1], m, d).sum(axis=-2)


def phi_adjoint(ell, m: int) -> np.ndarray:
    """Replicate base directions into every block: ``l -> (l, ..., l)``."""
    ell = np.asarray(ell, dtype=float)
    return np.tile(ell, m) if ell.ndim == 1 else np.tile(ell, (1, m))


@dataclass(frozen=True, eq=False)
class LiftedSystem:
    base: ControlSystem
    x0: np.ndarray
    z0: np.ndarray
    M_H: float
    K_H: float
    domain: Box
    system: ControlSystem

    @property
    def m(self) -> int:
        return self.base.m

    @property
    def d(self) -> int:
        return self.base.dim

    @property
    def dim(self) -> int:
        return self.m * self.d

    def rhs(self, t: float, z, u) -> np.ndarray:
        """Lifted vector field ``h(t, z, u)`` (without the eps factor)."""
        x = phi(z, self.m, self.d)
        u = np.asarray(u, dtype=float).reshape(1, -1)
        blocks = [self.base.term_values(j, t, x, u)[0, 0] for j in range(self.m)]
        return np.concatenate(blocks)


def _block_term(term: ControlTerm, j: int, m: int, d: int) -> ControlTerm:
    def func(t, z, u):
        x = z.reshape(m, d).sum(axis=0)
        vals = np.asarray(term.func(t, x, u), dtype=float).reshape(t.size, u.shape[0], d)
        out = np.zeros((t.size, u.shape[0], m * d))
        out[:, :, j * d:(j + 1) * d] = vals
        return out

    per = term.entry_periods(d)
    period = None if all(p is None for p in per) else tuple([*([None] * (j * d)), *per, *([None] * ((m - j - 1) * d))])
    return ControlTerm(func, period, term.bound, math.sqrt(m) * term.lipschitz, f"block{j}:{term.name}")


def lift(sys: ControlSystem, x0=None) -> LiftedSystem:
    m, d = sys.m, sys.dim
    x0 = np.zeros(d) if x0 is None else np.asarray(x0, dtype=float).reshape(d)
    z0 = np.concatenate([x0, np.zeros((m - 1) * d)])
    M_list, K_list = sys.bounds()
    M_H, K_H = lifted_constants(M_list, K_list)
    # |z_j(t)| <= M_j * (eps * horizon) + |x0| with eps * horizon = 1
    R = max(M_list) + float(np.linalg.norm(x0))
    domain = Box.cube(m * d, m * R)
    terms = tuple(_block_term(t, j, m, d) for j, t in enumerate(sys.terms))
    lifted = ControlSystem(m * d, terms, sys.controls, domain, sys.control_box, f"{sys.name}_lift")
    return LiftedSystem(sys, x0, z0, M_H, K_H, domain, lifted)


def verify_correspondence(sys: ControlSystem, eps: float, x0, control_signal, n_steps: int) -> float:
    """Integrate the original and lifted systems under one control signal.

    Both use the same explicit-Euler step sequence; returns
    ``max_k |x_k - Phi(z_k)|``.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    lifted = lift(sys, x0)
    horizon = 1.0 / eps
    dt = horizon / n_steps
    x = lifted.x0.copy()
    z = lifted.z0.copy()
    m, d = lifted.m, lifted.d
    worst = 0.0
    for k in range(n_steps):
        t = k * dt
        u = np.asarray(control_signal(t), dtype=float).reshape(1, -1)
        if not sys.domain.contains(x):
            raise DomainError(f"original state {x} left the domain at t={t}")
        if not lifted.domain.contains(z):
            raise DomainError(f"lifted state left the lifted box at t={t}")
        x = x + dt * eps * sys.g(t, x, u)[0, 0]
        z = z + dt * eps * lifted.rhs(t, z, u)
        worst = max(worst, float(np.linalg.norm(x - phi(z, m, d))))
    return worst


def averaged_lift(sys: ControlSystem, torus_nodes: int = DEFAULT_TORUS_NODES, x0=None) -> SetMap:
    """Chattering average of the lifted control map, an autonomous map on R^{md}."""
    lifted = lift(sys, x0)
    if len(lifted.system.distinct_periods()) > 3:
        raise ValueError("more than 3 distinct periods")

    def oracle(t, z, dirs):
        vals = chattering_support(lifted.system, z, dirs, torus_nodes)
        return np.broadcast_to(vals, (t.size, dirs.shape[0]))

    return SetMap(
        lifted.dim, oracle, lifted.M_H, lifted.K_H, (), "generic", lifted.domain,
        f"{sys.name}_lift_avg", autonomous=True,
        meta={"torus_nodes": torus_nodes, "m": lifted.m, "d": lifted.d},
    )


def phi_image_support(H: SetMap, z, dirs, m: int) -> np.ndarray:
    """Support of ``Phi(H(z))`` in base directions via ``h_{Phi A}(l) = h_A(Phi^T l)``."""
    return H.support(0.0, z, phi_adjoint(np.atleast_2d(dirs), m))
