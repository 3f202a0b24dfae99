"""Builtin named systems used by the CLI, the tests and the benchmark."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .setmap import (
    Box,
    ControlSystem,
    ControlTerm,
    SetMap,
    componentwise,
    control_grid,
    control_map,
    singleton,
    sum_of_periodic,
)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class CatalogSystem:
    name: str
    setmap: SetMap
    x0: np.ndarray
    control: ControlSystem | None = None
    description: str = ""


def scalar_cos() -> CatalogSystem:
    dom = Box.cube(1, 1.0)
    term = singleton(lambda t, x: np.cos(TWO_PI * t)[:, None], 1, 1.0, 0.0, (1.0,), dom, "cos2pit")
    F = sum_of_periodic([term], name="scalar_cos")
    return CatalogSystem("scalar_cos", F, np.zeros(1), description="F(t) = {cos 2 pi t}")


def example_4_7_oracle(t, x, dirs):
    centre = np.column_stack((7.0 * np.cos(t), 7.0 * np.sin(math.pi * t)))
    return centre @ dirs.T + np.linalg.norm(dirs, axis=1)[None, :]


def example_4_7_control(points: int = 101) -> ControlSystem:
    """The same map written as ``{(7 cos t + u1 cos u2, 7 sin pi t + u1 sin u2)}``."""

    def g(t, x, u):
        out = np.empty((t.size, u.shape[0], 2))
        out[:, :, 0] = 7.0 * np.cos(t)[:, None] + (u[:, 0] * np.cos(u[:, 1]))[None, :]
        out[:, :, 1] = 7.0 * np.sin(math.pi * t)[:, None] + (u[:, 0] * np.sin(u[:, 1]))[None, :]
        return out

    ubox = Box([0.0, 0.0], [1.0, TWO_PI])
    term = ControlTerm(g, (TWO_PI, 2.0), 7.0 * math.sqrt(2.0) + 1.0, 0.0, "g")
    return ControlSystem(2, (term,), control_grid(ubox, points), Box.cube(2, 20.0), ubox, "example_4_7")


def example_4_7() -> CatalogSystem:
    F = SetMap(
        2, example_4_7_oracle, 7.0 * math.sqrt(2.0) + 1.0, 0.0, (TWO_PI, 2.0),
        "componentwise-periodic", Box.cube(2, 20.0), "example_4_7",
    )
    return CatalogSystem("example_4_7", F, np.zeros(2), example_4_7_control(),
                         "(7 cos t, 7 sin pi t) + unit disc; entry periods (2 pi, 2)")


def example_5_5_control(points: int = 101) -> ControlSystem:
    """``x' = eps (x + u (cos 2 pi t + cos 2t))``, ``U = [-1, 1]``, ``Omega = [-2, 2]``."""

    def g1(t, x, u):
        return (x[0] + np.outer(np.cos(TWO_PI * t), u[:, 0]))[:, :, None]

    def g2(t, x, u):
        return np.outer(np.cos(2.0 * t), u[:, 0])[:, :, None]

    ubox = Box([-1.0], [1.0])
    terms = (
        ControlTerm(g1, 1.0, 3.0, 1.0, "x + u cos 2 pi t"),
        ControlTerm(g2, math.pi, 1.0, 0.0, "u cos 2t"),
    )
    return ControlSystem(1, terms, control_grid(ubox, points), Box.cube(1, 2.0), ubox, "example_5_5")


def example_5_5(points: int = 101) -> CatalogSystem:
    sys = example_5_5_control(points)
    return CatalogSystem("example_5_5", control_map(sys), np.zeros(1), sys,
                         "scalar two-frequency control system with U = [-1, 1]")


def rotating_2d() -> CatalogSystem:
    """Box-valued rotation whose entries carry periods 1 and pi."""

    def e1(t, x):
        c = -0.5 * x[1] * (1.0 + np.cos(TWO_PI * t))
        r = 0.25 * (1.0 + np.sin(TWO_PI * t))
        return c - r, c + r

    def e2(t, x):
        c = 0.5 * x[0] * (1.0 + np.cos(2.0 * t))
        r = 0.25 * (1.0 + np.sin(2.0 * t))
        return c - r, c + r

    dom = Box.cube(2, 3.0)
    # |centre_i| <= 3, radius_i <= 1/2
    F = componentwise([e1, e2], (1.0, math.pi), 3.5 * math.sqrt(2.0), 1.0, dom, "rotating_2d")
    return CatalogSystem("rotating_2d", F, np.array([1.0, 0.0]),
                         description="componentwise periodic rotation, entry periods (1, pi)")


CATALOG = {
    "scalar_cos": scalar_cos,
    "example_4_7": example_4_7,
    "example_5_5": example_5_5,
    "rotating_2d": rotating_2d,
}


def get(name: str) -> CatalogSystem:
    try:
        return CATALOG[name]()
    except KeyError:
        raise KeyError(f"unknown catalog system {name!r}; choose from {sorted(CATALOG)}") from None
