import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from incavg import catalog
from incavg.convex import DirectionGrid, ball, hausdorff
from incavg.setmap import (
    Box,
    ControlSystem,
    ControlTerm,
    DomainError,
    SetMap,
    constant_ball,
    control_grid,
    control_map,
    interval_map,
    partial_average,
    singleton,
    state_ball,
    sum_of_periodic,
    tabulate,
    time_shift,
)

TWO_PI = 2 * math.pi
G1 = DirectionGrid(1)
G2 = DirectionGrid(2, 64)


def cos_map(omega=TWO_PI, period=1.0):
    return singleton(lambda t, x: np.cos(omega * t)[:, None], 1, 1.0, 0.0, (period,), Box.cube(1, 5.0))


def test_box_basics(rng):
    b = Box.from_pairs([[-1, 1], [0, 2]])
    assert b.dim == 2 and b.contains([0, 1]) and not b.contains([0, 3])
    assert b.pairs() == [[-1.0, 1.0], [0.0, 2.0]]
    s = b.sample(rng, 100)
    assert np.all(s >= b.lo) and np.all(s <= b.hi)
    with pytest.raises(ValueError):
        Box([1.0], [0.0])


def test_singleton_eval_at_zero():
    S = cos_map().eval(0.0, [0.0], G1)
    np.testing.assert_allclose(S.values, [1.0, -1.0])


def test_state_ball_is_ball_at_x():
    F = state_ball(1.0, Box.cube(2, 3.0))
    x = np.array([0.5, -1.0])
    assert hausdorff(F.eval(0.3, x, G2), ball(x, 1.0, G2)) < 1e-12
    assert F.lipschitz == 1.0


def test_support_shapes_and_errors():
    F = cos_map()
    assert F.support(0.1, [0.0], G1.directions).shape == (2,)
    assert F.support(np.linspace(0, 1, 5), [0.0], G1.directions).shape == (5, 2)
    with pytest.raises(DomainError):
        F.support(0.0, [10.0], G1.directions)
    with pytest.raises(DomainError):
        F.support(0.0, [np.nan], G1.directions)
    bad = singleton(lambda t, x: np.full((t.size, 1), np.inf), 1, 1.0, 0.0)
    with pytest.raises(ValueError):
        bad.support(0.0, [0.0], G1.directions)


def test_setmap_validation():
    with pytest.raises(ValueError):
        SetMap(1, lambda t, x, d: None, -1.0, 0.0)
    with pytest.raises(ValueError):
        SetMap(1, lambda t, x, d: None, 1.0, 0.0, structure="weird")
    with pytest.raises(ValueError):
        state_ball(1.0, None)


def test_sum_of_periodic_cases():
    F = sum_of_periodic([cos_map(), cos_map(2.0, math.pi)])
    t = np.linspace(0, 3, 7)
    np.testing.assert_allclose(F.support(t, [0.0], G1.directions)[:, 0], np.cos(TWO_PI * t) + np.cos(2 * t))
    assert F.periods == (1.0, math.pi)
    balls = sum_of_periodic([constant_ball([0, 0], 1.0), constant_ball([0, 0], 2.0)])
    assert hausdorff(balls.eval(0.0, [0, 0], G2), ball([0, 0], 3.0, G2)) < 1e-12
    i1 = interval_map(lambda t, x: 0.0, lambda t, x: 1 + np.sin(TWO_PI * t), 2.0, 0.0, (1.0,))
    i2 = interval_map(lambda t, x: 0.0, lambda t, x: 1 + np.sin(2 * t), 2.0, 0.0, (math.pi,))
    h = sum_of_periodic([i1, i2]).support(t, [0.0], G1.directions)
    np.testing.assert_allclose(h[:, 0], 2 + np.sin(TWO_PI * t) + np.sin(2 * t))
    np.testing.assert_allclose(h[:, 1], 0.0, atol=1e-15)


def test_control_map_scalar_u():
    g = ControlTerm(lambda t, x, u: np.broadcast_to(u[None, :, :], (t.size, u.shape[0], 1)), None, 1.0, 0.0)
    sys = ControlSystem(1, (g,), control_grid(Box([-1.0], [1.0])), Box.cube(1, 1.0), Box([-1.0], [1.0]))
    F = control_map(sys)
    np.testing.assert_allclose(F.support(0.0, [0.0], G1.directions), [1.0, 1.0])


def test_control_map_example_5_5():
    F = catalog.example_5_5().setmap
    t = np.linspace(0, 5, 23)
    for x in (-1.5, 0.0, 0.7):
        h = F.support(t, [x], G1.directions)
        c = np.abs(np.cos(TWO_PI * t) + np.cos(2 * t))
        np.testing.assert_allclose(h[:, 0], x + c, atol=1e-12)
        np.testing.assert_allclose(h[:, 1], -x + c, atol=1e-12)
    assert F.meta["control_grid_error"] < 1e-12  # |u| attains 1 on the grid


def test_example_4_7_control_vs_closed_form():
    cs = catalog.example_4_7()
    G = control_map(cs.control)
    for t in (0.0, 0.25, 1.3):
        hc = G.support(t, [0.0, 0.0], G2.directions)
        hf = cs.setmap.support(t, [0.0, 0.0], G2.directions)
        # the control grid is an inner approximation of the unit disc
        assert np.all(hc <= hf + 1e-12)
        assert np.abs(hc - hf).max() < 1 - math.cos(math.pi / 100) + 1e-12
    h0 = G.support(0.0, [0.0, 0.0], np.array([[1.0, 0.0], [0.0, 1.0]]))
    np.testing.assert_allclose(h0, [8.0, 1.0], atol=1e-12)
    hq = G.support(0.25, [0.0, 0.0], np.array([[0.0, 1.0]]))
    assert hq[0] == pytest.approx(7 * math.sin(math.pi / 4) + 1, abs=1e-12)


def test_partial_average_cases():
    F = cos_map()
    t = np.linspace(0, 1, 9)
    full = partial_average(F, 1.0, 64)
    np.testing.assert_allclose(full.support(t, [0.0], G1.directions), 0.0, atol=1e-10)
    half = partial_average(F, 0.5, 4096)
    np.testing.assert_allclose(half.support(t, [0.0], G1.directions)[:, 0], -(2 / math.pi) * np.sin(TWO_PI * t),
                               atol=1e-7)
    B = constant_ball([0.0, 0.0], 1.0)
    assert partial_average(B, 0.7) is B
    with pytest.raises(ValueError):
        partial_average(F, 0.0)


def test_time_shift():
    F = time_shift(cos_map(), 0.25)
    assert F.support(0.0, [0.0], G1.directions)[0] == pytest.approx(0.0, abs=1e-15)


def test_tabulate_matches_at_lattice_and_between():
    cs = catalog.example_5_5()
    from incavg.averaging import chattering_map

    Fbar = chattering_map(cs.control, 64)
    tab = tabulate(Fbar, G1, points=9)
    for x in (-2.0, -0.5, 0.3, 1.75):
        exact = Fbar.support(0.0, [x], G1.directions)
        np.testing.assert_allclose(tab.support(0.0, [x], G1.directions), exact, atol=1e-12)  # affine in x
    one = tab.support(0.0, [0.3], np.array([[1.0]]))
    assert one.shape == (1,)
    with pytest.raises(ValueError):
        tabulate(cos_map(), G1)


@given(st.floats(0.05, 3.0), st.floats(-2.0, 2.0))
def test_partial_average_bounded_and_periodic_invariant(T, t0):
    F = cos_map()
    FT = partial_average(F, T, 128)
    h = FT.support(np.array([t0, t0 + 1.0]), [0.0], G1.directions)
    assert np.all(np.abs(h) <= 1.0 + 1e-12)
    np.testing.assert_allclose(h[0], h[1], atol=1e-9)
