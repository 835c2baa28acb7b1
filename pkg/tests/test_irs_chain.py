import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from irsho.irs_chain import (
    connection_probs,
    initial_state,
    propagate,
    stationary_closed_form,
    stationary_linear_solve,
    transition_matrix,
)
from irsho.regions import RegionFrame, Side
from irsho.scenario import build_geometry


@pytest.fixture(scope="module")
def coarse_geometry(default_geometry):
    # ten-meter steps make departures frequent enough to sample
    g = default_geometry
    return build_geometry(g.r_o, g.r_t, g.L, 10.0, 1.0)


def _ppp_flags(rng, n_real, lam, frame, side, D):
    """Connection flags at i-1 and i for independent Poisson realizations."""
    x_prev, x_now = frame.x_i - frame.delta_x, frame.x_i
    lo, hi = x_prev - D, x_now + D
    area = (hi - lo) * 2 * D
    counts = rng.poisson(lam * area, n_real)
    owner = np.repeat(np.arange(n_real), counts)
    px = rng.uniform(lo, hi, owner.size)
    py = rng.uniform(-D, D, owner.size)
    g = frame.geometry
    in_cell = side.sign * g.h_original(px, py) > 0
    near_prev = in_cell & ((px - x_prev) ** 2 + py**2 <= D * D)
    near_now = in_cell & ((px - x_now) ** 2 + py**2 <= D * D)
    prev = np.bincount(owner, near_prev, n_real) > 0
    now = np.bincount(owner, near_now, n_real) > 0
    return prev, now


@pytest.mark.parametrize("side", list(Side))
def test_transition_probs_against_poisson_sampling(coarse_geometry, side):
    g = coarse_geometry
    lam, D = 2e-4, 50.0
    rng = np.random.default_rng(11)
    mid = int(round(g.x_mid / g.delta_x))
    for i in (mid - 3, mid, mid + 2):
        f = RegionFrame(g, D, i)
        p11, p23 = connection_probs(side, f, lam)
        prev, now = _ppp_flags(rng, 400_000, lam, f, side, D)
        if (~prev).sum() > 1000:
            est = np.mean(~now[~prev])
            assert p11 == pytest.approx(est, abs=4 / math.sqrt((~prev).sum()))
        if prev.sum() > 1000:
            est = np.mean(~now[prev])
            assert p23 == pytest.approx(est, abs=4 / math.sqrt(prev.sum()))


def test_matrix_rows_stochastic(default_geometry):
    for i in (1, 400, 620, 700, 1200):
        for side in Side:
            t = transition_matrix(side, RegionFrame(default_geometry, 50.0, i), 1e-3)
            assert np.all(t >= 0)
            np.testing.assert_allclose(t.sum(axis=1), 1.0, atol=1e-14)


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_stationary_closed_form_matches_linear_solve(p11, p23):
    if p23 + (1 - p11) < 1e-6:
        return
    t = np.zeros((4, 4))
    t[[0, 2], 0] = p11
    t[[0, 2], 1] = 1 - p11
    t[[1, 3], 2] = p23
    t[[1, 3], 3] = 1 - p23
    s = stationary_closed_form(p11, p23)
    np.testing.assert_allclose(s, stationary_linear_solve(t), atol=1e-9)
    np.testing.assert_allclose(s @ t, s, atol=1e-12)
    assert s.sum() == pytest.approx(1.0)


def test_initial_states(default_geometry):
    f0 = RegionFrame(default_geometry, 50.0, 0)
    np.testing.assert_array_equal(initial_state(Side.TARGET, f0, 1e-3), [1, 0, 0, 0])
    np.testing.assert_array_equal(initial_state(Side.ORIGINAL, f0, 0.0), [1, 0, 0, 0])
    s = initial_state(Side.ORIGINAL, f0, 1e-3)
    # far from the bisector the connected share is the full-disc occupancy
    assert s[1] + s[3] == pytest.approx(-math.expm1(-1e-3 * math.pi * 2500), rel=1e-3)


@pytest.mark.parametrize("lam", [0.0, 1e-4, 1e-3])
def test_propagation_stays_on_simplex(default_geometry, lam):
    for side in Side:
        res = propagate(side, default_geometry, 50.0, lam)
        assert np.all(res.states >= -1e-15)
        np.testing.assert_allclose(res.states.sum(axis=1), 1.0, atol=1e-12)
        for i in (5, 600, 1100):
            np.testing.assert_allclose(res.states[i], res.states[i - 1] @ res.matrix(i), atol=1e-14)
        assert res.clamps == 0


def test_zero_density_never_connects(default_geometry):
    res = propagate(Side.TARGET, default_geometry, 50.0, 0.0)
    assert np.all(res.states[:, 0] == 1.0)


def test_cells_hand_over_connection(default_geometry):
    o = propagate(Side.ORIGINAL, default_geometry, 50.0, 1e-3).states
    t = propagate(Side.TARGET, default_geometry, 50.0, 1e-3).states
    conn = lambda s: s[:, 1] + s[:, 3]
    assert conn(o)[0] > 0.99 and conn(o)[-1] < 1e-9
    assert conn(t)[0] < 1e-9 and conn(t)[-1] > 0.99
