import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irsho import _fallback, kernels
from irsho.channel import ChannelParams
from irsho.config import NetworkConfig
from irsho.irs_dist import State, build_grid, conditional_spec
from irsho.regions import RegionFrame, Side

from _naive import naive_eta_probs, naive_signals

P = ChannelParams.from_config(NetworkConfig())
try:
    from irsho import _kernels
except ImportError:  # pragma: no cover
    _kernels = None

needs_ext = pytest.mark.skipif(_kernels is None, reason="compiled extension not built")
BACKENDS = [_fallback] + ([_kernels] if _kernels is not None else [])


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "numpy")


def _grid_case(geometry, i, side, state, n_d=24, n_phi=32):
    spec = conditional_spec(side, state, RegionFrame(geometry, 50.0, i), 1e-3)
    return build_grid(spec, n_d, n_phi)


def _bs(geometry, side):
    o, t = (0.0, geometry.r_o), (geometry.L, geometry.r_t)
    return (o, t) if side is Side.ORIGINAL else (t, o)


@pytest.mark.parametrize("backend", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
@pytest.mark.parametrize("side,state", [(Side.ORIGINAL, State.I4), (Side.ORIGINAL, State.I1), (Side.TARGET, State.I2), (Side.TARGET, State.I4)])
def test_eta_probs_against_brute_force(default_geometry, backend, side, state):
    g = default_geometry
    i = int(round(g.x_mid / g.delta_x)) + (-25 if side is Side.ORIGINAL else 25)
    grid = _grid_case(g, i, side, state)
    serv, nbr = _bs(g, side)
    ux = i * g.delta_x
    thr = np.array([0.5, 0.9, 1.0, 1.02, 1.1, 2.0])
    got = backend.eta_threshold_probs(
        grid.d, grid.w, grid.arc_s, grid.arc_l, grid.n_phi, ux, *serv, *nbr, state.serving,
        P.beta, P.alpha, float(P.N), P.G_bf, thr, thr,
    )
    ref = naive_eta_probs(grid, ux, serv, nbr, state.serving, P, thr, thr)
    np.testing.assert_allclose(got[0], ref[0], atol=1e-12)
    np.testing.assert_allclose(got[1], ref[1], atol=1e-12)


def _random_irs(seed, n, L, D):
    rng = np.random.default_rng(seed)
    px = rng.uniform(-D, L + D, n)
    py = rng.uniform(-D, D, n)
    label = rng.integers(0, 3, n).astype(np.int8)
    return px, py, label


@pytest.mark.parametrize("backend", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
@pytest.mark.parametrize("n_irs", [0, 1, 7, 40])
def test_trial_signals_against_loop(default_geometry, backend, n_irs):
    g = default_geometry
    px, py, label = _random_irs(n_irs, n_irs, 60.0, 50.0)
    n_steps, dx = 60, 1.0
    bs_o, bs_t = (0.0, g.r_o), (60.0, g.r_t)
    got = backend.trial_signals(px, py, label, n_steps, dx, 20.0, *bs_o, *bs_t, P.beta, P.alpha, float(P.N), P.G_bf)
    ref = naive_signals(px, py, label, n_steps, dx, 20.0, bs_o, bs_t, P)
    for a, b in zip(got, ref):
        np.testing.assert_allclose(np.asarray(a, float), np.asarray(b, float), rtol=1e-11, atol=1e-13)


@needs_ext
@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 60), st.floats(5.0, 60.0))
def test_backends_agree_on_signals(seed, n, D):
    px, py, label = _random_irs(seed, n, 200.0, D)
    args = (px, py, label, 101, 2.0, D, 0.0, 100.0, 200.0, -100.0, P.beta, P.alpha, 100.0, P.G_bf)
    a = _kernels.trial_signals(*args)
    b = _fallback.trial_signals(*args)
    for x, y in zip(a, b):
        np.testing.assert_allclose(np.asarray(x, float), np.asarray(y, float), rtol=1e-12, atol=0)


@needs_ext
@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(-10, 10), st.booleans())
def test_backends_agree_on_threshold_probs(seed, thr_db, beam):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 30))
    d = np.sort(rng.uniform(0.5, 80, n))
    w = rng.dirichlet(np.ones(n))
    arc_s = np.ascontiguousarray(rng.uniform(0, 2 * math.pi, (n, 2)))
    arc_l = np.ascontiguousarray(rng.uniform(0.01, math.pi, (n, 2)))
    thr = np.array([10 ** (thr_db / 10), 1.0])
    args = (d, w, arc_s, arc_l, 16, 120.0, 0.0, 100.0, 250.0, -100.0, beam, P.beta, P.alpha, 100.0, P.G_bf, thr, thr)
    a = _kernels.eta_threshold_probs(*args)
    b = _fallback.eta_threshold_probs(*args)
    np.testing.assert_allclose(a[0], b[0], atol=1e-12)
    np.testing.assert_allclose(a[1], b[1], atol=1e-12)
