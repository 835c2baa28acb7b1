import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irsho.channel import ChannelParams
from irsho.config import NetworkConfig, db_to_lin
from irsho.ho_engine import run_analysis
from irsho.irs_chain import propagate, transition_matrix
from irsho.mc_sim import (
    McEstimate,
    estimate_transition_probs,
    irs_window,
    sample_crossing,
    sample_irs,
    simulate_full_topology,
    simulate_matched,
    simulate_trial,
    trial_rng,
    walk_events,
)
from irsho.regions import RegionFrame, Side
from irsho.scenario import build_geometry, geometry_for

from _naive import naive_signals, naive_walk

_bools = st.lists(st.booleans(), min_size=2, max_size=40)


def test_estimate_from_samples():
    e = McEstimate.from_samples([0, 1, 1, 0], seed=3)
    assert e.mean == 0.5 and e.n == 4
    assert e.ci95 == pytest.approx(1.96 * np.std([0, 1, 1, 0], ddof=1) / 2)
    assert e.covers(0.5 + e.ci95) and not e.covers(0.5 + 1.01 * e.ci95)
    empty = McEstimate.from_samples([], seed=0)
    assert math.isnan(empty.mean) and math.isinf(empty.ci95)


def test_ci_shrinks_with_root_n():
    rng = np.random.default_rng(0)
    a = McEstimate.from_samples(rng.random(40_000) < 0.3, 0)
    b = McEstimate.from_samples(rng.random(160_000) < 0.3, 0)
    # four times the trials halves the half-width
    assert b.ci95 / a.ci95 == pytest.approx(0.5, rel=0.02)


def test_trial_streams_independent_and_stable():
    a = trial_rng(7, 3).random(4)
    np.testing.assert_array_equal(a, trial_rng(7, 3).random(4))
    assert not np.array_equal(a, trial_rng(7, 4).random(4))
    assert not np.array_equal(a, trial_rng(8, 3).random(4))


def test_irs_sampling_density():
    rng = np.random.default_rng(1)
    win = (0.0, 1000.0, -50.0, 50.0)
    counts = [sample_irs(rng, 1e-3, win)[0].size for _ in range(400)]
    assert np.mean(counts) == pytest.approx(100.0, abs=4 * math.sqrt(100 / 400))
    assert sample_irs(rng, 0.0, win)[0].size == 0


@settings(max_examples=150, deadline=None)
@given(_bools, st.data(), st.integers(1, 6), st.integers(1, 8))
def test_vectorized_walk_matches_state_machine(h, data, j, u):
    n = len(h)
    f = data.draw(st.lists(st.booleans(), min_size=n, max_size=n))
    pp = data.draw(st.lists(st.booleans(), min_size=n, max_size=n))
    w = walk_events(np.array([h]), np.array([f]), np.array([pp]), j, u)
    ho, hof, p = naive_walk(h, f, pp, j, u)
    np.testing.assert_array_equal(w.ho[0], ho)
    np.testing.assert_array_equal(w.hof[0], hof)
    np.testing.assert_array_equal(w.pp[0], p)


@pytest.fixture(scope="module")
def pp_cfg():
    # a negative margin makes ping-pong and every event type common
    return NetworkConfig(gamma_ho=db_to_lin(-4.0), Q_out=db_to_lin(3.0))


def test_trials_against_naive_implementation(pp_cfg):
    cfg = pp_cfg
    g = geometry_for(cfg)
    p = ChannelParams.from_config(cfg)
    seen = set()
    for trial in range(100):
        log = simulate_trial(cfg, trial, seed=5, geometry=g)
        log.check()
        h = log.eta_ho >= cfg.gamma_ho
        f = log.eta_ho > 1 / cfg.Q_out
        q = log.eta_pp > cfg.gamma_ho
        ho, hof, pp = naive_walk(h, f, q, cfg.j, cfg.u)
        np.testing.assert_array_equal(log.ho_state, ho)
        np.testing.assert_array_equal(log.hof_state, hof)
        np.testing.assert_array_equal(log.pp_state, pp)
        seen.update(name for _, name in log.events)
    assert seen == {"trigger", "execute", "fail", "pingpong"}


def test_signals_against_naive_loop(pp_cfg):
    cfg = pp_cfg
    g = geometry_for(cfg)
    p = ChannelParams.from_config(cfg)
    short = build_geometry(g.r_o, g.r_t, g.L, cfg.v, 0.1)  # 2 m steps keep the loop fast
    for trial in range(3):
        log = simulate_trial(cfg, trial, seed=9, geometry=short)
        rng = trial_rng(9, trial)
        px, py = sample_irs(rng, cfg.lambda_r, irs_window(cfg, short))
        label = np.where(short.h_original(px, py) > 0, 0, 1)
        ref = naive_signals(px, py, label, short.step_count + 1, short.delta_x, cfg.D, (0.0, short.r_o), (short.L, short.r_t), p)
        np.testing.assert_array_equal(log.conn_o, ref[0].astype(bool))
        np.testing.assert_array_equal(log.conn_t, ref[1].astype(bool))
        np.testing.assert_allclose(log.eta_ho, ref[2], rtol=1e-11)
        np.testing.assert_allclose(log.eta_pp, ref[3], rtol=1e-11)
        np.testing.assert_allclose(log.d_o, ref[4], rtol=1e-12)


def test_reproducible_and_batch_invariant():
    cfg = NetworkConfig()
    a = simulate_matched(cfg, n_trials=60, seed=4, batch_size=60)
    b = simulate_matched(cfg, n_trials=60, seed=4, batch_size=7)
    for k in a.per_trial:
        np.testing.assert_array_equal(a.per_trial[k], b.per_trial[k])
    np.testing.assert_array_equal(a.trigger_pmf, b.trigger_pmf)
    np.testing.assert_array_equal(a.irs_freq_o, b.irs_freq_o)
    c = simulate_matched(cfg, n_trials=60, seed=5)
    assert not np.array_equal(a.trigger_pmf, c.trigger_pmf)
    with pytest.raises(ValueError):
        simulate_matched(cfg, n_trials=0)


def test_zero_density_matches_deterministic_analysis():
    cfg = NetworkConfig(lambda_r=0.0, gamma_ho=db_to_lin(-3.0))
    mc = simulate_matched(cfg, n_trials=5, seed=0)
    an = run_analysis(cfg)
    np.testing.assert_array_equal(mc.trigger_pmf, an.p_ht)
    np.testing.assert_array_equal(mc.exec_pmf, an.p_ho)
    np.testing.assert_array_equal(mc.cond_freq["h"], an.p_h)
    np.testing.assert_array_equal(mc.cond_freq["pp"], an.p_pp)
    assert mc.estimates["P_pp"].mean == an.P_pp == 1.0
    assert mc.estimates["P_hof"].mean == an.P_hof


def test_connection_frequencies_match_chain():
    cfg = NetworkConfig()
    g = geometry_for(cfg)
    mc = simulate_matched(cfg, n_trials=2000, seed=1)
    for side, freq in ((Side.ORIGINAL, mc.irs_freq_o), (Side.TARGET, mc.irs_freq_t)):
        ref = propagate(side, g, cfg.D, cfg.lambda_r).states
        # binomial z-scores, small absolute floor for p near 0 or 1
        ref = np.clip(ref, 0.0, 1.0)
        sd = np.sqrt(ref * (1 - ref) / mc.n_trials) + 1e-3
        assert np.max(np.abs(freq - ref) / sd) < 5.0


def test_event_log_dump(tmp_path, pp_cfg):
    path = tmp_path / "events.csv"
    mc = simulate_matched(pp_cfg, n_trials=20, seed=2, log_path=path)
    lines = path.read_text().splitlines()
    assert lines[0] == "trial,step,event,x_i,d,phi"
    events = [ln.split(",") for ln in lines[1:]]
    assert {e[2] for e in events} <= {"trigger", "execute", "fail", "pingpong"}
    n_pp = sum(1 for e in events if e[2] == "pingpong")
    assert n_pp == int(mc.per_trial["pp"].sum())


# --- connection-chain oracle --------------------------------------------------


def test_transition_oracle_rows_and_zero_density(default_geometry):
    f = RegionFrame(default_geometry, 50.0, 620)
    t = estimate_transition_probs(Side.ORIGINAL, f, 5000, 0, 1e-3)
    np.testing.assert_array_equal(t.sum(axis=1), 1.0)
    t0 = estimate_transition_probs(Side.ORIGINAL, f, 1000, 0, 0.0)
    assert t0[0, 0] == 1.0
    with pytest.raises(ValueError):
        estimate_transition_probs(Side.ORIGINAL, f, 10, 0, 1e-3)


def test_transition_oracle_agrees_with_chain(default_geometry):
    checked = 0
    for i in (300, 600, 640):
        for side in Side:
            f = RegionFrame(default_geometry, 50.0, i)
            emp, counts = estimate_transition_probs(side, f, 100_000, i, 1e-3, return_counts=True)
            ref = transition_matrix(side, f, 1e-3)
            for r in range(4):
                # a row backed by few layouts cannot resolve 0.01
                if counts[r] >= 5000:
                    np.testing.assert_allclose(emp[r], ref[r], atol=0.01)
                    checked += 1
    assert checked >= 12


# --- full topology ------------------------------------------------------------


def test_crossing_sampler_geometry():
    rng = np.random.default_rng(3)
    found = 0
    for _ in range(200):
        cr = sample_crossing(rng, 1e-5, 1000.0)
        if cr is None:
            continue
        found += 1
        # the user starts at the original BS foot point and the bisector is ahead
        assert cr.L > 0
        bo, bt = cr.to_local(cr.bs[[cr.o, cr.t]])
        np.testing.assert_allclose(bo, [0.0, cr.L], atol=1e-9)
        np.testing.assert_allclose(bt, [cr.r_o, cr.r_t], atol=1e-9)
    assert found > 50


def test_full_topology_resampling_and_scaling():
    cfg = NetworkConfig(lambda_r=0.0)
    a = simulate_full_topology(cfg, region_side=1000.0, n_trials=40, seed=1)
    b = simulate_full_topology(cfg.replace(lambda_b=4 * cfg.lambda_b), region_side=500.0, n_trials=40, seed=1)
    # same draws on a half-size square at four times the density: every layout shrinks by half
    np.testing.assert_allclose(b.lengths, 0.5 * a.lengths, rtol=1e-9)
    assert a.resampled == b.resampled
    assert a.resampled >= 0
    with pytest.raises(ValueError):
        simulate_full_topology(cfg, region_side=-1.0)


def test_full_topology_batched_walk_is_exact(monkeypatch, pp_cfg):
    from irsho import mc_sim

    a = simulate_full_topology(pp_cfg, n_trials=40, seed=6)
    monkeypatch.setattr(mc_sim, "_WALK_BATCH", 1)
    b = simulate_full_topology(pp_cfg, n_trials=40, seed=6)
    for k in ("hof", "pp", "hof_rel"):
        np.testing.assert_array_equal(a.per_trial[k], b.per_trial[k])
    assert a.per_trial["pp"].sum() > 0 and a.per_trial["hof"].sum() > 0


def test_full_topology_density_scaling_fixed_region():
    # a square wide enough that edge effects stay small at both densities
    cfg = NetworkConfig(lambda_r=0.0)
    a = simulate_full_topology(cfg, region_side=3000.0, n_trials=1500, seed=2)
    b = simulate_full_topology(cfg.replace(lambda_b=4 * cfg.lambda_b), region_side=3000.0, n_trials=1500, seed=3)
    ratio = b.estimates["L"].mean / a.estimates["L"].mean
    assert ratio == pytest.approx(0.5, rel=0.05)


def test_full_topology_without_irs_matches_analysis_per_trial():
    cfg = NetworkConfig(lambda_r=0.0, gamma_ho=db_to_lin(-2.0))
    res = simulate_full_topology(cfg, n_trials=6, seed=4)
    for k in range(6):
        g = build_geometry(res.offsets[k, 0], res.offsets[k, 1], res.lengths[k], cfg.v, cfg.T_d)
        an = run_analysis(cfg, geometry=g)
        assert res.per_trial["pp"][k] == an.P_pp
        assert res.per_trial["hof"][k] == an.P_hof
