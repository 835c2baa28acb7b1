"""Monte Carlo oracles for the analytic chains.

Two modes are provided:

* matched geometry: the analytic two-BS frame is kept fixed and only the
  IRS point process is random, with cell membership given by the bisector;
* full topology: BSs and IRSs are sampled over a square, the crossing is
  found from a random start point and direction, and cell membership is the
  Voronoi cell of each BS.

Every trial draws from its own counter-based stream keyed by
``(seed, trial)``, so batching and ordering never change the result.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .channel import ChannelParams
from .config import NetworkConfig
from .irs_dist import tail_radius
from .regions import RegionFrame, Side
from .scenario import ScenarioGeometry, build_geometry, geometry_for

__all__ = [
    "McEstimate",
    "TrialLog",
    "MatchedResult",
    "FullTopologyResult",
    "Crossing",
    "trial_rng",
    "irs_window",
    "sample_irs",
    "walk_events",
    "simulate_trial",
    "simulate_matched",
    "sample_crossing",
    "simulate_full_topology",
    "estimate_transition_probs",
]

log = logging.getLogger(__name__)

_Z95 = 1.96


@dataclass(frozen=True)
class McEstimate:
    """Sample mean with a normal-approximation 95% half-width."""

    mean: float
    n: int
    ci95: float
    seed: int

    @classmethod
    def from_samples(cls, values, seed: int) -> "McEstimate":
        v = np.asarray(values, dtype=float)
        n = v.size
        if n == 0:
            return cls(math.nan, 0, math.inf, seed)
        sd = float(v.std(ddof=1)) if n > 1 else math.inf
        return cls(float(v.mean()), n, _Z95 * sd / math.sqrt(n), seed)

    def covers(self, value: float, k: float = 1.0) -> bool:
        """True when ``value`` lies within ``k`` half-widths of the mean."""
        return abs(value - self.mean) <= k * self.ci95


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent Philox stream for one trial."""
    return np.random.Generator(np.random.Philox(key=(int(seed) & (2**64 - 1)) | (int(trial) << 64)))


def irs_window(cfg: NetworkConfig, geometry: ScenarioGeometry) -> tuple[float, float, float, float]:
    """Rectangle ``(x0, x1, y0, y1)`` holding every IRS that can matter along the trajectory."""
    w = cfg.D + geometry.delta_x
    if cfg.lambda_r > 0:
        w = max(w, tail_radius(cfg.D, cfg.lambda_r, cfg.quad.tail_mass))
    return -w, geometry.L + w, -w, w


def sample_irs(rng: np.random.Generator, lambda_r: float, window) -> tuple[np.ndarray, np.ndarray]:
    """Homogeneous PPP on a rectangle."""
    x0, x1, y0, y1 = window
    n = rng.poisson(lambda_r * (x1 - x0) * (y1 - y0)) if lambda_r > 0 else 0
    return rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)


# --- event chains -----------------------------------------------------------


@dataclass
class EventWalk:
    """Per-trial chain states at steps 0..I (columns) for each trial (rows)."""

    ho: np.ndarray
    hof: np.ndarray
    pp: np.ndarray
    j: int
    u: int


def walk_events(h: np.ndarray, f: np.ndarray, pp: np.ndarray, j: int, u: int) -> EventWalk:
    """Run the HO, HOF and PP chains on realized step conditions.

    Parameters
    ----------
    h, f, pp : ndarray of bool, shape (n, I+1)
        Trigger, failure and ping-pong conditions at each step.
    j, u : int
        TTT and sojourn state counts.

    Notes
    -----
    The state at step ``i + 1`` is decided by the conditions at step ``i``,
    mirroring the analytic propagation. A failure requires the trigger
    condition to hold as well.
    """
    h = np.asarray(h, dtype=bool)
    f = np.asarray(f, dtype=bool) & h
    pp = np.asarray(pp, dtype=bool)
    n, s = h.shape
    ho = np.zeros((n, s), dtype=np.int16)
    hof = np.zeros((n, s), dtype=np.int16)
    ppc = np.zeros((n, s), dtype=np.int16)
    hc, ft, fc, pt, pc = j + 1, j + 1, j + 2, u + 1, u + 2
    a = np.zeros(n, dtype=np.int16)
    b = np.zeros(n, dtype=np.int16)
    c = np.zeros(n, dtype=np.int16)
    for i in range(s - 1):
        hi, fi, pi = h[:, i], f[:, i], pp[:, i]
        # PP chain reads the HO state before it moves
        c_new = c.copy()
        c_new[(c == 0) & (a == j)] = 1
        mov = (c >= 1) & (c < u)
        c_new[mov & pi] = pt
        c_new[mov & ~pi] = c[mov & ~pi] + 1
        c_new[c == pt] = pc
        # HO chain
        a_new = a.copy()
        infl = a < j
        a_new[infl & hi] = a[infl & hi] + 1
        a_new[infl & ~hi] = 0
        a_new[a == j] = hc
        # HOF chain
        b_new = b.copy()
        b0 = b == 0
        b_new[b0 & hi] = 1
        bi = (b >= 1) & (b < j)
        b_new[bi & ~hi] = 0
        b_new[bi & fi] = ft
        adv = bi & hi & ~fi
        b_new[adv] = b[adv] + 1
        b_new[b == ft] = fc
        a, b, c = a_new, b_new, c_new
        ho[:, i + 1] = a
        hof[:, i + 1] = b
        ppc[:, i + 1] = c
    return EventWalk(ho, hof, ppc, j, u)


@dataclass
class TrialLog:
    """Step records of one matched-geometry trial.

    Connection flags cover steps -1..I; every other per-step array covers
    0..I. ``events`` holds ``(step, name)`` pairs for ``trigger``,
    ``execute``, ``fail`` and ``pingpong``.
    """

    trial: int
    x: np.ndarray
    conn_o: np.ndarray
    conn_t: np.ndarray
    d_o: np.ndarray
    a_o: np.ndarray
    d_t: np.ndarray
    a_t: np.ndarray
    eta_ho: np.ndarray
    eta_pp: np.ndarray
    ho_state: np.ndarray
    hof_state: np.ndarray
    pp_state: np.ndarray
    j: int
    u: int
    events: list = field(default_factory=list)

    def irs_state(self, side: Side) -> np.ndarray:
        """Connection state index 0..3 per step (pair of flags at i-1, i)."""
        c = self.conn_o if side is Side.ORIGINAL else self.conn_t
        return 2 * c[:-1].astype(int) + c[1:].astype(int)

    def check(self) -> None:
        """Assert the event-consistency invariants.

        No failure once the HOF chain has completed the HO, and a ping-pong
        only after the HO has executed.
        """
        j, u = self.j, self.u
        done = np.flatnonzero(self.hof_state == j)
        fail = np.flatnonzero(self.hof_state == j + 1)
        if done.size and fail.size:
            raise AssertionError("failure and completion in the same HOF walk")
        pp = np.flatnonzero(self.pp_state == u + 1)
        if pp.size:
            ex = np.flatnonzero(self.ho_state == j)
            if not ex.size or ex[0] >= pp[0]:
                raise AssertionError("ping-pong before execution")


def _events(ho_row, hof_row, pp_row, j, u):
    ev = []
    for i in np.flatnonzero(ho_row == 1):
        ev.append((int(i), "trigger"))
    for i in np.flatnonzero(ho_row == j):
        ev.append((int(i), "execute"))
    for i in np.flatnonzero(hof_row == j + 1):
        ev.append((int(i), "fail"))
    for i in np.flatnonzero(pp_row == u + 1):
        ev.append((int(i), "pingpong"))
    ev.sort()
    return ev


def _signals(cfg: NetworkConfig, geometry: ScenarioGeometry, px, py, label, params: ChannelParams):
    return kernels.trial_signals(
        np.ascontiguousarray(px, dtype=float),
        np.ascontiguousarray(py, dtype=float),
        np.ascontiguousarray(label, dtype=np.int8),
        geometry.step_count + 1,
        geometry.delta_x,
        cfg.D,
        0.0,
        geometry.r_o,
        geometry.L,
        geometry.r_t,
        params.beta,
        params.alpha,
        float(params.N),
        params.G_bf,
    )


def _bisector_labels(geometry: ScenarioGeometry, px, py) -> np.ndarray:
    return np.where(geometry.h_original(px, py) > 0, 0, 1).astype(np.int8)


def _conditions(cfg: NetworkConfig, r_ho, r_pp):
    return r_ho >= cfg.gamma_ho, r_ho > 1.0 / cfg.Q_out, r_pp > cfg.gamma_ho


def simulate_trial(cfg: NetworkConfig, trial: int, seed: int, geometry: ScenarioGeometry | None = None) -> TrialLog:
    """Full step record of one matched-geometry trial."""
    geometry = geometry or geometry_for(cfg)
    params = ChannelParams.from_config(cfg)
    rng = trial_rng(seed, trial)
    px, py = sample_irs(rng, cfg.lambda_r, irs_window(cfg, geometry))
    sig = _signals(cfg, geometry, px, py, _bisector_labels(geometry, px, py), params)
    co, ct, r_ho, r_pp, d_o, a_o, d_t, a_t = sig
    h, f, pp = _conditions(cfg, r_ho, r_pp)
    w = walk_events(h[None], f[None], pp[None], cfg.j, cfg.u)
    return TrialLog(
        trial, geometry.steps(), co.astype(bool), ct.astype(bool), d_o, a_o, d_t, a_t, r_ho, r_pp,
        w.ho[0], w.hof[0], w.pp[0], cfg.j, cfg.u, _events(w.ho[0], w.hof[0], w.pp[0], cfg.j, cfg.u),
    )


@dataclass
class MatchedResult:
    """Aggregates of a matched-geometry run.

    Attributes
    ----------
    estimates : dict of McEstimate
        ``P_hof``, ``P_pp`` and the event locations ``E_hof``, ``E_pp``
        (over trials with the event) and ``E_ho``.
    trigger_pmf, exec_pmf : ndarray, shape (I+1,)
        Fraction of trials in ``H_1`` and ``H_j`` at each step.
    cond_freq : dict of ndarray
        Per-step frequency of the trigger (``h``), failure (``f``) and
        ping-pong (``pp``) conditions, the empirical step probabilities.
    irs_freq_o, irs_freq_t : ndarray, shape (I+1, 4)
        Connection-state frequencies per step.
    """

    geometry: ScenarioGeometry
    n_trials: int
    seed: int
    estimates: dict
    trigger_pmf: np.ndarray
    exec_pmf: np.ndarray
    irs_freq_o: np.ndarray
    irs_freq_t: np.ndarray
    cond_freq: dict = field(default_factory=dict)
    per_trial: dict = field(default_factory=dict, repr=False)


def _state_codes(conn: np.ndarray) -> np.ndarray:
    # flag pairs (prev, now): (0,0) I1, (0,1) I2, (1,0) I3, (1,1) I4
    c = conn.astype(np.int8)
    return 2 * c[:, :-1] + c[:, 1:]


def simulate_matched(
    cfg: NetworkConfig,
    geometry: ScenarioGeometry | None = None,
    n_trials: int = 1000,
    seed: int = 0,
    batch_size: int = 500,
    log_path=None,
) -> MatchedResult:
    """Matched-geometry Monte Carlo of the HO, HOF and PP metrics.

    Parameters
    ----------
    log_path : path-like, optional
        When given, one CSV line per event: ``trial,step,event,x_i,d,phi``.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    geometry = geometry or geometry_for(cfg)
    params = ChannelParams.from_config(cfg)
    window = irs_window(cfg, geometry)
    s = geometry.step_count + 1
    x = geometry.steps()
    j, u = cfg.j, cfg.u
    trig = np.zeros(s)
    exe = np.zeros(s)
    freq_o = np.zeros((s, 4))
    freq_t = np.zeros((s, 4))
    cond = {"h": np.zeros(s), "f": np.zeros(s), "pp": np.zeros(s)}
    hof_ind = np.zeros(n_trials)
    pp_ind = np.zeros(n_trials)
    hof_x = np.full(n_trials, np.nan)
    pp_x = np.full(n_trials, np.nan)
    ho_x = np.full(n_trials, np.nan)
    fh = open(log_path, "w", encoding="utf-8", newline="\n") if log_path else None
    try:
        if fh:
            fh.write("trial,step,event,x_i,d,phi\n")
        for start in range(0, n_trials, batch_size):
            stop = min(n_trials, start + batch_size)
            nb = stop - start
            h = np.zeros((nb, s), dtype=bool)
            f = np.zeros((nb, s), dtype=bool)
            pp = np.zeros((nb, s), dtype=bool)
            co = np.zeros((nb, s + 1), dtype=np.int8)
            ct = np.zeros((nb, s + 1), dtype=np.int8)
            geo = []
            for k in range(nb):
                rng = trial_rng(seed, start + k)
                px, py = sample_irs(rng, cfg.lambda_r, window)
                sig = _signals(cfg, geometry, px, py, _bisector_labels(geometry, px, py), params)
                co[k], ct[k] = sig[0], sig[1]
                h[k], f[k], pp[k] = _conditions(cfg, sig[2], sig[3])
                if fh:
                    geo.append(sig[4:])
            w = walk_events(h, f, pp, j, u)
            cond["h"] += h.sum(axis=0)
            cond["f"] += f.sum(axis=0)
            cond["pp"] += pp.sum(axis=0)
            trig += (w.ho == 1).sum(axis=0)
            exe += (w.ho == j).sum(axis=0)
            for freq, conn in ((freq_o, co), (freq_t, ct)):
                codes = _state_codes(conn)
                for m in range(4):
                    freq[:, m] += (codes == m).sum(axis=0)
            hof_ind[start:stop] = w.hof[:, -1] == j + 2
            pp_ind[start:stop] = w.pp[:, -1] == u + 2
            for arr, states, code in ((hof_x, w.hof, j + 1), (pp_x, w.pp, u + 1), (ho_x, w.ho, j)):
                hit = states == code
                any_hit = hit.any(axis=1)
                first = np.argmax(hit, axis=1)
                arr[start:stop] = np.where(any_hit, x[first], np.nan)
            if fh:
                for k in range(nb):
                    d_o, a_o, d_t, a_t = geo[k]
                    for i, name in _events(w.ho[k], w.hof[k], w.pp[k], j, u):
                        d, a = (d_t[i], a_t[i]) if name == "pingpong" else (d_o[i], a_o[i])
                        fh.write(f"{start + k},{i},{name},{x[i]:.6f},{d:.6f},{a:.6f}\n")
    finally:
        if fh:
            fh.close()
    est = {
        "P_hof": McEstimate.from_samples(hof_ind, seed),
        "P_pp": McEstimate.from_samples(pp_ind, seed),
        "E_hof": McEstimate.from_samples(hof_x[~np.isnan(hof_x)], seed),
        "E_pp": McEstimate.from_samples(pp_x[~np.isnan(pp_x)], seed),
        "E_ho": McEstimate.from_samples(ho_x[~np.isnan(ho_x)], seed),
    }
    return MatchedResult(
        geometry, n_trials, seed, est, trig / n_trials, exe / n_trials, freq_o / n_trials, freq_t / n_trials,
        {k: v / n_trials for k, v in cond.items()},
        {"hof": hof_ind, "pp": pp_ind, "hof_x": hof_x, "pp_x": pp_x, "ho_x": ho_x},
    )


# --- full topology ------------------------------------------------------------

_WALK_BATCH = 256


@dataclass(frozen=True)
class Crossing:
    """One sampled cell-boundary crossing in world and trajectory coordinates.

    ``origin`` is the foot point of the original BS on the trajectory line,
    ``e1`` the direction of motion and ``e2`` its left normal.
    """

    bs: np.ndarray
    o: int
    t: int
    origin: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    r_o: float
    r_t: float
    L: float

    def to_local(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        rel = pts - self.origin
        return rel @ self.e1, rel @ self.e2


def sample_crossing(rng: np.random.Generator, lambda_b: float, region_side: float) -> Crossing | None:
    """Draw a BS layout, a start point and a heading, and locate the first cell change.

    The start point is uniform on the central half of the square. Returns
    ``None`` when the layout admits no valid crossing: fewer than two BSs,
    no cell change ahead, a non-positive foot separation, or a trajectory
    segment leaving the square.
    """
    r = region_side
    n = rng.poisson(lambda_b * r * r)
    bs = rng.uniform(0.0, r, (n, 2))
    p0 = rng.uniform(0.25 * r, 0.75 * r, 2)
    ang = rng.uniform(0.0, 2 * math.pi)
    if n < 2:
        return None
    e1 = np.array([math.cos(ang), math.sin(ang)])
    e2 = np.array([-e1[1], e1[0]])
    rel = bs - p0
    dist2 = np.einsum("ij,ij->i", rel, rel)
    o = int(np.argmin(dist2))
    # distance along the heading to the bisector with each other BS
    den = 2.0 * (rel - rel[o]) @ e1
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(den > 0, (dist2 - dist2[o]) / den, np.inf)
    s[o] = np.inf
    t = int(np.argmin(s))
    if not np.isfinite(s[t]):
        return None
    so, st = rel[o] @ e1, rel[t] @ e1
    L = float(st - so)
    if L <= 0:
        return None
    origin = p0 + so * e1
    end = origin + L * e1
    if not (np.all((origin >= 0) & (origin <= r)) and np.all((end >= 0) & (end <= r))):
        return None
    return Crossing(bs, o, t, origin, e1, e2, float(rel[o] @ e2), float(rel[t] @ e2), L)


@dataclass
class FullTopologyResult:
    """Aggregates of a full-topology run; ``resampled`` counts rejected layouts."""

    n_trials: int
    seed: int
    estimates: dict
    resampled: int
    lengths: np.ndarray
    offsets: np.ndarray
    per_trial: dict = field(default_factory=dict, repr=False)


def simulate_full_topology(
    cfg: NetworkConfig,
    region_side: float = 1000.0,
    n_trials: int = 1000,
    seed: int = 0,
    max_attempts: int = 1000,
) -> FullTopologyResult:
    """Monte Carlo over random BS and IRS layouts in a square region.

    Each trial resamples its layout from its own stream until a valid
    crossing appears. The user walks from the original BS foot point to the
    target BS foot point; IRSs belong to the Voronoi cell of their nearest BS.
    """
    if region_side <= 0:
        raise ValueError("region_side must be > 0")
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    params = ChannelParams.from_config(cfg)
    j, u = cfg.j, cfg.u
    hof = np.zeros(n_trials)
    pp = np.zeros(n_trials)
    lengths = np.zeros(n_trials)
    offsets = np.zeros((n_trials, 2))
    hof_rel = np.full(n_trials, np.nan)
    resampled = 0
    pending = []

    def flush():
        # walk a batch of trials of unequal length at once: conditions from the
        # last real step on are cleared, so the states up to that step are exact
        width = max(c[1].size for c in pending)
        hb = np.zeros((len(pending), width), dtype=bool)
        fb = np.zeros_like(hb)
        qb = np.zeros_like(hb)
        for r, (_, h, f, q, _) in enumerate(pending):
            n = h.size - 1
            hb[r, :n], fb[r, :n], qb[r, :n] = h[:n], f[:n], q[:n]
        w = walk_events(hb, fb, qb, j, u)
        for r, (k, h, _, _, dx) in enumerate(pending):
            last = h.size - 1
            hof[k] = w.hof[r, last] == j + 2
            pp[k] = w.pp[r, last] == u + 2
            fail = np.flatnonzero(w.hof[r, : last + 1] == j + 1)
            if fail.size:
                hof_rel[k] = fail[0] * dx / lengths[k]
        pending.clear()

    for k in range(n_trials):
        rng = trial_rng(seed, k)
        for _ in range(max_attempts):
            cr = sample_crossing(rng, cfg.lambda_b, region_side)
            if cr is not None:
                break
            resampled += 1
        else:
            raise RuntimeError(f"no valid crossing after {max_attempts} layouts")
        geometry = build_geometry(cr.r_o, cr.r_t, cr.L, cfg.v, cfg.T_d)
        n_r = rng.poisson(cfg.lambda_r * region_side**2) if cfg.lambda_r > 0 else 0
        pts = rng.uniform(0.0, region_side, (n_r, 2))
        if n_r:
            d2 = ((pts[:, None, :] - cr.bs[None, :, :]) ** 2).sum(axis=2)
            near = np.argmin(d2, axis=1)
            label = np.full(n_r, 2, dtype=np.int8)
            label[near == cr.o] = 0
            label[near == cr.t] = 1
        else:
            label = np.zeros(0, dtype=np.int8)
        px, py = cr.to_local(pts)
        sig = _signals(cfg, geometry, px, py, label, params)
        h, f, q = _conditions(cfg, sig[2], sig[3])
        lengths[k] = cr.L
        offsets[k] = cr.r_o, cr.r_t
        pending.append((k, h, f, q, geometry.delta_x))
        if len(pending) >= _WALK_BATCH:
            flush()
    if pending:
        flush()
    est = {
        "P_hof": McEstimate.from_samples(hof, seed),
        "P_pp": McEstimate.from_samples(pp, seed),
        "L": McEstimate.from_samples(lengths, seed),
    }
    return FullTopologyResult(n_trials, seed, est, resampled, lengths, offsets, {"hof": hof, "pp": pp, "hof_rel": hof_rel})


# --- connection-chain oracle ---------------------------------------------------


def estimate_transition_probs(
    side: Side, frame: RegionFrame, n_samples: int, seed: int, lambda_r: float, return_counts: bool = False
):
    """Empirical 4x4 connection matrix at the step of ``frame``.

    IRS layouts are drawn independently; the connection flags at steps i-1
    and i are tabulated and each row is the conditional frequency of the
    flag at i given the flag at i-1 (rows of equal previous flag coincide).
    With ``return_counts`` the number of layouts behind each row is returned
    as well; rows backed by few layouts carry large sampling error.
    """
    if n_samples < 1000:
        raise ValueError("n_samples must be >= 1000")
    g, D = frame.geometry, frame.D
    x_prev, x_now = frame.x_i - g.delta_x, frame.x_i
    x0, x1, y0, y1 = x_prev - D, x_now + D, -D, D
    rng = trial_rng(seed, 0)
    counts = rng.poisson(lambda_r * (x1 - x0) * (y1 - y0), n_samples) if lambda_r > 0 else np.zeros(n_samples, int)
    total = int(counts.sum())
    owner = np.repeat(np.arange(n_samples), counts)
    px = rng.uniform(x0, x1, total)
    py = rng.uniform(y0, y1, total)
    own = g.h_original(px, py) > 0
    if side is Side.TARGET:
        own = ~own
    d2p = (px - x_prev) ** 2 + py**2
    d2n = (px - x_now) ** 2 + py**2
    prev = np.zeros(n_samples, dtype=bool)
    now = np.zeros(n_samples, dtype=bool)
    np.logical_or.at(prev, owner[own & (d2p <= D * D)], True)
    np.logical_or.at(now, owner[own & (d2n <= D * D)], True)
    t = np.zeros((4, 4))
    row_counts = np.zeros(4, dtype=int)
    for flag, rows in ((False, (0, 2)), (True, (1, 3))):
        sel = prev == flag
        n = int(sel.sum())
        row_counts[list(rows)] = n
        lost = 1.0 if n == 0 else float(np.count_nonzero(~now[sel])) / n
        # column 0/2 is "not connected at i", 1/3 "connected at i"
        cols = (0, 1) if not flag else (2, 3)
        for r in rows:
            t[r, cols[0]] = lost
            t[r, cols[1]] = 1.0 - lost
    return (t, row_counts) if return_counts else t
