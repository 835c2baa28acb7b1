"""Handover, handover-failure and ping-pong chains.

Per step ``i`` the trigger, failure and ping-pong condition probabilities are
mixtures over the IRS connection states of the relevant cell, each term an
expectation of a gain-ratio indicator under the conditional IRS law. The
three absorbing chains are then propagated jointly along the trajectory.

Chain layouts (column order):

* HO: ``H_0 .. H_j, H_c``
* HOF: ``F_0 .. F_j, F_t, F_c``
* PP: ``PP_0 .. PP_u, PP_t, PP_c``
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .channel import ChannelParams
from .config import NetworkConfig
from .irs_chain import IrsChainResult, propagate
from .irs_dist import QuadGrid, State, UnreachableStateError, build_grid, conditional_spec
from .regions import RegionFrame, Side
from .scenario import ScenarioGeometry, geometry_for

__all__ = [
    "AnalysisContext",
    "StepProbabilities",
    "HoMetrics",
    "make_context",
    "step_prob_ho",
    "step_prob_hof",
    "step_prob_pp",
    "step_probabilities",
    "build_ho_matrix",
    "build_hof_matrix",
    "build_pp_matrix",
    "propagate_ho",
    "propagate_hof",
    "propagate_pp",
    "metrics_from_steps",
    "run_analysis",
    "analyze_grid",
    "PP_COUPLINGS",
]

log = logging.getLogger(__name__)


@dataclass
class AnalysisContext:
    """Per-run state: geometry, IRS chains and cached quadrature grids.

    Grids are cached per (side, state, step, resolution) and shared by all
    predicates evaluated at that step.
    """

    cfg: NetworkConfig
    geometry: ScenarioGeometry
    params: ChannelParams
    irs_o: IrsChainResult
    irs_t: IrsChainResult
    grid_cache: dict = field(default_factory=dict)
    refinements: int = 0

    def grid(self, side: Side, state: State, i: int, level: int) -> QuadGrid | None:
        q = self.cfg.quad
        n_d = max(1, q.n_d * 2**level // 2)
        n_phi = max(1, q.n_phi * 2**level // 2)
        no_serv = not state.serving
        key = (None if no_serv else side, State.I1 if no_serv else state, None if no_serv else i, level)
        if key not in self.grid_cache:
            frame = RegionFrame(self.geometry, self.cfg.D, i)
            try:
                spec = conditional_spec(side, state, frame, self.cfg.lambda_r, q.tail_mass)
                self.grid_cache[key] = build_grid(spec, n_d, n_phi)
            except UnreachableStateError:
                self.grid_cache[key] = None
        return self.grid_cache[key]

    def drop_step(self, i: int) -> None:
        for key in [k for k in self.grid_cache if k[2] == i]:
            del self.grid_cache[key]


def make_context(cfg: NetworkConfig, geometry: ScenarioGeometry | None = None) -> AnalysisContext:
    geometry = geometry or geometry_for(cfg)
    irs_o = propagate(Side.ORIGINAL, geometry, cfg.D, cfg.lambda_r)
    irs_t = propagate(Side.TARGET, geometry, cfg.D, cfg.lambda_r)
    return AnalysisContext(cfg, geometry, ChannelParams.from_config(cfg), irs_o, irs_t)


def _law_probs(ctx: AnalysisContext, side: Side, state: State, i: int, thr_ge, thr_gt):
    """Threshold probabilities under one conditional law, with one refinement."""
    g = ctx.geometry
    p = ctx.params
    if side is Side.ORIGINAL:
        serv, nbr = (0.0, g.r_o), (g.L, g.r_t)
    else:
        serv, nbr = (g.L, g.r_t), (0.0, g.r_o)
    ux = i * g.delta_x

    def run(level):
        grid = ctx.grid(side, state, i, level)
        if grid is None:
            return None
        return kernels.eta_threshold_probs(
            grid.d, grid.w, grid.arc_s, grid.arc_l, grid.n_phi, ux, serv[0], serv[1], nbr[0], nbr[1],
            state.serving, p.beta, p.alpha, float(p.N), p.G_bf, thr_ge, thr_gt,
        )

    fine = run(1)
    if fine is None:
        return None
    if ctx.cfg.quad.refine:
        coarse = run(0)
        diff = max(np.max(np.abs(fine[0] - coarse[0]), initial=0.0), np.max(np.abs(fine[1] - coarse[1]), initial=0.0))
        if diff > ctx.cfg.quad.refine_tol:
            ctx.refinements += 1
            fine = run(2)
    return fine


def _direct_ratio(ctx: AnalysisContext, side: Side, i: int) -> float:
    """Neighbor-to-serving direct gain ratio (no IRS present)."""
    g, p = ctx.geometry, ctx.params
    ux = i * g.delta_x
    xo2 = ux * ux + g.r_o * g.r_o
    xt2 = (ux - g.L) ** 2 + g.r_t * g.r_t
    go = p.beta * xo2 ** (-0.5 * p.alpha)
    gt = p.beta * xt2 ** (-0.5 * p.alpha)
    return gt / go if side is Side.ORIGINAL else go / gt


_LAWS = ((State.I1, (0, 2)), (State.I2, (1,)), (State.I4, (3,)))


def _side_step(ctx: AnalysisContext, side: Side, i: int, thr_ge: np.ndarray, thr_gt: np.ndarray):
    vec = (ctx.irs_o if side is Side.ORIGINAL else ctx.irs_t).states[i]
    p_ge = np.zeros(thr_ge.size)
    p_gt = np.zeros(thr_gt.size)
    if ctx.cfg.lambda_r == 0 or ctx.cfg.N == 0:
        # no IRS, or one without elements, leaves only the direct links
        r = _direct_ratio(ctx, side, i)
        return (r >= thr_ge).astype(float), (r > thr_gt).astype(float)
    used = []
    for state, idx in _LAWS:
        weight = math.fsum(vec[k] for k in idx)
        if weight == 0.0:
            continue
        res = _law_probs(ctx, side, state, i, thr_ge, thr_gt)
        if res is None:
            if weight > 1e-6:
                log.warning("state %s on %s side has weight %.3e but no support at step %d", state.name, side.value, weight, i)
            continue
        used.append(weight)
        p_ge += weight * res[0]
        p_gt += weight * res[1]
    # mass of unresolvable states is spread over the others
    total = math.fsum(used)
    if 0.0 < total < 1.0:
        p_ge /= total
        p_gt /= total
    return np.clip(p_ge, 0.0, 1.0), np.clip(p_gt, 0.0, 1.0)


@dataclass
class StepProbabilities:
    """Per-step condition probabilities for a list of HO margins.

    Attributes
    ----------
    gammas : ndarray, shape (K,)
        HO margins as linear ratios.
    p_h, p_pp : ndarray, shape (K, I+1)
        Trigger and ping-pong condition probabilities.
    p_f : ndarray, shape (I+1,)
        HOF condition probability (independent of the margin).
    """

    gammas: np.ndarray
    p_h: np.ndarray
    p_pp: np.ndarray
    p_f: np.ndarray
    refinements: int = 0


def step_probabilities(ctx: AnalysisContext, gammas=None) -> StepProbabilities:
    """Evaluate the three step probabilities at every step, sharing grids across predicates."""
    cfg = ctx.cfg
    gammas = np.atleast_1d(np.asarray([cfg.gamma_ho] if gammas is None else gammas, dtype=float))
    n = ctx.geometry.step_count + 1
    p_h = np.zeros((gammas.size, n))
    p_pp = np.zeros((gammas.size, n))
    p_f = np.zeros(n)
    hof_thr = np.array([1.0 / cfg.Q_out])
    none = np.zeros(0)
    for i in range(n):
        ge, gt = _side_step(ctx, Side.ORIGINAL, i, gammas, hof_thr)
        p_h[:, i] = ge
        p_f[i] = gt[0]
        _, gt = _side_step(ctx, Side.TARGET, i, none, gammas)
        p_pp[:, i] = gt
        ctx.drop_step(i)
    return StepProbabilities(gammas, p_h, p_pp, p_f, ctx.refinements)


def step_prob_ho(ctx: AnalysisContext, i: int, gamma_ho: float | None = None) -> float:
    """Probability that the trigger condition holds at step ``i``."""
    g = ctx.cfg.gamma_ho if gamma_ho is None else gamma_ho
    ge, _ = _side_step(ctx, Side.ORIGINAL, i, np.array([g]), np.zeros(0))
    return float(ge[0])


def step_prob_hof(ctx: AnalysisContext, i: int) -> float:
    """Probability that the serving-to-target SIR is below ``Q_out`` at step ``i``."""
    _, gt = _side_step(ctx, Side.ORIGINAL, i, np.zeros(0), np.array([1.0 / ctx.cfg.Q_out]))
    return float(gt[0])


def step_prob_pp(ctx: AnalysisContext, i: int, gamma_ho: float | None = None) -> float:
    """Probability that the handover-back condition holds at step ``i``."""
    g = ctx.cfg.gamma_ho if gamma_ho is None else gamma_ho
    _, gt = _side_step(ctx, Side.TARGET, i, np.zeros(0), np.array([g]))
    return float(gt[0])


# --- chain matrices -------------------------------------------------------


def build_ho_matrix(p_h: float, j: int) -> np.ndarray:
    """HO transition matrix of size (j+2)."""
    if not 0.0 <= p_h <= 1.0:
        raise ValueError("p_h must lie in [0, 1]")
    t = np.zeros((j + 2, j + 2))
    for q in range(j):
        t[q, 0] = 1.0 - p_h
        t[q, q + 1] += p_h
    t[j, j + 1] = 1.0
    t[j + 1, j + 1] = 1.0
    return t


@dataclass
class _Clamp:
    count: int = 0


def build_hof_matrix(p_h: float, p_f: float, j: int, clamp: _Clamp | None = None) -> np.ndarray:
    """HOF transition matrix of size (j+3); ``p_f`` is clamped to ``p_h``."""
    if p_f > p_h:
        if clamp is not None:
            clamp.count += 1
        p_f = p_h
    t = np.zeros((j + 3, j + 3))
    ft, fc = j + 1, j + 2
    t[0, 0] = 1.0 - p_h
    t[0, 1] = p_h
    for q in range(1, j):
        t[q, 0] = 1.0 - p_h
        t[q, q + 1] = p_h - p_f
        t[q, ft] = p_f
    t[j, j] = 1.0
    t[ft, fc] = 1.0
    t[fc, fc] = 1.0
    return t


def build_pp_matrix(p_c: float, p_pp: float, u: int) -> np.ndarray:
    """PP transition matrix of size (u+3)."""
    t = np.zeros((u + 3, u + 3))
    pt, pc = u + 1, u + 2
    t[0, 0] = 1.0 - p_c
    t[0, 1] = p_c
    for q in range(1, u):
        t[q, q + 1] = 1.0 - p_pp
        t[q, pt] = p_pp
    t[u, u] = 1.0
    t[pt, pc] = 1.0
    t[pc, pc] = 1.0
    return t


# --- structured propagation (equivalent to v @ T without forming T) -------


def propagate_ho(p_h: np.ndarray, j: int) -> np.ndarray:
    """HO state vectors for steps 0..I.

    ``p_h`` has shape (..., I+1); the result has shape (..., I+1, j+2). The
    vector at step ``i+1`` is the vector at ``i`` times ``T^H(i)``.
    """
    p_h = np.asarray(p_h, dtype=float)
    n = p_h.shape[-1]
    out = np.zeros(p_h.shape[:-1] + (n, j + 2))
    v = np.zeros(p_h.shape[:-1] + (j + 2,))
    v[..., 0] = 1.0
    out[..., 0, :] = v
    for i in range(n - 1):
        p = p_h[..., i, None]
        nv = np.empty_like(v)
        nv[..., 0] = (1.0 - p[..., 0]) * v[..., :j].sum(axis=-1)
        nv[..., 1 : j + 1] = p * v[..., :j]
        nv[..., j + 1] = v[..., j] + v[..., j + 1]
        v = nv
        out[..., i + 1, :] = v
    return out


def propagate_hof(p_h: np.ndarray, p_f: np.ndarray, j: int) -> tuple[np.ndarray, int]:
    """HOF state vectors for steps 0..I and the number of clamped steps."""
    p_h = np.asarray(p_h, dtype=float)
    p_f = np.broadcast_to(np.asarray(p_f, dtype=float), p_h.shape)
    clamps = int(np.sum(p_f > p_h))
    pf = np.minimum(p_f, p_h)
    n = p_h.shape[-1]
    ft, fc = j + 1, j + 2
    out = np.zeros(p_h.shape[:-1] + (n, j + 3))
    v = np.zeros(p_h.shape[:-1] + (j + 3,))
    v[..., 0] = 1.0
    out[..., 0, :] = v
    for i in range(n - 1):
        p = p_h[..., i]
        f = pf[..., i]
        inflight = v[..., 1:j].sum(axis=-1)
        nv = np.zeros_like(v)
        nv[..., 0] = (1.0 - p) * (v[..., 0] + inflight)
        nv[..., 1] = p * v[..., 0]
        if j > 1:
            nv[..., 2 : j + 1] = (p - f)[..., None] * v[..., 1:j]
        nv[..., j] += v[..., j]
        nv[..., ft] = f * inflight
        nv[..., fc] = v[..., ft] + v[..., fc]
        v = nv
        out[..., i + 1, :] = v
    return out, clamps


PP_COUPLINGS = ("literal", "flow")


def propagate_pp(p_c: np.ndarray, p_pp: np.ndarray, u: int, coupling: str = "literal") -> np.ndarray:
    """PP state vectors for steps 0..I.

    ``p_c`` is the HO-execution probability ``s_j^H(i)``. With ``coupling``
    ``"literal"`` it is used directly as the exit probability of ``PP_0``.
    With ``"flow"`` the exit probability is ``s_j^H(i) / s_0^PP(i)`` so that
    the mass entering ``PP_1`` equals the mass executing the HO even when
    execution is spread over several steps.
    """
    if coupling not in PP_COUPLINGS:
        raise ValueError(f"coupling must be one of {PP_COUPLINGS}")
    p_c = np.asarray(p_c, dtype=float)
    p_pp = np.broadcast_to(np.asarray(p_pp, dtype=float), p_c.shape)
    n = p_c.shape[-1]
    pt, pc = u + 1, u + 2
    out = np.zeros(p_c.shape[:-1] + (n, u + 3))
    v = np.zeros(p_c.shape[:-1] + (u + 3,))
    v[..., 0] = 1.0
    out[..., 0, :] = v
    for i in range(n - 1):
        c = p_c[..., i]
        if coupling == "flow":
            v0 = v[..., 0]
            c = np.where(v0 > 0, np.minimum(1.0, c / np.where(v0 > 0, v0, 1.0)), 0.0)
        q = p_pp[..., i]
        moving = v[..., 1:u].sum(axis=-1)
        nv = np.zeros_like(v)
        nv[..., 0] = (1.0 - c) * v[..., 0]
        nv[..., 1] = c * v[..., 0]
        if u > 1:
            nv[..., 2 : u + 1] = (1.0 - q)[..., None] * v[..., 1:u]
        nv[..., u] += v[..., u]
        nv[..., pt] = q * moving
        nv[..., pc] = v[..., pt] + v[..., pc]
        v = nv
        out[..., i + 1, :] = v
    return out


@dataclass
class HoMetrics:
    """Outputs of one analysis run.

    ``E_hof`` and ``E_pp`` are ``None`` when the event probability is zero.
    ``E_ht`` is the raw trigger-weighted location sum; ``E_ht_norm`` divides
    it by the total trigger mass.
    """

    x: np.ndarray
    L: float
    p_ht: np.ndarray
    p_ho: np.ndarray
    P_hof: float
    P_pp: float
    E_ht: float
    E_ht_norm: float | None
    E_ho: float
    E_hof: float | None
    E_pp: float | None
    p_h: np.ndarray
    p_f: np.ndarray
    p_pp: np.ndarray
    clamps: int = 0
    ho_states: np.ndarray | None = field(default=None, repr=False)
    hof_states: np.ndarray | None = field(default=None, repr=False)
    pp_states: np.ndarray | None = field(default=None, repr=False)

    def scalars(self) -> dict:
        return {
            "P_hof": self.P_hof,
            "P_pp": self.P_pp,
            "E_ht_m": self.E_ht,
            "E_ht_norm_m": self.E_ht_norm,
            "E_ho_m": self.E_ho,
            "E_hof_m": self.E_hof,
            "E_pp_m": self.E_pp,
            "trigger_mass": float(self.p_ht.sum()),
            "L_m": self.L,
            "clamps": self.clamps,
        }


def metrics_from_steps(
    x: np.ndarray, L: float, p_h: np.ndarray, p_f: np.ndarray, p_pp: np.ndarray, j: int, u: int,
    keep_states: bool = False, pp_coupling: str = "literal",
) -> HoMetrics:
    """Run the three chains for one margin and extract the metrics."""
    ho = propagate_ho(p_h, j)
    hof, clamps = propagate_hof(p_h, p_f, j)
    pp = propagate_pp(ho[:, j], p_pp, u, pp_coupling)
    p_ht = ho[:, 1].copy()
    p_ho = ho[:, j].copy()
    P_hof = float(hof[-1, j + 2])
    P_pp = float(pp[-1, u + 2])
    trig = float(p_ht.sum())
    E_ht = float(np.dot(p_ht, x))
    E_hof = float(np.dot(hof[:, j + 1], x) / P_hof) if P_hof > 0 else None
    E_pp = float(np.dot(pp[:, u + 1], x) / P_pp) if P_pp > 0 else None
    return HoMetrics(
        x=x, L=L, p_ht=p_ht, p_ho=p_ho, P_hof=P_hof, P_pp=P_pp,
        E_ht=E_ht, E_ht_norm=E_ht / trig if trig > 0 else None, E_ho=float(np.dot(p_ho, x)),
        E_hof=E_hof, E_pp=E_pp, p_h=p_h, p_f=p_f, p_pp=p_pp, clamps=clamps,
        ho_states=ho if keep_states else None,
        hof_states=hof if keep_states else None,
        pp_states=pp if keep_states else None,
    )


def run_analysis(
    cfg: NetworkConfig, geometry: ScenarioGeometry | None = None, keep_states: bool = False, pp_coupling: str = "literal"
) -> HoMetrics:
    """Full analytic run at the configured margin."""
    ctx = make_context(cfg, geometry)
    steps = step_probabilities(ctx)
    x = ctx.geometry.steps()
    return metrics_from_steps(
        x, ctx.geometry.L, steps.p_h[0], steps.p_f, steps.p_pp[0], cfg.j, cfg.u, keep_states, pp_coupling
    )


def analyze_grid(
    cfg: NetworkConfig, gammas_lin, t_ts, geometry: ScenarioGeometry | None = None, pp_coupling: str = "literal"
) -> dict:
    """Metrics for every (T_t, gamma) pair from one pass of step probabilities.

    Returns
    -------
    dict
        Maps ``(T_t, gamma)`` to :class:`HoMetrics`.
    """
    ctx = make_context(cfg, geometry)
    steps = step_probabilities(ctx, gammas_lin)
    x = ctx.geometry.steps()
    out = {}
    for t_t in t_ts:
        c = cfg.replace(T_t=t_t)
        for k, g in enumerate(steps.gammas):
            out[(t_t, float(g))] = metrics_from_steps(
                x, ctx.geometry.L, steps.p_h[k], steps.p_f, steps.p_pp[k], c.j, c.u, pp_coupling=pp_coupling
            )
    return out
