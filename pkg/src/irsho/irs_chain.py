"""Four-state IRS connection chain of one cell.

States, indexed 0..3: ``I1`` not connected at i-1 or i, ``I2`` newly
connected at i, ``I3`` disconnected at i, ``I4`` connected at both. The
state at step ``i`` describes the connection pair (i-1, i), so the matrix
``T(i)`` built from the frames i-1 and i moves the vector from i-1 to i.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .regions import RegionFrame, Side, area_reachable, new_area_within
from .scenario import ScenarioGeometry

__all__ = [
    "IrsChainResult",
    "transition_matrix",
    "connection_probs",
    "stationary_closed_form",
    "stationary_linear_solve",
    "initial_state",
    "propagate",
    "ClampCounter",
]

log = logging.getLogger(__name__)


@dataclass
class ClampCounter:
    """Counts negative numeric areas clamped to zero."""

    count: int = 0


def _band_limits(geometry: ScenarioGeometry, D: float) -> tuple[float, float]:
    half = D / math.sin(geometry.theta)
    return geometry.x_mid - half, geometry.x_mid + half


def connection_probs(side: Side, frame: RegionFrame, lambda_r: float, clamp: ClampCounter | None = None) -> tuple[float, float]:
    """Return ``(p11, p23)``: stay unconnected, and lose the connection.

    ``p11`` is the void probability of the newly reachable region. ``p23``
    is the probability that every IRS reachable at i-1 leaves the reachable
    region at i while no new one appears, given at least one was reachable.
    """
    if lambda_r == 0:
        return 1.0, 1.0
    lo, hi = _band_limits(frame.geometry, frame.D)
    x = frame.x_i
    if side is Side.ORIGINAL and x > hi:
        return 1.0, 1.0
    if side is Side.TARGET and x <= lo:
        return 1.0, 1.0
    s_i = area_reachable(side, frame)
    prev = RegionFrame(frame.geometry, frame.D, frame.i - 1)
    s_prev = area_reachable(side, prev)
    # the crescent is integrated directly; the overlap follows from exact areas
    new = new_area_within(side, frame, frame.D)
    s_ov = s_i - new
    if s_ov < 0:
        # rounding noise on a vanishing overlap is not worth reporting
        if s_ov < -1e-9 * frame.D**2:
            if clamp is not None:
                clamp.count += 1
            log.debug("negative overlap area %.3e clamped at step %d", s_ov, frame.i)
        s_ov = 0.0
    p11 = math.exp(-lambda_r * new)
    denom = -math.expm1(-lambda_r * s_prev)
    if denom <= 0:
        # nothing was reachable at i-1; the row is never entered
        return p11, 1.0
    # P(some IRS in the departing part, none in the overlap) / P(some IRS at i-1)
    leaving = max(0.0, s_prev - s_ov)
    p23 = math.exp(-lambda_r * s_ov) * -math.expm1(-lambda_r * leaving) / denom * p11
    return p11, min(1.0, p23)


def transition_matrix(side: Side, frame: RegionFrame, lambda_r: float, clamp: ClampCounter | None = None) -> np.ndarray:
    """Row-stochastic 4x4 connection matrix at step ``frame.i``."""
    p11, p23 = connection_probs(side, frame, lambda_r, clamp)
    t = np.zeros((4, 4))
    t[0, 0] = t[2, 0] = p11
    t[0, 1] = t[2, 1] = 1.0 - p11
    t[1, 2] = t[3, 2] = p23
    t[1, 3] = t[3, 3] = 1.0 - p23
    return t


def stationary_closed_form(p11: float, p23: float) -> np.ndarray:
    """Stationary vector of the connection chain with constant ``p11``, ``p23``."""
    p12 = 1.0 - p11
    den = p23 + p12
    if den <= 0:
        return np.array([1.0, 0.0, 0.0, 0.0])
    return np.array([p11 * p23, p12 * p23, p23 * p12, p12 * (1.0 - p23)]) / den


def stationary_linear_solve(t: np.ndarray) -> np.ndarray:
    """Stationary vector from ``s T = s``, ``sum(s) = 1`` by least squares."""
    a = np.vstack([t.T - np.eye(4), np.ones((1, 4))])
    b = np.zeros(5)
    b[-1] = 1.0
    s, *_ = np.linalg.lstsq(a, b, rcond=None)
    return s


def initial_state(side: Side, frame0: RegionFrame, lambda_r: float) -> np.ndarray:
    """Connection state at step 0.

    The original cell starts in its steady state under the step-0 matrix;
    the target cell starts unconnected.
    """
    if side is Side.TARGET or lambda_r == 0:
        return np.array([1.0, 0.0, 0.0, 0.0])
    p11, p23 = connection_probs(side, frame0, lambda_r)
    return stationary_closed_form(p11, p23)


@dataclass
class IrsChainResult:
    """Propagated connection states of one cell.

    Attributes
    ----------
    states : ndarray, shape (I+1, 4)
        State vector per step.
    p11, p23 : ndarray, shape (I+1,)
        Matrix parameters per step; ``T(i)`` is rebuilt from them.
    clamps : int
        Negative areas clamped while building the matrices.
    """

    side: Side
    states: np.ndarray
    p11: np.ndarray
    p23: np.ndarray
    clamps: int = 0
    extra: dict = field(default_factory=dict)

    def matrix(self, i: int) -> np.ndarray:
        t = np.zeros((4, 4))
        t[[0, 2], 0] = self.p11[i]
        t[[0, 2], 1] = 1.0 - self.p11[i]
        t[[1, 3], 2] = self.p23[i]
        t[[1, 3], 3] = 1.0 - self.p23[i]
        return t


def propagate(side: Side, geometry: ScenarioGeometry, D: float, lambda_r: float) -> IrsChainResult:
    """Connection-state vectors for steps 0..I.

    The vector at step 0 is the initial state; each later vector is the
    previous one times ``T(i)``; the two mass totals are accumulated with
    compensated sums.
    """
    n = geometry.step_count + 1
    clamp = ClampCounter()
    p11 = np.ones(n)
    p23 = np.ones(n)
    for i in range(n):
        p11[i], p23[i] = connection_probs(side, RegionFrame(geometry, D, i), lambda_r, clamp)
    states = np.zeros((n, 4))
    s = initial_state(side, RegionFrame(geometry, D, 0), lambda_r)
    states[0] = s
    for i in range(1, n):
        a, b = p11[i], p23[i]
        unc = math.fsum((s[0], s[2]))
        con = math.fsum((s[1], s[3]))
        s = np.array([unc * a, unc * (1.0 - a), con * b, con * (1.0 - b)])
        states[i] = s
    return IrsChainResult(side, states, p11, p23, clamp.count)
