"""Cascaded IRS channel: direct and reflected path gains.

A BS at distance ``x`` from the user reaches it directly and through an IRS
at distance ``d`` from the user; ``phi`` is the angle at the user between the
BS and the IRS, so the BS-IRS distance is ``x' = sqrt(x^2 + d^2 - 2 x d cos phi)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

__all__ = [
    "ChannelParams",
    "pathloss_direct",
    "bs_irs_distance",
    "gamma_bf",
    "gamma_sc",
    "received_power_serving",
    "received_power_neighbor",
    "serving_distance_from_threshold",
    "threshold_from_serving_distance",
    "exact_serving_distance",
]


@dataclass(frozen=True)
class ChannelParams:
    """Channel constants.

    Attributes
    ----------
    P_t : float
        Transmit power in watts.
    f_c : float
        Carrier frequency in hertz.
    alpha : float
        Path-loss exponent.
    N : int
        IRS element count.
    D : float
        IRS serving distance in meters.
    c : float
        Speed of light.
    """

    P_t: float = 10.0
    f_c: float = 3e9
    alpha: float = 4.0
    N: int = 100
    D: float = 50.0
    c: float = 3.0e8

    def __post_init__(self):
        if self.alpha <= 2:
            raise ValueError("alpha must be > 2")
        if self.N < 0:
            raise ValueError("N must be >= 0")

    @property
    def beta(self) -> float:
        return (4 * math.pi * self.f_c / self.c) ** -2

    @property
    def G_bf(self) -> float:
        k = math.pi**2 / 16
        return k * self.N**2 + (1 - k) * self.N

    @classmethod
    def from_config(cls, cfg) -> "ChannelParams":
        return cls(P_t=cfg.P_t, f_c=cfg.f_c, alpha=cfg.alpha, N=int(cfg.N), D=cfg.D, c=cfg.c)


def pathloss_direct(dist, params: ChannelParams):
    """Power-law gain ``beta * dist**-alpha``; also used for the IRS-user hop."""
    dist = np.asarray(dist, dtype=float)
    if np.any(dist <= 0):
        raise ValueError("distance must be > 0")
    out = params.beta * dist ** (-params.alpha)
    return out if out.ndim else float(out)


def bs_irs_distance(x, d, phi):
    """Law-of-cosines BS-IRS distance with the cosine clamped to [-1, 1]."""
    cphi = np.clip(np.cos(phi), -1.0, 1.0)
    sq = np.asarray(x, dtype=float) ** 2 + np.asarray(d, dtype=float) ** 2 - 2 * x * d * cphi
    return np.sqrt(np.maximum(sq, 0.0))


def _terms(x, d, phi, params):
    x = np.asarray(x, dtype=float)
    d = np.asarray(d, dtype=float)
    if np.any(x <= 0) or np.any(d <= 0):
        raise ValueError("x and d must be > 0")
    xp = bs_irs_distance(x, d, phi)
    if np.any(xp <= 0):
        raise ValueError("degenerate geometry: IRS coincides with the BS")
    return pathloss_direct(x, params), pathloss_direct(d, params), pathloss_direct(xp, params)


def gamma_bf(x, d, phi, params: ChannelParams):
    """Gain with the IRS beamforming towards the user."""
    gx, gd, gxp = _terms(x, d, phi, params)
    out = gx + params.G_bf * gd * gxp + params.N * (math.pi / 4) * np.sqrt(math.pi * gx * gd * gxp)
    return out if np.ndim(out) else float(out)


def gamma_sc(x, d, phi, params: ChannelParams):
    """Gain with the IRS scattering randomly."""
    gx, gd, gxp = _terms(x, d, phi, params)
    out = gx + params.N * gxp * gd
    return out if np.ndim(out) else float(out)


def received_power_serving(x, d, phi, params: ChannelParams):
    """Serving-BS power: beamforming when ``d <= D``, scattering otherwise."""
    d_arr = np.asarray(d, dtype=float)
    out = params.P_t * np.where(d_arr <= params.D, gamma_bf(x, d, phi, params), gamma_sc(x, d, phi, params))
    return out if out.ndim else float(out)


def received_power_neighbor(x, d, phi, params: ChannelParams):
    """Neighbor-BS power; the IRS never beamforms for the measured reference signal."""
    return params.P_t * gamma_sc(x, d, phi, params)


def serving_distance_from_threshold(gamma_irs: float, params: ChannelParams) -> float:
    """Approximate serving distance ``(G_bf beta / gamma_irs)**(1/alpha)``."""
    if gamma_irs <= 0:
        raise ValueError("gamma_irs must be > 0")
    return (params.G_bf * params.beta / gamma_irs) ** (1.0 / params.alpha)


def threshold_from_serving_distance(D: float, params: ChannelParams) -> float:
    """Inverse of :func:`serving_distance_from_threshold`."""
    if D <= 0:
        raise ValueError("D must be > 0")
    return params.G_bf * params.beta / D**params.alpha


def exact_serving_distance(gamma_irs: float, params: ChannelParams, x: float = 200.0, phi: float = math.pi / 2) -> float:
    """Root in ``d`` of ``gamma_bf / gamma_sc - 1 = gamma_irs`` at a fixed BS distance and angle.

    The relative gain decreases monotonically in ``d``; the root is bracketed
    on a log scale between 1 mm and 1000 km.
    """

    def f(logd):
        d = math.exp(logd)
        gx, gd, gxp = (float(v) for v in _terms(x, d, phi, params))
        # bf/sc - 1 written without the cancelling subtraction
        excess = (params.G_bf - params.N) * gd * gxp + params.N * (math.pi / 4) * math.sqrt(math.pi * gx * gd * gxp)
        return math.log(excess) - math.log(gx + params.N * gxp * gd) - math.log(gamma_irs)

    lo, hi = math.log(1e-3), math.log(1e6)
    if f(lo) < 0 or f(hi) > 0:
        raise ValueError("threshold outside the bracketed range")
    return math.exp(optimize.brentq(f, lo, hi, xtol=1e-14))
