"""Two-BS mobility frame and the density-derived crossing statistics.

The user walks along the x-axis from the foot point of the original BS at
``(0, r_o)`` towards the foot point of the target BS at ``(L, r_t)``. The
crossing-length density is the chord law of a Poisson-Voronoi boundary
crossing, written as a double integral over the two angles of the triangle
formed by the BS pair and the crossing point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, special

__all__ = [
    "QuadratureError",
    "GeometryError",
    "ScenarioGeometry",
    "StepFrame",
    "crossing_length_pdf",
    "crossing_length_tail",
    "expected_crossing_length",
    "default_offsets",
    "build_geometry",
    "geometry_for",
]


class QuadratureError(RuntimeError):
    """Quadrature failed to reach its tolerance."""

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved error {achieved:.3e})")
        self.achieved = achieved


class GeometryError(ValueError):
    pass


def _triangle_terms(ups, tau):
    """Angle-only factors of the crossing-length integrand."""
    s = np.sin(ups + tau)
    ru = np.sin(ups) / s
    rt = np.sin(tau) / s
    v2 = (1 + rt**2 - 2 * rt * np.cos(ups)) * (
        1 - tau / np.pi + np.sin(2 * tau) / (2 * np.pi)
    ) + rt**2 * (1 - ups / np.pi + np.sin(2 * ups) / (2 * np.pi))
    b0 = ((np.pi - tau) * np.cos(tau) + np.sin(tau)) / np.pi
    c0 = ((np.pi - tau) + np.sin(tau) * np.cos(tau)) / np.pi
    return ru * rt / s, (b0 * ru) ** 2, c0, v2


def _pdf_integrand(x, l, lam):
    # x[:, 0] = ups in (0, pi); x[:, 1] = b in (0, 1) maps tau = (pi - ups) b
    ups = x[:, 0:1]
    tau = (np.pi - ups) * x[:, 1:2]
    a, b, c0, v2 = _triangle_terms(ups, tau)
    ll = l[None, :]
    val = (
        (np.pi - ups)
        * np.pi**2
        * lam**1.5
        * ll**2
        * a
        * (2 * np.pi * lam * ll**2 * b - c0)
        * np.exp(-np.pi * lam * ll**2 * v2)
    )
    return val


def crossing_length_pdf(l, lambda_b: float, rtol: float = 1e-6):
    """Density of the foot-point separation ``L`` of a boundary crossing.

    Parameters
    ----------
    l : float or array_like
        Separations in meters, all > 0.
    lambda_b : float
        BS density per square meter.
    rtol : float
        Relative tolerance of the adaptive cubature.

    Returns
    -------
    float or ndarray
        Density per meter, same shape as ``l``.

    Notes
    -----
    The angular domain is the triangle ``ups + tau < pi`` (the two base
    angles of a triangle). All lengths are evaluated in one vectorized
    cubature call.
    """
    scalar = np.ndim(l) == 0
    la = np.atleast_1d(np.asarray(l, dtype=float))
    if np.any(la <= 0):
        raise ValueError("l must be > 0")
    if lambda_b <= 0:
        raise ValueError("lambda_b must be > 0")
    eps = 1e-9
    res = integrate.cubature(
        lambda x: _pdf_integrand(x, la, lambda_b),
        [eps, eps],
        [np.pi - eps, 1.0 - eps],
        rtol=rtol,
        atol=1e-14 * math.sqrt(lambda_b),
        max_subdivisions=20000,
    )
    if res.status != "converged":
        raise QuadratureError("crossing-length cubature did not converge", float(np.max(res.error)))
    out = np.maximum(res.estimate, 0.0)
    return float(out[0]) if scalar else out


def _moment_integrand(lam, p, l_max, upper):
    """Angular integrand of the truncated moment of order ``p``."""

    def g(tau, ups):
        a, b, c0, v2 = _triangle_terms(ups, tau)
        aa = np.pi * lam * v2

        def m(q):
            k = (q + 1) / 2.0
            full = special.gamma(k) / (2 * aa**k)
            if l_max is None:
                return full
            reg = special.gammaincc if upper else special.gammainc
            return full * reg(k, aa * l_max**2)

        return np.pi**2 * lam**1.5 * a * (2 * np.pi * lam * b * m(4 + p) - c0 * m(2 + p))

    return g


def _moment(lam: float, p: int, l_max: float | None, upper: bool = False) -> float:
    # the l-integral is closed form; only the angles are integrated numerically
    g = _moment_integrand(lam, p, l_max, upper)

    def f(x):
        ups = x[:, 0]
        return (np.pi - ups) * g((np.pi - ups) * x[:, 1], ups)

    eps = 1e-9
    res = integrate.cubature(
        f, [eps, eps], [np.pi - eps, 1.0 - eps], rtol=1e-10, atol=0.0, max_subdivisions=100000
    )
    if res.status != "converged" or not np.isfinite(res.estimate):
        raise QuadratureError("moment quadrature failed", float(res.error))
    return float(res.estimate)


def crossing_length_tail(l_max: float, lambda_b: float) -> float:
    """Mass of the crossing-length law beyond ``l_max``."""
    return _moment(lambda_b, 0, l_max, upper=True)


@lru_cache(maxsize=64)
def expected_crossing_length(lambda_b: float, tail_mass: float = 1e-6) -> float:
    """Mean crossing length, truncated where the tail mass drops below ``tail_mass``.

    Parameters
    ----------
    lambda_b : float
        BS density per square meter.
    tail_mass : float
        Discarded upper-tail probability.

    Returns
    -------
    float
        ``E[L]`` in meters.
    """
    if lambda_b <= 0:
        raise ValueError("lambda_b must be > 0")
    scale = 1.0 / math.sqrt(lambda_b)
    l_max = optimize.brentq(
        lambda lm: math.log(crossing_length_tail(lm, lambda_b)) - math.log(tail_mass),
        0.5 * scale,
        20.0 * scale,
        xtol=1e-6 * scale,
    )
    return _moment(lambda_b, 1, l_max)


@lru_cache(maxsize=64)
def default_offsets(lambda_b: float) -> tuple[float, float]:
    """Mean perpendicular offset of the nearest BS from a straight path.

    The offset is ``E[r |sin phi|]`` with ``r`` the nearest-point distance of a
    PPP of density ``lambda_b`` and ``phi`` uniform.

    Returns
    -------
    (r_o, r_t) : tuple of float
        ``r_t = -r_o`` (BSs on opposite sides of the path).
    """
    if lambda_b <= 0:
        raise ValueError("lambda_b must be > 0")
    # integral of |sin phi| over a full turn is 4
    radial, _ = integrate.quad(
        lambda r: r**2 * lambda_b * math.exp(-lambda_b * math.pi * r * r),
        0,
        np.inf,
        epsrel=1e-12,
    )
    r_o = 4.0 * radial
    return r_o, -r_o


@dataclass(frozen=True)
class ScenarioGeometry:
    """Deterministic frame of one crossing.

    Attributes
    ----------
    r_o, r_t : float
        Signed perpendicular offsets of the original and target BS.
    L : float
        Foot-point separation.
    x_mid : float
        Abscissa of the point equidistant from both BSs.
    theta : float
        Acute angle between the trajectory and the perpendicular bisector.
    delta_x : float
        Displacement per measurement period.
    step_count : int
        ``I = ceil(L / delta_x)``.
    """

    r_o: float
    r_t: float
    L: float
    x_mid: float
    theta: float
    delta_x: float
    step_count: int

    @property
    def bs_o(self) -> np.ndarray:
        return np.array([0.0, self.r_o])

    @property
    def bs_t(self) -> np.ndarray:
        return np.array([self.L, self.r_t])

    @property
    def normal(self) -> np.ndarray:
        """Unit normal of the bisector pointing from the original towards the target cell."""
        d = self.bs_t - self.bs_o
        return d / np.hypot(d[0], d[1])

    @property
    def band_half_width(self) -> float:
        """Trajectory half-length of the band where a radius-D disc straddles the bisector, per meter of D."""
        return 1.0 / math.sin(self.theta)

    def x(self, i) -> np.ndarray | float:
        return np.asarray(i) * self.delta_x if np.ndim(i) else i * self.delta_x

    def steps(self) -> np.ndarray:
        return np.arange(self.step_count + 1) * self.delta_x

    def h_original(self, px, py=0.0):
        """Signed distance from points to the bisector, positive inside the original cell."""
        n = self.normal
        mx, my = 0.5 * self.L, 0.5 * (self.r_o + self.r_t)
        return n[0] * (mx - np.asarray(px)) + n[1] * (my - np.asarray(py))

    def frame(self, i: int) -> "StepFrame":
        return StepFrame(self, i)


@dataclass(frozen=True)
class StepFrame:
    """Per-step distances and angles of the user at ``x_i``."""

    geometry: ScenarioGeometry
    i: int

    @property
    def x_i(self) -> float:
        return self.i * self.geometry.delta_x

    @property
    def x_o(self) -> float:
        return math.hypot(self.x_i, self.geometry.r_o)

    @property
    def x_t(self) -> float:
        g = self.geometry
        return math.hypot(g.L - self.x_i, g.r_t)

    def phi_o(self, phi_prime):
        """Angle at the user between the original BS and the IRS."""
        return np.arctan2(self.geometry.r_o, -self.x_i) - phi_prime

    def phi_t(self, phi_prime):
        """Angle at the user between the IRS and the target BS."""
        g = self.geometry
        return phi_prime - np.arctan2(g.r_t, g.L - self.x_i)


def build_geometry(r_o: float, r_t: float, L: float, v: float, T_d: float) -> ScenarioGeometry:
    """Fill the crossing frame from BS offsets, separation and mobility.

    Raises
    ------
    GeometryError
        Coincident BSs or non-positive L, v, T_d.
    """
    if v <= 0 or T_d <= 0:
        raise GeometryError("v and T_d must be > 0")
    if L == 0 and r_o == r_t:
        raise GeometryError("coincident base stations")
    if L <= 0:
        raise GeometryError("L must be > 0")
    x_mid = ((r_o**2 - r_t**2) + L**2) / (2 * L)
    # angle between the x-axis and the bisector direction (perpendicular to BS_t - BS_o)
    dx, dy = L, r_t - r_o
    bis = np.array([-dy, dx]) / math.hypot(dx, dy)
    theta = math.acos(min(1.0, abs(bis[0])))
    theta = min(theta, math.pi / 2)
    delta_x = T_d * v
    step_count = max(1, int(math.ceil(L / delta_x - 1e-12)))
    return ScenarioGeometry(r_o, r_t, L, x_mid, theta, delta_x, step_count)


def geometry_for(cfg) -> ScenarioGeometry:
    """Geometry of a :class:`~irsho.config.NetworkConfig`, filling defaults from ``lambda_b``."""
    r_o, r_t = cfg.r_o, cfg.r_t
    if r_o is None or r_t is None:
        d_o, d_t = default_offsets(cfg.lambda_b)
        r_o = d_o if r_o is None else r_o
        r_t = d_t if r_t is None else r_t
    L = cfg.L if cfg.L is not None else expected_crossing_length(cfg.lambda_b)
    return build_geometry(r_o, r_t, L, cfg.v, cfg.T_d)
