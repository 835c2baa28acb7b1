"""Areas of the IRS reachability regions and their one-step overlaps.

Notation: ``A_i`` is the radius-``D`` disc around the user at step ``i``,
``B^s`` the half-plane of cell ``s`` cut by the perpendicular bisector of the
BS pair. The reachable region of side ``s`` is ``A_i ∩ B^s``; its overlap with
the previous step is ``A_i ∩ A_{i-1} ∩ B^s``. Quantities with an inner
radius ``d`` replace ``A_i`` by the radius-``d`` disc around the user.

Every area is written as a radial integral of an angular measure: on the
circle of radius ``rho`` around the user, ``B^s`` and ``A_{i-1}`` each cut a
single arc, so derivatives in ``d`` are exact arc lengths and the areas
reduce to one-dimensional quadrature between the radii where the arcs change
shape.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .scenario import ScenarioGeometry

__all__ = [
    "Side",
    "RegionFrame",
    "TWO_PI",
    "cap_area",
    "disc_halfplane_area",
    "lens_area",
    "halfplane_arc",
    "prev_disc_arc",
    "prev_disc_complement_arc",
    "intersect_arcs",
    "area_reachable",
    "area_reachable_overlap",
    "area_reachable_within",
    "area_overlap_within",
    "deriv_area_within",
    "deriv_overlap_within",
    "new_area_within",
    "polar_indicator_area",
]

TWO_PI = 2.0 * math.pi
_GL_X, _GL_W = np.polynomial.legendre.leggauss(48)
# Gauss-Legendre nodes on [0, 1] after t = (1 - cos(pi u)) / 2
_COS_T = 0.5 * (1.0 - np.cos(0.5 * np.pi * (_GL_X + 1.0)))
_COS_W = _GL_W * 0.25 * np.pi * np.sin(0.5 * np.pi * (_GL_X + 1.0))


class Side(enum.Enum):
    ORIGINAL = "original"
    TARGET = "target"

    @property
    def sign(self) -> float:
        return 1.0 if self is Side.ORIGINAL else -1.0


@dataclass(frozen=True)
class RegionFrame:
    """User position ``i`` in a crossing frame with serving distance ``D``."""

    geometry: ScenarioGeometry
    D: float
    i: int

    def __post_init__(self):
        if not (-1 <= self.i <= self.geometry.step_count + 1):
            raise ValueError("step index outside the trajectory")

    @property
    def x_i(self) -> float:
        return self.i * self.geometry.delta_x

    @property
    def delta_x(self) -> float:
        return self.geometry.delta_x

    def h(self, side: Side) -> float:
        """Signed distance from the user to the bisector, positive inside ``side``'s cell."""
        return side.sign * float(self.geometry.h_original(self.x_i, 0.0))

    def psi(self, side: Side) -> float:
        """Direction of the bisector normal pointing out of ``side``'s cell."""
        n = self.geometry.normal
        ang = math.atan2(n[1], n[0])
        return ang if side is Side.ORIGINAL else ang + math.pi


def cap_area(R, t):
    """Area of the part of a radius-``R`` disc beyond a line at signed distance ``t`` from its center."""
    R = np.asarray(R, dtype=float)
    safe = np.where(R > 0, R, 1.0)
    tt = np.clip(np.asarray(t, dtype=float), -safe, safe)
    val = safe**2 * np.arccos(tt / safe) - tt * np.sqrt(np.maximum(safe**2 - tt**2, 0.0))
    out = np.where(R > 0, val, 0.0)
    return out if out.ndim else float(out)


def disc_halfplane_area(R, h):
    """Area of a radius-``R`` disc on the side of a line containing the center when ``h > 0``."""
    R = np.asarray(R, dtype=float)
    out = np.pi * R**2 - cap_area(R, h)
    out = np.maximum(out, 0.0)
    return out if np.ndim(out) else float(out)


def lens_area(r1: float, r2: float, sep: float) -> float:
    """Intersection area of two discs with radii ``r1``, ``r2`` and center separation ``sep``."""
    if r1 < 0 or r2 < 0 or sep < 0:
        raise ValueError("radii and separation must be >= 0")
    if sep >= r1 + r2:
        return 0.0
    if sep <= abs(r1 - r2):
        return math.pi * min(r1, r2) ** 2
    c1 = min(1.0, max(-1.0, (sep**2 + r1**2 - r2**2) / (2 * sep * r1)))
    c2 = min(1.0, max(-1.0, (sep**2 + r2**2 - r1**2) / (2 * sep * r2)))
    k = (-sep + r1 + r2) * (sep + r1 - r2) * (sep - r1 + r2) * (sep + r1 + r2)
    return r1**2 * math.acos(c1) + r2**2 * math.acos(c2) - 0.5 * math.sqrt(max(k, 0.0))


# --- arc algebra -----------------------------------------------------------
# An arc is (start, length) with length in [0, 2 pi]; angles are measured
# from the direction of motion.


def _cos_below_arc(c, psi):
    """Arc ``{phi : cos(phi - psi) < c}``."""
    c = np.asarray(c, dtype=float)
    half = np.arccos(np.clip(c, -1.0, 1.0))
    start = np.mod(psi + half, TWO_PI)
    length = TWO_PI - 2.0 * half
    length = np.where(c >= 1.0, TWO_PI, np.where(c <= -1.0, 0.0, length))
    start = np.where(c >= 1.0, 0.0, start)
    return start, length


def halfplane_arc(rho, h: float, psi: float):
    """Arc of the radius-``rho`` circle around the user lying inside the cell.

    ``h`` is the signed user-to-bisector distance, ``psi`` the outward normal direction.
    """
    rho = np.asarray(rho, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(rho > 0, h / np.where(rho > 0, rho, 1.0), np.sign(h) * np.inf)
    return _cos_below_arc(c, psi)


def _prev_c(rho, D, dx):
    rho = np.asarray(rho, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (D * D - dx * dx - rho * rho) / (2.0 * rho * dx)


def prev_disc_arc(rho, D: float, dx: float):
    """Arc of the radius-``rho`` circle inside the previous-step disc (center ``dx`` behind)."""
    return _cos_below_arc(_prev_c(rho, D, dx), 0.0)


def prev_disc_complement_arc(rho, D: float, dx: float):
    """Arc of the radius-``rho`` circle outside the previous-step disc."""
    c = _prev_c(rho, D, dx)
    half = np.arccos(np.clip(c, -1.0, 1.0))
    length = np.where(c <= -1.0, TWO_PI, np.where(c >= 1.0, 0.0, 2.0 * half))
    start = np.where(c <= -1.0, 0.0, np.mod(-half, TWO_PI))
    return start, length


def intersect_arcs(s1, l1, s2, l2):
    """Intersection of two arcs as up to two pieces.

    Returns
    -------
    starts, lengths : ndarray, shape (..., 2)
        Unused pieces have zero length.
    """
    s1, l1, s2, l2 = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (s1, l1, s2, l2)))
    b = s1 + np.mod(s2 - s1, TWO_PI)  # first copy of arc 2 at or after s1
    e1 = s1 + l1
    p_start = b
    p_len = np.clip(np.minimum(e1, b + l2) - b, 0.0, None)
    q_start = s1
    q_len = np.clip(np.minimum(e1, b - TWO_PI + l2) - s1, 0.0, None)
    starts = np.stack([np.mod(p_start, TWO_PI), np.mod(q_start, TWO_PI)], axis=-1)
    lengths = np.stack([p_len, q_len], axis=-1)
    return starts, lengths


# --- areas -----------------------------------------------------------------


def area_reachable(side: Side, frame: RegionFrame) -> float:
    """Area of ``A_i ∩ B^side``."""
    return disc_halfplane_area(frame.D, frame.h(side))


def area_reachable_within(side: Side, frame: RegionFrame, d) -> float:
    """Area of the radius-``d`` disc around the user inside ``side``'s cell."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("d must be >= 0")
    return disc_halfplane_area(d, frame.h(side))


def deriv_area_within(side: Side, frame: RegionFrame, d):
    """Derivative in ``d`` of :func:`area_reachable_within` (the in-cell arc length)."""
    _, length = halfplane_arc(d, frame.h(side), frame.psi(side))
    out = np.asarray(d, dtype=float) * length
    return out if np.ndim(out) else float(out)


def _overlap_measure(rho, side: Side, frame: RegionFrame):
    sb, lb = halfplane_arc(rho, frame.h(side), frame.psi(side))
    sp, lp = prev_disc_arc(rho, frame.D, frame.delta_x)
    _, lens = intersect_arcs(sb, lb, sp, lp)
    return lens.sum(axis=-1)


def _new_measure(rho, side: Side, frame: RegionFrame):
    sb, lb = halfplane_arc(rho, frame.h(side), frame.psi(side))
    sp, lp = prev_disc_complement_arc(rho, frame.D, frame.delta_x)
    _, lens = intersect_arcs(sb, lb, sp, lp)
    return lens.sum(axis=-1)


def _breakpoints(side: Side, frame: RegionFrame, d: float) -> np.ndarray:
    """Radii where the in-cell arc or the previous-disc arc changes shape."""
    D, dx, h = frame.D, frame.delta_x, frame.h(side)
    pts = [abs(h), D - dx, D + dx]
    # radii of the two points where the bisector meets the previous-disc circle
    psi = frame.psi(side)
    n = np.array([math.cos(psi), math.sin(psi)])
    t = np.array([-n[1], n[0]])
    f = h * n + np.array([dx, 0.0])  # foot point relative to the previous center
    b = float(f @ t)
    disc = b * b - (float(f @ f) - D * D)
    if disc >= 0:
        for s in (-b - math.sqrt(disc), -b + math.sqrt(disc)):
            pts.append(math.hypot(h, s))
    pts = np.array([p for p in pts if 0.0 < p < d])
    return np.unique(np.concatenate([[0.0], pts, [d]]))


def _radial_integral(measure, side: Side, frame: RegionFrame, d: float) -> float:
    edges = _breakpoints(side, frame, d)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b - a <= 0:
            continue
        # the arc measure has square-root kinks at segment ends; the cosine map
        # flattens them
        rho = a + (b - a) * _COS_T
        total += (b - a) * float(np.sum(_COS_W * measure(rho, side, frame) * rho))
    return total


def area_overlap_within(side: Side, frame: RegionFrame, d: float) -> float:
    """Area of (radius-``d`` disc around the user) ∩ ``A_{i-1}`` ∩ ``B^side``.

    Closed form when the bisector misses the small disc; radial quadrature of
    the exact arc measure otherwise.
    """
    if d < 0:
        raise ValueError("d must be >= 0")
    if d == 0:
        return 0.0
    h = frame.h(side)
    if h >= d:
        return lens_area(d, frame.D, frame.delta_x)
    if h <= -d:
        return 0.0
    return min(_radial_integral(_overlap_measure, side, frame, d), area_reachable_within(side, frame, d))


def area_reachable_overlap(side: Side, frame: RegionFrame) -> float:
    """Area of ``A_i ∩ A_{i-1} ∩ B^side``."""
    return area_overlap_within(side, frame, frame.D)


def deriv_overlap_within(side: Side, frame: RegionFrame, d):
    """Derivative in ``d`` of :func:`area_overlap_within` (arc length inside cell and previous disc)."""
    d_arr = np.asarray(d, dtype=float)
    out = d_arr * _overlap_measure(d_arr, side, frame)
    return out if np.ndim(out) else float(out)


def new_area_within(side: Side, frame: RegionFrame, d):
    """Area of the newly reachable region within radius ``d``: in-cell, inside ``d``, outside ``A_{i-1}``.

    Integrated directly over the thin crescent rather than as a difference of
    two large areas, which would lose most of its relative accuracy. Array
    input is integrated cumulatively in one pass.
    """
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr < 0):
        raise ValueError("d must be >= 0")
    lo = frame.D - frame.delta_x
    if d_arr.ndim == 0:
        if d_arr <= lo or frame.h(side) <= -d_arr:
            return 0.0
        return max(0.0, _radial_integral(_new_measure, side, frame, float(d_arr)))
    flat = d_arr.ravel()
    top = float(flat.max(initial=0.0))
    if top <= lo:
        return np.zeros(d_arr.shape)
    # cumulative integral over the merged set of breakpoints and query radii
    knots = np.union1d(_breakpoints(side, frame, top), np.clip(flat, lo, top))
    knots = knots[knots >= lo]
    a, b = knots[:-1], knots[1:]
    rho = a[:, None] + (b - a)[:, None] * _COS_T[None, :]
    vals = _new_measure(rho.ravel(), side, frame).reshape(rho.shape) * rho
    cell = (b - a) * (vals * _COS_W).sum(axis=1)
    cum = np.concatenate([[0.0], np.cumsum(cell)])
    out = np.interp(np.clip(flat, lo, top), knots, cum)
    out[flat <= lo] = 0.0
    return np.maximum(out, 0.0).reshape(d_arr.shape)


def polar_indicator_area(
    side: Side,
    frame: RegionFrame,
    d: float,
    overlap: bool = True,
    n_r: int = 512,
    n_phi: int = 1024,
    refine_rtol: float = 1e-4,
) -> float:
    """Midpoint polar-grid area from explicit point-membership tests.

    Counts grid points inside the cell and, when ``overlap`` is set, inside the
    previous-step disc. Doubles both resolutions once when the half-resolution
    estimate differs by more than ``refine_rtol`` (relative).
    """
    geo = frame.geometry

    def estimate(nr, nphi):
        rho = (np.arange(nr) + 0.5) * d / nr
        phi = (np.arange(nphi) + 0.5) * TWO_PI / nphi
        px = frame.x_i + rho[:, None] * np.cos(phi)[None, :]
        py = rho[:, None] * np.sin(phi)[None, :]
        inside = side.sign * geo.h_original(px, py) > 0
        if overlap:
            inside &= (px - (frame.x_i - frame.delta_x)) ** 2 + py**2 < frame.D**2
        cell = (d / nr) * (TWO_PI / nphi)
        return float(np.sum(inside * rho[:, None]) * cell)

    fine = estimate(n_r, n_phi)
    coarse = estimate(n_r // 2, n_phi // 2)
    if abs(fine - coarse) > refine_rtol * max(abs(fine), 1e-300):
        fine = estimate(2 * n_r, 2 * n_phi)
    return fine
