"""Conditional distance and angle laws of the IRS used by the user.

For a connected state the serving IRS is the nearest one in the reachable
region. Its distance ``d`` has cdf ``(1 - exp(-lambda A(d))) / Z`` where
``A(d)`` is the admissible area within radius ``d``; given ``d`` the angle
``phi'`` (from the direction of motion) is uniform on the admissible arcs of
the radius-``d`` circle:

* ``I4``: admissible set is the cell half-plane inside ``A_i``;
* ``I2``: as ``I4`` but outside the previous disc ``A_{i-1}`` (a newly
  reachable IRS);
* ``I1``/``I3``: no serving IRS; the nearest IRS beyond ``D`` with uniform
  angle, truncated at a small tail mass.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .regions import (
    TWO_PI,
    RegionFrame,
    Side,
    disc_halfplane_area,
    halfplane_arc,
    intersect_arcs,
    new_area_within,
    prev_disc_complement_arc,
)

__all__ = [
    "State",
    "UnreachableStateError",
    "ConditionalPdfSpec",
    "QuadGrid",
    "conditional_spec",
    "pdf_distance",
    "pdf_angle",
    "build_grid",
    "expect_indicator",
    "tail_radius",
]

_GL4_X, _GL4_W = np.polynomial.legendre.leggauss(4)


class State(enum.IntEnum):
    I1 = 0
    I2 = 1
    I3 = 2
    I4 = 3

    @property
    def serving(self) -> bool:
        return self in (State.I2, State.I4)


class UnreachableStateError(ValueError):
    """The requested (side, state, step) has zero probability."""


@dataclass(frozen=True)
class ConditionalPdfSpec:
    """Law of the IRS variables for one (side, state, step).

    Attributes
    ----------
    side, state : Side, State
    frame : RegionFrame
        Step frame carrying geometry, ``D`` and the step index.
    lambda_r : float
        IRS density per square meter.
    d_lo, d_hi : float
        Distance support ``(d_lo, d_hi]``.
    z : float
        Normalizer ``1 - exp(-lambda_r A(d_hi))`` for serving states.
    tail_mass : float
        Discarded tail of the no-serving law.
    """

    side: Side
    state: State
    frame: RegionFrame
    lambda_r: float
    d_lo: float
    d_hi: float
    z: float
    tail_mass: float = 1e-6

    @property
    def step(self) -> int:
        return self.frame.i

    def area(self, d):
        """Admissible area within radius ``d`` (serving states)."""
        fr, side = self.frame, self.side
        if self.state is State.I4:
            return disc_halfplane_area(np.asarray(d, dtype=float), fr.h(side))
        if self.state is State.I2:
            return new_area_within(side, fr, d)
        raise ValueError("area is defined for serving states only")

    def arc_measure(self, d):
        """Length of the admissible arc set on the radius-``d`` circle."""
        _, length = self.arcs(d)
        return length.sum(axis=-1)

    def arcs(self, d):
        """Admissible arcs on the radius-``d`` circle as two (start, length) pieces."""
        d = np.atleast_1d(np.asarray(d, dtype=float))
        fr, side = self.frame, self.side
        if not self.state.serving:
            starts = np.zeros(d.shape + (2,))
            lengths = np.zeros(d.shape + (2,))
            lengths[..., 0] = TWO_PI
            return starts, lengths
        sb, lb = halfplane_arc(d, fr.h(side), fr.psi(side))
        if self.state is State.I4:
            starts = np.stack([sb, np.zeros_like(sb)], axis=-1)
            lengths = np.stack([lb, np.zeros_like(lb)], axis=-1)
            return starts, lengths
        sp, lp = prev_disc_complement_arc(d, fr.D, fr.delta_x)
        return intersect_arcs(sb, lb, sp, lp)


def tail_radius(D: float, lambda_r: float, tail_mass: float) -> float:
    """Radius beyond which the no-serving distance law keeps ``tail_mass``."""
    return math.sqrt(D * D + math.log(1.0 / tail_mass) / (math.pi * lambda_r))


def conditional_spec(side: Side, state: State, frame: RegionFrame, lambda_r: float, tail_mass: float = 1e-6) -> ConditionalPdfSpec:
    """Build the law of ``(d, phi')`` for a (side, state, step).

    Raises
    ------
    UnreachableStateError
        When the state has an empty support or zero normalizer.
    """
    state = State(state)
    D = frame.D
    if lambda_r <= 0:
        raise UnreachableStateError("no IRSs when lambda_r = 0")
    if not state.serving:
        return ConditionalPdfSpec(side, state, frame, lambda_r, D, tail_radius(D, lambda_r, tail_mass), 1.0, tail_mass)
    h = frame.h(side)
    if state is State.I4:
        d_lo = max(0.0, -h)
        area = disc_halfplane_area(D, h)
    else:
        d_lo = max(0.0, -h, D - frame.delta_x)
        area = new_area_within(side, frame, D)
    z = -math.expm1(-lambda_r * area)
    if d_lo >= D or z <= 0.0:
        raise UnreachableStateError(f"{side.value} {state.name} unreachable at step {frame.i}")
    return ConditionalPdfSpec(side, state, frame, lambda_r, d_lo, D, z, tail_mass)


def pdf_distance(spec: ConditionalPdfSpec, d):
    """Density of the user-IRS distance at ``d`` (zero outside the support)."""
    d_arr = np.atleast_1d(np.asarray(d, dtype=float))
    lam = spec.lambda_r
    out = np.zeros_like(d_arr)
    if not spec.state.serving:
        m = d_arr > spec.frame.D
        D = spec.frame.D
        out[m] = 2 * math.pi * lam * d_arr[m] * np.exp(-lam * math.pi * (d_arr[m] ** 2 - D * D))
    else:
        m = (d_arr > spec.d_lo) & (d_arr <= spec.d_hi)
        if m.any():
            dm = d_arr[m]
            out[m] = lam * dm * spec.arc_measure(dm) * np.exp(-lam * np.asarray(spec.area(dm))) / spec.z
    return out if np.ndim(d) else float(out[0])


def pdf_angle(spec: ConditionalPdfSpec, d, phi_prime):
    """Density of the trajectory-to-IRS angle given the distance.

    Uniform over the admissible arcs; zero elsewhere and when the arc set is empty.
    """
    d_arr, ph = np.broadcast_arrays(np.asarray(d, dtype=float), np.asarray(phi_prime, dtype=float))
    starts, lengths = spec.arcs(d_arr.ravel())
    phi = np.mod(ph.ravel(), TWO_PI)[:, None]
    rel = np.mod(phi - starts, TWO_PI)
    inside = ((rel < lengths) & (lengths > 0)).any(axis=1) | (lengths.sum(axis=1) >= TWO_PI)
    tot = lengths.sum(axis=1)
    dens = np.where(inside & (tot > 0), 1.0 / np.where(tot > 0, tot, 1.0), 0.0)
    dens = dens.reshape(d_arr.shape)
    return dens if dens.ndim else float(dens)


@dataclass(frozen=True)
class QuadGrid:
    """Tensor quadrature of a conditional law.

    Row ``r`` carries distance ``d[r]``, probability ``w[r]`` and up to two
    arcs; each arc is sampled at ``n_phi`` midpoints.
    """

    d: np.ndarray
    w: np.ndarray
    arc_s: np.ndarray
    arc_l: np.ndarray
    n_phi: int

    def samples(self):
        """All quadrature nodes as flat arrays ``(d, phi', weight)``."""
        k = (np.arange(self.n_phi) + 0.5) / self.n_phi
        phi = self.arc_s[:, :, None] + self.arc_l[:, :, None] * k
        tot = self.arc_l.sum(axis=1)
        sw = (self.w / tot)[:, None] * (self.arc_l / self.n_phi)
        dd = np.broadcast_to(self.d[:, None, None], phi.shape)
        ww = np.broadcast_to(sw[:, :, None], phi.shape)
        return dd.ravel(), np.mod(phi, TWO_PI).ravel(), ww.ravel()


def _edge_areas(spec: ConditionalPdfSpec, edges: np.ndarray) -> np.ndarray:
    if spec.state is State.I4:
        return disc_halfplane_area(edges, spec.frame.h(spec.side))
    # I2: cumulative four-point Gauss-Legendre of d * arc measure per cell
    a, b = edges[:-1], edges[1:]
    nodes = 0.5 * (b - a)[:, None] * _GL4_X[None, :] + 0.5 * (a + b)[:, None]
    vals = nodes * spec.arc_measure(nodes.ravel()).reshape(nodes.shape)
    cell = 0.5 * (b - a) * (vals * _GL4_W).sum(axis=1)
    return np.concatenate([[0.0], np.cumsum(cell)])


def build_grid(spec: ConditionalPdfSpec, n_d: int = 256, n_phi: int = 512) -> QuadGrid:
    """Midpoint rows with exact cell masses from the distance cdf."""
    lam = spec.lambda_r
    edges = np.linspace(spec.d_lo, spec.d_hi, n_d + 1)
    if spec.state.serving:
        areas = _edge_areas(spec, edges)
        if not areas[-1] > 0:
            # support thinner than the quadrature resolves
            raise UnreachableStateError("admissible area below quadrature resolution")
        surv = np.exp(-lam * areas)
        w = (surv[:-1] - surv[1:]) / -np.expm1(-lam * areas[-1])
    else:
        D = spec.frame.D
        surv = np.exp(-lam * math.pi * (edges**2 - D * D))
        w = (surv[:-1] - surv[1:]) / (1.0 - surv[-1])
    d = 0.5 * (edges[:-1] + edges[1:])
    arc_s, arc_l = spec.arcs(d)
    keep = (arc_l.sum(axis=1) > 0) & (w > 0)
    w = w[keep]
    total = w.sum()
    if total <= 0:
        raise UnreachableStateError("empty quadrature grid")
    return QuadGrid(d[keep], w / total, np.ascontiguousarray(arc_s[keep]), np.ascontiguousarray(arc_l[keep]), n_phi)


def expect_indicator(spec: ConditionalPdfSpec, predicate, n_d: int = 256, n_phi: int = 512, refine: bool = True, tol: float = 5e-4) -> float:
    """Probability that ``predicate(d, phi')`` holds under the conditional law.

    ``predicate`` is called on flat arrays and must return booleans. With
    ``refine`` the half-resolution estimate is compared first and the grid
    doubled once when the two differ by more than ``tol``.
    """

    def run(nd, nphi):
        g = build_grid(spec, nd, nphi)
        d, phi, w = g.samples()
        return float(np.sum(w[np.asarray(predicate(d, phi), dtype=bool)]))

    fine = run(n_d, n_phi)
    if refine and abs(fine - run(max(1, n_d // 2), max(1, n_phi // 2))) > tol:
        fine = run(2 * n_d, 2 * n_phi)
    return fine
