"""Pure numpy implementations of the hot kernels.

These mirror ``_kernels.pyx`` argument for argument and are used when the
compiled extension is unavailable or disabled.
"""
from __future__ import annotations

import math

import numpy as np

_PI = math.pi
_REL = 1e-12


def _gain(dist2, beta, alpha):
    with np.errstate(divide="ignore"):
        return beta * np.power(dist2, -0.5 * alpha)


def _gamma(gx, gr, gxp, beam, n_el, g_bf):
    with np.errstate(invalid="ignore"):
        if beam:
            val = gx + g_bf * gr * gxp + n_el * (_PI / 4) * np.sqrt(_PI * gx * gr * gxp)
        else:
            val = gx + n_el * gxp * gr
    # an absent IRS (zero hop gain) contributes nothing
    return np.where(gr == 0, gx, val)


def eta_threshold_probs(
    d, w, arc_s, arc_l, n_phi, ux, sx, sy, nx, ny, beam, beta, alpha, n_el, g_bf, thr_ge, thr_gt
):
    """Probability that the neighbor-to-serving gain ratio clears each threshold.

    The ratio is ``Gamma_sc(neighbor) / Gamma_X(serving)`` with ``X`` the
    beamforming gain when ``beam`` is set. The IRS lies at distance ``d[r]``
    from the user at ``(ux, 0)``, with the angle uniform on the arcs of row
    ``r``; ``w[r]`` is the probability mass of the row.

    Returns
    -------
    p_ge, p_gt : ndarray
        ``P(ratio >= thr_ge[k])`` and ``P(ratio > thr_gt[k])``.
    """
    d = np.asarray(d, dtype=float)
    w = np.asarray(w, dtype=float)
    thr_ge = np.asarray(thr_ge, dtype=float)
    thr_gt = np.asarray(thr_gt, dtype=float)
    p_ge = np.zeros(thr_ge.size)
    p_gt = np.zeros(thr_gt.size)
    if d.size == 0:
        return p_ge, p_gt

    xs2 = (ux - sx) ** 2 + sy**2
    xn2 = (ux - nx) ** 2 + ny**2
    xs, xn = math.sqrt(xs2), math.sqrt(xn2)
    gs = beta * xs2 ** (-0.5 * alpha)
    gn = beta * xn2 ** (-0.5 * alpha)
    gr = _gain(d * d, beta, alpha)

    # row-wise bounds from the extreme BS-IRS distances |x - d| and x + d
    gs_hi = _gain((xs - d) ** 2, beta, alpha)
    gs_lo = _gain((xs + d) ** 2, beta, alpha)
    gn_hi = _gain((xn - d) ** 2, beta, alpha)
    gn_lo = _gain((xn + d) ** 2, beta, alpha)
    with np.errstate(divide="ignore", invalid="ignore"):
        r_lo = _gamma(gn, gr, gn_lo, False, n_el, g_bf) / _gamma(gs, gr, gs_hi, beam, n_el, g_bf)
        r_hi = _gamma(gn, gr, gn_hi, False, n_el, g_bf) / _gamma(gs, gr, gs_lo, beam, n_el, g_bf)
    r_lo = np.nan_to_num(r_lo, nan=0.0)
    r_hi = np.nan_to_num(r_hi, nan=np.inf)

    lo = r_lo[:, None]
    hi = r_hi[:, None]
    ge_all = lo >= thr_ge[None, :] * (1 + _REL)
    ge_none = hi < thr_ge[None, :] * (1 - _REL)
    gt_all = lo > thr_gt[None, :] * (1 + _REL)
    gt_none = hi <= thr_gt[None, :] * (1 - _REL)
    amb = ~(ge_all | ge_none).all(axis=1) | ~(gt_all | gt_none).all(axis=1)

    sure = ~amb
    p_ge += (w[sure, None] * ge_all[sure]).sum(axis=0)
    p_gt += (w[sure, None] * gt_all[sure]).sum(axis=0)
    if not amb.any():
        return p_ge, p_gt

    da = d[amb]
    wa = w[amb]
    sa = np.asarray(arc_s, dtype=float)[amb]
    la = np.asarray(arc_l, dtype=float)[amb]
    tot = la.sum(axis=1)
    k = (np.arange(n_phi) + 0.5) / n_phi
    phi = sa[:, :, None] + la[:, :, None] * k[None, None, :]
    sw = (wa / tot)[:, None] * (la / n_phi)  # weight per sample of each piece
    px = ux + da[:, None, None] * np.cos(phi)
    py = da[:, None, None] * np.sin(phi)
    gxs = _gain((px - sx) ** 2 + (py - sy) ** 2, beta, alpha)
    gxn = _gain((px - nx) ** 2 + (py - ny) ** 2, beta, alpha)
    gra = gr[amb][:, None, None]
    ratio = _gamma(gn, gra, gxn, False, n_el, g_bf) / _gamma(gs, gra, gxs, beam, n_el, g_bf)
    wt = np.broadcast_to(sw[:, :, None], ratio.shape).ravel()
    ratio = ratio.ravel()
    order = np.argsort(ratio, kind="stable")
    rs = ratio[order]
    cw = np.concatenate([[0.0], np.cumsum(wt[order])])
    total = cw[-1]
    # mass with ratio >= t is total - mass strictly below t
    p_ge += total - cw[np.searchsorted(rs, thr_ge, side="left")]
    p_gt += total - cw[np.searchsorted(rs, thr_gt, side="right")]
    return p_ge, p_gt


def trial_signals(px, py, label, n_steps, dx, D, sox, soy, stx, sty, beta, alpha, n_el, g_bf):
    """Per-step connection flags and gain ratios of one IRS realization.

    Parameters
    ----------
    px, py : ndarray
        IRS coordinates in the trajectory frame.
    label : ndarray of int8
        0 for IRSs of the original cell, 1 for the target cell, 2 otherwise.
    n_steps : int
        Number of measurement steps (``I + 1``).

    Returns
    -------
    conn_o, conn_t : ndarray of int8, shape (n_steps + 1,)
        Connection flag at steps -1..I.
    r_ho, r_pp : ndarray, shape (n_steps,)
        ``Gamma_sc(target)/Gamma_X(original)`` with the original-cell IRS and
        ``Gamma_sc(original)/Gamma_X(target)`` with the target-cell IRS.
    d_o, a_o, d_t, a_t : ndarray, shape (n_steps,)
        Distance and trajectory angle of the IRS used on each side (``inf``
        and ``nan`` when no IRS exists).
    """
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    label = np.asarray(label)
    xs = (np.arange(n_steps + 1) - 1) * dx
    big = np.inf
    m = px.size
    if m:
        d2 = (px[None, :] - xs[:, None]) ** 2 + py[None, :] ** 2
        within = d2 <= D * D
        idx_o = np.argmin(np.where(within & (label == 0)[None, :], d2, big), axis=1)
        idx_t = np.argmin(np.where(within & (label == 1)[None, :], d2, big), axis=1)
        idx_b = np.argmin(np.where(~within, d2, big), axis=1)
        conn_o = (within & (label == 0)[None, :]).any(axis=1)
        conn_t = (within & (label == 1)[None, :]).any(axis=1)
        has_b = (~within).any(axis=1)
    else:
        idx_o = idx_t = idx_b = np.zeros(n_steps + 1, dtype=int)
        conn_o = conn_t = has_b = np.zeros(n_steps + 1, dtype=bool)
        px = np.zeros(1)
        py = np.zeros(1)

    def pick(conn, idx):
        use = np.where(conn, idx, idx_b[1:])
        present = conn | has_b[1:]
        ix = np.where(present, px[use], 0.0)
        iy = np.where(present, py[use], 0.0)
        return ix, iy, present

    ux = xs[1:]
    out = {}
    for name, conn, idx, (bsx, bsy), (ox, oy) in (
        ("o", conn_o, idx_o, (sox, soy), (stx, sty)),
        ("t", conn_t, idx_t, (stx, sty), (sox, soy)),
    ):
        c = conn[1:]
        ix, iy, present = pick(c, idx[1:])
        dd2 = (ix - ux) ** 2 + iy**2
        gr = np.where(present, _gain(np.where(present, dd2, 1.0), beta, alpha), 0.0)
        g_serv = _gain((ux - bsx) ** 2 + bsy**2, beta, alpha)
        g_nbr = _gain((ux - ox) ** 2 + oy**2, beta, alpha)
        gxs = _gain((ix - bsx) ** 2 + (iy - bsy) ** 2, beta, alpha)
        gxn = _gain((ix - ox) ** 2 + (iy - oy) ** 2, beta, alpha)
        num = _gamma(g_nbr, gr, gxn, False, n_el, g_bf)
        den = np.where(c, _gamma(g_serv, gr, gxs, True, n_el, g_bf), _gamma(g_serv, gr, gxs, False, n_el, g_bf))
        out["r_" + ("ho" if name == "o" else "pp")] = num / den
        out["d_" + name] = np.where(present, np.sqrt(dd2), np.inf)
        out["a_" + name] = np.where(present, np.mod(np.arctan2(iy, ix - ux), 2 * _PI), np.nan)
    return (
        conn_o.astype(np.int8),
        conn_t.astype(np.int8),
        out["r_ho"],
        out["r_pp"],
        out["d_o"],
        out["a_o"],
        out["d_t"],
        out["a_t"],
    )
