# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; see ``_fallback.py`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow, cos, sin, fabs, atan2, fmod, INFINITY, NAN, M_PI

cnp.import_array()

cdef double _REL = 1e-12


cdef inline double _gain(double dist2, double beta, double alpha) nogil:
    if dist2 <= 0.0:
        return INFINITY
    return beta * pow(dist2, -0.5 * alpha)


cdef inline double _gamma(double gx, double gr, double gxp, bint beam, double n_el, double g_bf) nogil:
    if gr == 0.0:
        return gx
    if beam:
        return gx + g_bf * gr * gxp + n_el * (M_PI / 4.0) * sqrt(M_PI * gx * gr * gxp)
    return gx + n_el * gxp * gr


def eta_threshold_probs(
    double[::1] d, double[::1] w, double[:, ::1] arc_s, double[:, ::1] arc_l, int n_phi,
    double ux, double sx, double sy, double nx, double ny, bint beam,
    double beta, double alpha, double n_el, double g_bf,
    double[::1] thr_ge, double[::1] thr_gt,
):
    cdef Py_ssize_t nr = d.shape[0], kge = thr_ge.shape[0], kgt = thr_gt.shape[0]
    cdef Py_ssize_t npc = arc_s.shape[1]
    p_ge_arr = np.zeros(kge)
    p_gt_arr = np.zeros(kgt)
    cdef double[::1] p_ge = p_ge_arr
    cdef double[::1] p_gt = p_gt_arr
    cdef double xs2 = (ux - sx) * (ux - sx) + sy * sy
    cdef double xn2 = (ux - nx) * (ux - nx) + ny * ny
    cdef double xs = sqrt(xs2), xn = sqrt(xn2)
    cdef double gs = beta * pow(xs2, -0.5 * alpha)
    cdef double gn = beta * pow(xn2, -0.5 * alpha)
    cdef Py_ssize_t r, a, k, q
    cdef double dr, gr, r_lo, r_hi, num, den, t, tot, sw, phi, px, py, ratio
    cdef bint amb
    with nogil:
        for r in range(nr):
            dr = d[r]
            gr = _gain(dr * dr, beta, alpha)
            num = _gamma(gn, gr, _gain((xn + dr) * (xn + dr), beta, alpha), False, n_el, g_bf)
            den = _gamma(gs, gr, _gain((xs - dr) * (xs - dr), beta, alpha), beam, n_el, g_bf)
            r_lo = num / den if den < INFINITY else 0.0
            num = _gamma(gn, gr, _gain((xn - dr) * (xn - dr), beta, alpha), False, n_el, g_bf)
            den = _gamma(gs, gr, _gain((xs + dr) * (xs + dr), beta, alpha), beam, n_el, g_bf)
            r_hi = num / den if num < INFINITY else INFINITY
            amb = False
            for k in range(kge):
                t = thr_ge[k]
                if not (r_lo >= t * (1 + _REL) or r_hi < t * (1 - _REL)):
                    amb = True
            for k in range(kgt):
                t = thr_gt[k]
                if not (r_lo > t * (1 + _REL) or r_hi <= t * (1 - _REL)):
                    amb = True
            if not amb:
                for k in range(kge):
                    if r_lo >= thr_ge[k] * (1 + _REL):
                        p_ge[k] += w[r]
                for k in range(kgt):
                    if r_lo > thr_gt[k] * (1 + _REL):
                        p_gt[k] += w[r]
                continue
            tot = 0.0
            for a in range(npc):
                tot += arc_l[r, a]
            if tot <= 0.0:
                continue
            for a in range(npc):
                if arc_l[r, a] <= 0.0:
                    continue
                sw = w[r] * arc_l[r, a] / n_phi / tot
                for q in range(n_phi):
                    phi = arc_s[r, a] + arc_l[r, a] * (q + 0.5) / n_phi
                    px = ux + dr * cos(phi)
                    py = dr * sin(phi)
                    num = _gamma(gn, gr, _gain((px - nx) * (px - nx) + (py - ny) * (py - ny), beta, alpha), False, n_el, g_bf)
                    den = _gamma(gs, gr, _gain((px - sx) * (px - sx) + (py - sy) * (py - sy), beta, alpha), beam, n_el, g_bf)
                    ratio = num / den
                    for k in range(kge):
                        if ratio >= thr_ge[k]:
                            p_ge[k] += sw
                    for k in range(kgt):
                        if ratio > thr_gt[k]:
                            p_gt[k] += sw
    return p_ge_arr, p_gt_arr


def trial_signals(
    double[::1] px, double[::1] py, signed char[::1] label, int n_steps, double dx, double D,
    double sox, double soy, double stx, double sty,
    double beta, double alpha, double n_el, double g_bf,
):
    cdef Py_ssize_t m = px.shape[0], s, j
    conn_o_arr = np.zeros(n_steps + 1, dtype=np.int8)
    conn_t_arr = np.zeros(n_steps + 1, dtype=np.int8)
    r_ho_arr = np.empty(n_steps)
    r_pp_arr = np.empty(n_steps)
    d_o_arr = np.empty(n_steps)
    a_o_arr = np.empty(n_steps)
    d_t_arr = np.empty(n_steps)
    a_t_arr = np.empty(n_steps)
    cdef signed char[::1] conn_o = conn_o_arr
    cdef signed char[::1] conn_t = conn_t_arr
    cdef double[::1] r_ho = r_ho_arr
    cdef double[::1] r_pp = r_pp_arr
    cdef double[::1] d_o = d_o_arr
    cdef double[::1] a_o = a_o_arr
    cdef double[::1] d_t = d_t_arr
    cdef double[::1] a_t = a_t_arr
    cdef double D2 = D * D, ux, ddx, d2, bo, bt, bb
    cdef Py_ssize_t io, it, ib
    cdef double ix, iy, gr, num, den
    cdef int side
    cdef bint conn
    cdef double bsx, bsy, ox, oy
    with nogil:
        for s in range(n_steps + 1):
            ux = (s - 1) * dx
            bo = INFINITY
            bt = INFINITY
            bb = INFINITY
            io = -1
            it = -1
            ib = -1
            for j in range(m):
                ddx = px[j] - ux
                d2 = ddx * ddx + py[j] * py[j]
                if d2 <= D2:
                    if label[j] == 0 and d2 < bo:
                        bo = d2
                        io = j
                    elif label[j] == 1 and d2 < bt:
                        bt = d2
                        it = j
                elif d2 < bb:
                    bb = d2
                    ib = j
            conn_o[s] = io >= 0
            conn_t[s] = it >= 0
            if s == 0:
                continue
            for side in range(2):
                if side == 0:
                    conn = io >= 0
                    j = io if conn else ib
                    bsx = sox; bsy = soy; ox = stx; oy = sty
                else:
                    conn = it >= 0
                    j = it if conn else ib
                    bsx = stx; bsy = sty; ox = sox; oy = soy
                if j >= 0:
                    ix = px[j]
                    iy = py[j]
                    d2 = (ix - ux) * (ix - ux) + iy * iy
                    gr = _gain(d2, beta, alpha)
                else:
                    ix = 0.0
                    iy = 0.0
                    d2 = INFINITY
                    gr = 0.0
                num = _gamma(_gain((ux - ox) * (ux - ox) + oy * oy, beta, alpha), gr,
                             _gain((ix - ox) * (ix - ox) + (iy - oy) * (iy - oy), beta, alpha), False, n_el, g_bf)
                den = _gamma(_gain((ux - bsx) * (ux - bsx) + bsy * bsy, beta, alpha), gr,
                             _gain((ix - bsx) * (ix - bsx) + (iy - bsy) * (iy - bsy), beta, alpha), conn, n_el, g_bf)
                if side == 0:
                    r_ho[s - 1] = num / den
                    d_o[s - 1] = sqrt(d2)
                    a_o[s - 1] = fmod(atan2(iy, ix - ux) + 2 * M_PI, 2 * M_PI) if j >= 0 else NAN
                else:
                    r_pp[s - 1] = num / den
                    d_t[s - 1] = sqrt(d2)
                    a_t[s - 1] = fmod(atan2(iy, ix - ux) + 2 * M_PI, 2 * M_PI) if j >= 0 else NAN
    return conn_o_arr, conn_t_arr, r_ho_arr, r_pp_arr, d_o_arr, a_o_arr, d_t_arr, a_t_arr
