# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled per-symbol feedback kernels.

Operation-for-operation identical to the pure-Python reference in
``_ref.py`` (same accumulation order, no fused multiply-add, no BLAS), so
the two backends produce bit-identical output.  Complex arrays are
accessed through float64 component views to keep every update an exact
scalar double operation.  Any change here must be mirrored in ``_ref``.
"""

import numpy as np

from libc.math cimport atan2, cos, fabs, fmod, sin

BACKEND_NAME = "cython"


cdef inline double _cubic(double xm1, double x0, double x1, double x2,
                          double mu) nogil:
    return (-xm1 * mu * (mu - 1.0) * (mu - 2.0) / 6.0
            + x0 * (mu * mu - 1.0) * (mu - 2.0) / 2.0
            - x1 * mu * (mu + 1.0) * (mu - 2.0) / 2.0
            + x2 * mu * (mu * mu - 1.0) / 6.0)


def cra_loop(lane, double kp, double ki, double step=1.0):
    """Gardner clock-recovery loop over one real lane.

    See the reference implementation for the full contract.
    """
    cdef double[::1] ln = np.ascontiguousarray(np.asarray(lane, dtype=np.float64))
    cdef Py_ssize_t n = ln.shape[0]
    cdef Py_ssize_t n_half = <Py_ssize_t>(n / step)
    out_arr = np.empty(n_half + 1, dtype=np.float64)
    mu_arr = np.empty(n_half // 2 + 1, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double[::1] mu_hist = mu_arr
    cdef double t = step
    cdef double integ = 0.0
    cdef double v = 0.0
    cdef double prev_strobe = 0.0
    cdef double mid = 0.0
    cdef Py_ssize_t n_out = 0
    cdef Py_ssize_t n_sym = 0
    cdef int parity = 0
    cdef Py_ssize_t m
    cdef double mu, u, e
    while True:
        m = <Py_ssize_t>t
        mu = t - m
        if m < 1 or m + 2 >= n:
            break
        u = _cubic(ln[m - 1], ln[m], ln[m + 1], ln[m + 2], mu)
        out[n_out] = u
        n_out += 1
        if parity == 0:
            mid = u
            parity = 1
        else:
            e = (u - prev_strobe) * mid
            integ += ki * e
            v = kp * e + integ
            prev_strobe = u
            mu_hist[n_sym] = fmod(t / step, 1.0)
            n_sym += 1
            parity = 0
        t += step * (1.0 - v)
    return out_arr[:n_out], mu_arr[:n_sym]


cdef inline Py_ssize_t _level_index(double[::1] edges, double v):
    cdef Py_ssize_t i = 0
    cdef Py_ssize_t m = edges.shape[0]
    while i < m and edges[i] < v:
        i += 1
    return i


def cv_mimo_run(x, y, taps, double mu, int mode, double r2,
                double[::1] radii2, Py_ssize_t n_sym, double[::1] err_x,
                double[::1] err_y, out_x, out_y, double[::1] energy,
                Py_ssize_t start=0):
    """Complex 2x2 butterfly segment; see the reference implementation."""
    cdef Py_ssize_t t = taps.shape[2]
    cdef Py_ssize_t n_radii = radii2.shape[0]
    # float64 component views of the complex buffers: [..., 2k] is the real
    # part, [..., 2k+1] the imaginary part
    cdef double[::1] xv_ = x.view(np.float64)
    cdef double[::1] yv_ = y.view(np.float64)
    cdef double[:, :, ::1] tp = taps.view(np.float64)
    cdef double[::1] oxv = out_x.view(np.float64)
    cdef double[::1] oyv = out_y.view(np.float64)
    cdef Py_ssize_t n, base, k, i, j, best, idx
    cdef double axr, axi, bxr, bxi, ayr, ayi, byr, byi
    cdef double oxr, oxi, oyr, oyi, px, py, ex, ey, sx, sy
    cdef double gxr, gxi, gyr, gyi, bd, d, en
    cdef double xvr, xvi, yvr, yvi, hr, hi
    for n in range(start, start + n_sym):
        base = 2 * n
        axr = 0.0
        axi = 0.0
        bxr = 0.0
        bxi = 0.0
        ayr = 0.0
        ayi = 0.0
        byr = 0.0
        byi = 0.0
        for k in range(t):
            idx = 2 * (base + t - 1 - k)
            xvr = xv_[idx]
            xvi = xv_[idx + 1]
            yvr = yv_[idx]
            yvi = yv_[idx + 1]
            hr = tp[0, 0, 2 * k]
            hi = tp[0, 0, 2 * k + 1]
            axr += hr * xvr - hi * xvi
            axi += hr * xvi + hi * xvr
            hr = tp[0, 1, 2 * k]
            hi = tp[0, 1, 2 * k + 1]
            bxr += hr * yvr - hi * yvi
            bxi += hr * yvi + hi * yvr
            hr = tp[1, 0, 2 * k]
            hi = tp[1, 0, 2 * k + 1]
            ayr += hr * xvr - hi * xvi
            ayi += hr * xvi + hi * xvr
            hr = tp[1, 1, 2 * k]
            hi = tp[1, 1, 2 * k + 1]
            byr += hr * yvr - hi * yvi
            byi += hr * yvi + hi * yvr
        oxr = axr + bxr
        oxi = axi + bxi
        oyr = ayr + byr
        oyi = ayi + byi
        px = oxr * oxr + oxi * oxi
        py = oyr * oyr + oyi * oyi
        if mode == 0:
            ex = r2 - px
            ey = r2 - py
        else:
            best = 0
            bd = fabs(radii2[0] - px)
            for i in range(1, n_radii):
                d = fabs(radii2[i] - px)
                if d < bd:
                    best = i
                    bd = d
            ex = radii2[best] - px
            best = 0
            bd = fabs(radii2[0] - py)
            for i in range(1, n_radii):
                d = fabs(radii2[i] - py)
                if d < bd:
                    best = i
                    bd = d
            ey = radii2[best] - py
        sx = mu * ex
        sy = mu * ey
        gxr = sx * oxr
        gxi = sx * oxi
        gyr = sy * oyr
        gyi = sy * oyi
        for k in range(t):
            idx = 2 * (base + t - 1 - k)
            xvr = xv_[idx]
            xvi = xv_[idx + 1]
            yvr = yv_[idx]
            yvi = yv_[idx + 1]
            # gradient times conjugated window sample
            tp[0, 0, 2 * k] += gxr * xvr + gxi * xvi
            tp[0, 0, 2 * k + 1] += gxi * xvr - gxr * xvi
            tp[0, 1, 2 * k] += gxr * yvr + gxi * yvi
            tp[0, 1, 2 * k + 1] += gxi * yvr - gxr * yvi
            tp[1, 0, 2 * k] += gyr * xvr + gyi * xvi
            tp[1, 0, 2 * k + 1] += gyi * xvr - gyr * xvi
            tp[1, 1, 2 * k] += gyr * yvr + gyi * yvi
            tp[1, 1, 2 * k + 1] += gyi * yvr - gyr * yvi
        oxv[2 * n] = oxr
        oxv[2 * n + 1] = oxi
        oyv[2 * n] = oyr
        oyv[2 * n + 1] = oyi
        err_x[n] = ex
        err_y[n] = ey
        if (n + 1) % 1024 == 0:
            en = 0.0
            for i in range(2):
                for j in range(2):
                    for k in range(t):
                        hr = tp[i, j, 2 * k]
                        hi = tp[i, j, 2 * k + 1]
                        en += hr * hr + hi * hi
            energy[(n + 1) // 1024 - 1] = en
            if en > 1e3:
                return n
    return -1


def ddlms_2x2_run(double[::1] i_in, double[::1] q_in, double[:, :, ::1] w,
                  double mu, double[::1] edges, double[::1] levels,
                  Py_ssize_t n_sym, out, err):
    """Real 2x2 decision-directed LMS; see the reference implementation."""
    cdef Py_ssize_t t = w.shape[2]
    cdef double[::1] ov = out.view(np.float64)
    cdef double[::1] ev = err.view(np.float64)
    cdef Py_ssize_t n, k, i, j
    cdef double yi_a, yi_b, yq_a, yq_b, yi, yq, di, dq, ei, eq, si, sq
    cdef double iv, qv, wv, en
    for n in range(n_sym):
        yi_a = 0.0
        yi_b = 0.0
        yq_a = 0.0
        yq_b = 0.0
        for k in range(t):
            iv = i_in[n + t - 1 - k]
            qv = q_in[n + t - 1 - k]
            yi_a += w[0, 0, k] * iv
            yi_b += w[0, 1, k] * qv
            yq_a += w[1, 0, k] * iv
            yq_b += w[1, 1, k] * qv
        yi = yi_a + yi_b
        yq = yq_a + yq_b
        di = levels[_level_index(edges, yi)]
        dq = levels[_level_index(edges, yq)]
        ei = di - yi
        eq = dq - yq
        si = mu * ei
        sq = mu * eq
        for k in range(t):
            iv = i_in[n + t - 1 - k]
            qv = q_in[n + t - 1 - k]
            w[0, 0, k] += si * iv
            w[0, 1, k] += si * qv
            w[1, 0, k] += sq * iv
            w[1, 1, k] += sq * qv
        ov[2 * n] = yi
        ov[2 * n + 1] = yq
        ev[2 * n] = ei
        ev[2 * n + 1] = eq
        if (n + 1) % 1024 == 0:
            en = 0.0
            for i in range(2):
                for j in range(2):
                    for k in range(t):
                        wv = w[i, j, k]
                        en += wv * wv
            if en > 1e3:
                return n
    return -1


def mimo4x4_run(lanes, double[:, :, ::1] w, double mu, int mode, double r2,
                double[::1] edges, double[::1] levels, double pll_gain,
                double[::1] phases, Py_ssize_t n_sym, out_x, out_y,
                Py_ssize_t start=0):
    """Real 4x4 rail butterfly; see the reference implementation."""
    cdef double[:, ::1] ln = np.ascontiguousarray(
        np.asarray(lanes, dtype=np.float64))
    cdef double[::1] oxv = out_x.view(np.float64)
    cdef double[::1] oyv = out_y.view(np.float64)
    cdef Py_ssize_t t = w.shape[2]
    cdef Py_ssize_t n, base, i, j, k
    cdef double acc, ex, ey, s, en, wv
    cdef double cpx, spx, cpy, spy, xrr, xri, yrr, yri
    cdef double dxr, dxi, dyr, dyi, exr, exi, eyr, eyi
    cdef double o[4]
    cdef double rail_err[4]
    for n in range(start, start + n_sym):
        base = 2 * n
        for i in range(4):
            acc = 0.0
            for j in range(4):
                for k in range(t):
                    acc += w[i, j, k] * ln[j, base + t - 1 - k]
            o[i] = acc
        if mode == 0:
            ex = r2 - (o[0] * o[0] + o[1] * o[1])
            ey = r2 - (o[2] * o[2] + o[3] * o[3])
            rail_err[0] = ex * o[0]
            rail_err[1] = ex * o[1]
            rail_err[2] = ey * o[2]
            rail_err[3] = ey * o[3]
        else:
            cpx = cos(phases[0])
            spx = sin(phases[0])
            cpy = cos(phases[1])
            spy = sin(phases[1])
            # counter-rotate output by the tracked phase before slicing
            xrr = o[0] * cpx + o[1] * spx
            xri = o[1] * cpx - o[0] * spx
            yrr = o[2] * cpy + o[3] * spy
            yri = o[3] * cpy - o[2] * spy
            dxr = levels[_level_index(edges, xrr)]
            dxi = levels[_level_index(edges, xri)]
            dyr = levels[_level_index(edges, yrr)]
            dyi = levels[_level_index(edges, yri)]
            exr = dxr - xrr
            exi = dxi - xri
            eyr = dyr - yrr
            eyi = dyi - yri
            # rotate the error back into the unrecovered output frame
            rail_err[0] = exr * cpx - exi * spx
            rail_err[1] = exr * spx + exi * cpx
            rail_err[2] = eyr * cpy - eyi * spy
            rail_err[3] = eyr * spy + eyi * cpy
            phases[0] += pll_gain * atan2(xri * dxr - xrr * dxi,
                                          xrr * dxr + xri * dxi)
            phases[1] += pll_gain * atan2(yri * dyr - yrr * dyi,
                                          yrr * dyr + yri * dyi)
        for i in range(4):
            s = mu * rail_err[i]
            for j in range(4):
                for k in range(t):
                    w[i, j, k] += s * ln[j, base + t - 1 - k]
        oxv[2 * n] = o[0]
        oxv[2 * n + 1] = o[1]
        oyv[2 * n] = o[2]
        oyv[2 * n + 1] = o[3]
        if (n + 1) % 1024 == 0:
            en = 0.0
            for i in range(4):
                for j in range(4):
                    for k in range(t):
                        wv = w[i, j, k]
                        en += wv * wv
            if en > 1e3:
                return n
    return -1
