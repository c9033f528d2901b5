"""Pure-Python reference implementations of the per-symbol feedback kernels.

These are the fallback when the compiled extension is unavailable and the
ground truth the compiled kernels are tested against.  Every inner product
and energy sum is written as an explicit sequential loop (no BLAS) so the
compiled twins can reproduce the arithmetic operation-for-operation; the
two backends agree bit-for-bit, not just within tolerance.
"""

import math

import numpy as np

BACKEND_NAME = "python"


def _cubic(xm1, x0, x1, x2, mu):
    """4-point cubic Lagrange interpolation at fraction mu past x0."""
    return (-xm1 * mu * (mu - 1.0) * (mu - 2.0) / 6.0
            + x0 * (mu * mu - 1.0) * (mu - 2.0) / 2.0
            - x1 * mu * (mu + 1.0) * (mu - 2.0) / 2.0
            + x2 * mu * (mu * mu - 1.0) / 6.0)


def cra_loop(lane, kp, ki, step=1.0):
    """Gardner clock-recovery loop over one real lane.

    ``step`` is the number of input samples per half-symbol (1.0 when the
    lane is at 2 samples/symbol, 2.0 when it was oversampled 2x for
    interpolator headroom).  Interpolants alternate mid/strobe; the loop
    updates once per symbol at the strobes.  Returns (interpolants,
    mu-per-strobe) with mu in half-symbol units in [0, 1).

    The detector slope is negative versus signal delay, so the NCO steps
    against the accumulated error to move strobes toward the symbols.
    """
    lane = np.asarray(lane, dtype=np.float64)
    n = len(lane)
    n_half = int(n / step)
    out = np.empty(n_half + 1, dtype=np.float64)
    mu_hist = np.empty(n_half // 2 + 1, dtype=np.float64)
    t = step
    integ = 0.0
    v = 0.0
    prev_strobe = 0.0
    mid = 0.0
    n_out = 0
    n_sym = 0
    parity = 0
    while True:
        m = int(t)
        mu = t - m
        if m < 1 or m + 2 >= n:
            break
        u = _cubic(lane[m - 1], lane[m], lane[m + 1], lane[m + 2], mu)
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
            mu_hist[n_sym] = (t / step) % 1.0
            n_sym += 1
            parity = 0
        t += step * (1.0 - v)
    return out[:n_out], mu_hist[:n_sym]


def _level_index(edges, v):
    # np.searchsorted(edges, v) semantics: count of edges strictly below v
    i = 0
    m = len(edges)
    while i < m and edges[i] < v:
        i += 1
    return i


def cv_mimo_run(x, y, taps, mu, mode, r2, radii2, n_sym, err_x, err_y,
                out_x, out_y, energy, start=0):
    """Complex 2x2 butterfly segment at 2 samples/symbol, 1 output per symbol.

    ``taps`` is a (2, 2, T) complex array updated in place; ``mode`` 0 is
    constant-modulus, 1 is radius-directed.  Divergence is checked every
    1024 symbols against tap energy 1e3; returns the symbol index at which
    it tripped, or -1.
    """
    t = taps.shape[2]
    n_radii = len(radii2)
    for n in range(start, start + n_sym):
        base = 2 * n
        # window is reversed: coefficient k multiplies sample base + t-1-k
        axr = 0.0
        axi = 0.0
        bxr = 0.0
        bxi = 0.0
        ayr = 0.0
        ayi = 0.0
        byr = 0.0
        byi = 0.0
        for k in range(t):
            xv = x[base + t - 1 - k]
            yv = y[base + t - 1 - k]
            xvr = xv.real
            xvi = xv.imag
            yvr = yv.real
            yvi = yv.imag
            h = taps[0, 0, k]
            axr += h.real * xvr - h.imag * xvi
            axi += h.real * xvi + h.imag * xvr
            h = taps[0, 1, k]
            bxr += h.real * yvr - h.imag * yvi
            bxi += h.real * yvi + h.imag * yvr
            h = taps[1, 0, k]
            ayr += h.real * xvr - h.imag * xvi
            ayi += h.real * xvi + h.imag * xvr
            h = taps[1, 1, k]
            byr += h.real * yvr - h.imag * yvi
            byi += h.real * yvi + h.imag * yvr
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
            bd = abs(radii2[0] - px)
            for i in range(1, n_radii):
                d = abs(radii2[i] - px)
                if d < bd:
                    best = i
                    bd = d
            ex = radii2[best] - px
            best = 0
            bd = abs(radii2[0] - py)
            for i in range(1, n_radii):
                d = abs(radii2[i] - py)
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
            xv = x[base + t - 1 - k]
            yv = y[base + t - 1 - k]
            xvr = xv.real
            xvi = xv.imag
            yvr = yv.real
            yvi = yv.imag
            # gradient times conjugated window sample
            taps[0, 0, k] += complex(gxr * xvr + gxi * xvi, gxi * xvr - gxr * xvi)
            taps[0, 1, k] += complex(gxr * yvr + gxi * yvi, gxi * yvr - gxr * yvi)
            taps[1, 0, k] += complex(gyr * xvr + gyi * xvi, gyi * xvr - gyr * xvi)
            taps[1, 1, k] += complex(gyr * yvr + gyi * yvi, gyi * yvr - gyr * yvi)
        out_x[n] = complex(oxr, oxi)
        out_y[n] = complex(oyr, oyi)
        err_x[n] = ex
        err_y[n] = ey
        if (n + 1) % 1024 == 0:
            en = 0.0
            for i in range(2):
                for j in range(2):
                    for k in range(t):
                        h = taps[i, j, k]
                        en += h.real * h.real + h.imag * h.imag
            energy[(n + 1) // 1024 - 1] = en
            if en > 1e3:
                return n
    return -1


def ddlms_2x2_run(i_in, q_in, w, mu, edges, levels, n_sym, out, err):
    """Per-polarization real 2x2 decision-directed LMS at 1 sample/symbol.

    ``w`` is a (2, 2, T) real array (II, IQ / QI, QQ banks) updated in
    place.  Returns the divergence symbol index or -1.
    """
    t = w.shape[2]
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
        out[n] = complex(yi, yq)
        err[n] = complex(ei, eq)
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


def mimo4x4_run(lanes, w, mu, mode, r2, edges, levels, pll_gain, phases,
                n_sym, out_x, out_y, start=0):
    """Real-valued 4x4 butterfly over (XI, XQ, YI, YQ) at 2 samples/symbol.

    ``w`` is (4, 4, T) real, updated in place.  ``mode`` 0 runs per-pol
    constant-modulus updates; mode 1 runs decision-directed updates with a
    first-order decision phase tracker per polarization (``phases``, length
    2, updated in place).  Returns divergence index or -1.
    """
    t = w.shape[2]
    o = [0.0, 0.0, 0.0, 0.0]
    rail_err = [0.0, 0.0, 0.0, 0.0]
    for n in range(start, start + n_sym):
        base = 2 * n
        for i in range(4):
            acc = 0.0
            for j in range(4):
                for k in range(t):
                    acc += w[i, j, k] * lanes[j][base + t - 1 - k]
            o[i] = acc
        if mode == 0:
            ex = r2 - (o[0] * o[0] + o[1] * o[1])
            ey = r2 - (o[2] * o[2] + o[3] * o[3])
            rail_err[0] = ex * o[0]
            rail_err[1] = ex * o[1]
            rail_err[2] = ey * o[2]
            rail_err[3] = ey * o[3]
        else:
            cpx = math.cos(phases[0])
            spx = math.sin(phases[0])
            cpy = math.cos(phases[1])
            spy = math.sin(phases[1])
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
            phases[0] += pll_gain * math.atan2(xri * dxr - xrr * dxi,
                                               xrr * dxr + xri * dxi)
            phases[1] += pll_gain * math.atan2(yri * dyr - yrr * dyi,
                                               yrr * dyr + yri * dyi)
        for i in range(4):
            s = mu * rail_err[i]
            for j in range(4):
                for k in range(t):
                    w[i, j, k] += s * lanes[j][base + t - 1 - k]
        out_x[n] = complex(o[0], o[1])
        out_y[n] = complex(o[2], o[3])
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
