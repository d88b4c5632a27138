# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot dynamic-programming kernels.

Mirrors the semantics of _kernels_py exactly (the parity tests compare the
two backends cell for cell); the interface sweep additionally skips the
dead cells outside the reachable band instead of zeroing full arrays.
"""

from libc.math cimport exp, log, INFINITY

cdef extern from "<math.h>":
    long double logl(long double x) nogil

import numpy as np

from ._pair_driver import pair_ensemble_logz_impl

BACKEND_NAME = "cython"


def interface_span_logz(wa, wb, int side=0):
    """Log partition sums of interface-pinned paths, for every span at once.

    See the pure backend for the full contract; this version only touches
    the band of heights from which the walk can still return to y = 0,
    which keeps the work proportional to the number of reachable states.
    """
    cdef double[::1] va = np.ascontiguousarray(wa, dtype=np.float64)
    cdef double[::1] vb = np.ascontiguousarray(wb, dtype=np.float64)
    cdef int m = va.shape[0]
    if vb.shape[0] != m:
        raise ValueError("weight vectors must have equal length")
    if side not in (-1, 0, 1):
        raise ValueError("side must be -1, 0 or 1")
    out = np.full(m + 1, -np.inf)
    cdef double[::1] vout = out
    if m == 0:
        vout[0] = 0.0
        return out
    wa64 = np.asarray(va)
    wb64 = np.asarray(vb)
    if np.any(wa64 <= 0.0) or np.any(wb64 <= 0.0):
        raise ValueError("step weights must be positive")
    la64 = np.abs(np.log(wa64))
    lb64 = np.abs(np.log(wb64))
    if np.sum(np.maximum(la64, lb64)) + (m + 1) * log(3.0) > 11000.0:
        raise ValueError(
            "weights too strong for the extended-precision range at this size"
        )

    cdef int ymax = m // 2
    cdef int ny = 2 * ymax + 1
    cdef int y0 = ymax
    # extended precision: see the pure backend for why the spread inside a
    # column outruns the float64 exponent range
    dp_arr = np.zeros((3, m + 1, ny), dtype=np.longdouble)
    new_arr = np.zeros((3, m + 1, ny), dtype=np.longdouble)
    cdef long double[:, :, ::1] dp = dp_arr
    cdef long double[:, :, ::1] new = new_arr
    cdef long double[:, :, ::1] tmp
    dp[0, 0, y0] = 1.0

    wh_arr = np.empty(ny, dtype=np.longdouble)
    wd_arr = np.empty(ny, dtype=np.longdouble)
    cdef long double[::1] w_h = wh_arr
    cdef long double[::1] w_d = wd_arr

    cdef long double wA, wB, v
    cdef int i, x, y, b, lo, hi, plo, phi, xprev
    cdef int rlo, rhi, ulo, uhi, dlo, dhi

    plo = y0
    phi = y0 + 1
    for i in range(1, m + 1):
        wA = <long double> va[i - 1]
        wB = <long double> vb[i - 1]
        b = m - i
        if i < b:
            b = i
        lo = y0 - b
        hi = y0 + b + 1
        if side > 0:
            lo = y0
        elif side < 0:
            hi = y0 + 1
        for y in range(lo, hi):
            w_h[y] = wA if y > y0 else wB
            w_d[y] = wA if y >= y0 else wB
        # target rows whose source row sat inside the previous band
        rlo = lo if lo > plo else plo
        rhi = hi if hi < phi else phi
        ulo = lo if lo > plo + 1 else plo + 1
        uhi = hi if hi < phi + 1 else phi + 1
        dlo = lo if lo > plo - 1 else plo - 1
        dhi = hi if hi < phi - 1 else phi - 1
        xprev = i - 1
        for x in range(i + 1):
            if x == 0:
                for y in range(lo, hi):
                    new[0, 0, y] = 0.0
            else:
                for y in range(lo, rlo):
                    new[0, x, y] = 0.0
                for y in range(rlo, rhi):
                    new[0, x, y] = (
                        dp[0, x - 1, y] + dp[1, x - 1, y] + dp[2, x - 1, y]
                    ) * w_h[y]
                for y in range(rhi, hi):
                    new[0, x, y] = 0.0
            if x > xprev:
                for y in range(lo, hi):
                    new[1, x, y] = 0.0
                    new[2, x, y] = 0.0
            else:
                for y in range(lo, ulo):
                    new[1, x, y] = 0.0
                for y in range(ulo, uhi):
                    new[1, x, y] = (dp[0, x, y - 1] + dp[1, x, y - 1]) * w_h[y]
                for y in range(uhi, hi):
                    new[1, x, y] = 0.0
                for y in range(lo, dlo):
                    new[2, x, y] = 0.0
                for y in range(dlo, dhi):
                    new[2, x, y] = (dp[0, x, y + 1] + dp[2, x, y + 1]) * w_d[y]
                for y in range(dhi, hi):
                    new[2, x, y] = 0.0
        tmp = dp
        dp = new
        new = tmp
        plo = lo
        phi = hi

    cdef long double tot
    for x in range(m + 1):
        tot = dp[0, x, y0] + dp[1, x, y0] + dp[2, x, y0]
        if tot > 0.0:
            vout[x] = <double> logl(tot)
    return out


def pair_ensemble_logz(n, L, omega, labels, h_offset, alpha, beta):
    """Exact log partition sum of the block-pair path ensemble.

    Same contract as the pure backend; the per-pair traversal runs in
    compiled code.
    """
    return pair_ensemble_logz_impl(
        _pair_dp, n, L, omega, labels, h_offset, alpha, beta
    )


cdef inline double _logadd(double a, double b):
    if a == -INFINITY:
        return b
    if b == -INFINITY:
        return a
    if a < b:
        a, b = b, a
    return a + log(1.0 + exp(b - a))


def _pair_dp(int n, int L, la_in, lab, w_on_a, w_on_b):
    """One pair-traversal DP driven by a log arrival vector.

    Returns (log weight of paths ending inside this pair,
             log exit vector through the upper corner,
             log exit vector through the lower corner).
    """
    cdef double[::1] la = np.ascontiguousarray(la_in, dtype=np.float64)
    cdef double[::1] wa_vec = np.ascontiguousarray(w_on_a, dtype=np.float64)
    cdef double[::1] wb_vec = np.ascontiguousarray(w_on_b, dtype=np.float64)
    cdef int up_lab = lab[0]
    cdef int lo_lab = lab[1]
    cdef int below_lab = lab[2]

    out_up_arr = np.full(n + 1, -np.inf)
    out_dn_arr = np.full(n + 1, -np.inf)
    cdef double[::1] out_up = out_up_arr
    cdef double[::1] out_dn = out_dn_arr
    cdef double end_log = -INFINITY

    cdef int j0 = -1
    cdef int j, k, x, y, t
    for j in range(n + 1):
        if la[j] > -INFINITY:
            j0 = j
            break
    if j0 < 0 or j0 >= n:
        return end_log, out_up_arr, out_dn_arr

    cdef int ny = 2 * L + 1
    cdef int yc = L
    dp_arr = np.zeros((3, L + 1, ny))
    new_arr = np.zeros((3, L + 1, ny))
    cdef double[:, :, ::1] dp = dp_arr
    cdef double[:, :, ::1] new = new_arr
    cdef double[:, :, ::1] tmp
    cdef double logC = la[j0]

    # block read by a step whose edge arrives at height y - yc
    lab_h_arr = np.empty(ny, dtype=np.intc)
    lab_u_arr = np.empty(ny, dtype=np.intc)
    lab_d_arr = np.empty(ny, dtype=np.intc)
    cdef int[::1] lab_h = lab_h_arr
    cdef int[::1] lab_u = lab_u_arr
    cdef int[::1] lab_d = lab_d_arr
    for y in range(ny):
        if y - yc >= 1:
            lab_h[y] = up_lab
        elif y - yc > -L:
            lab_h[y] = lo_lab
        else:
            lab_h[y] = below_lab
        lab_u[y] = up_lab if y - yc >= 1 else lo_lab
        lab_d[y] = up_lab if y - yc >= 0 else lo_lab

    wh_arr = np.empty(ny)
    wu_arr = np.empty(ny)
    wd_arr = np.empty(ny)
    cdef double[::1] w_h = wh_arr
    cdef double[::1] w_u = wu_arr
    cdef double[::1] w_d = wd_arr

    cdef double wa, wb, w0, v, s, inv, top, bot, mid, fac

    for j in range(j0, n):
        k = j + 1  # monomer consumed by this move
        wa = wa_vec[j]
        wb = wb_vec[j]
        for y in range(ny):
            w_h[y] = wa if lab_h[y] == 0 else wb
            w_u[y] = wa if lab_u[y] == 0 else wb
            w_d[y] = wa if lab_d[y] == 0 else wb
        if la[j] > logC + 600.0:
            # pull the offset up before a large injection would overflow
            fac = exp(logC - la[j])
            for t in range(3):
                for x in range(L + 1):
                    for y in range(ny):
                        dp[t, x, y] *= fac
            logC = la[j]
        for y in range(ny):
            new[0, 0, y] = 0.0
        for x in range(1, L + 1):
            for y in range(ny):
                new[0, x, y] = (
                    dp[0, x - 1, y] + dp[1, x - 1, y] + dp[2, x - 1, y]
                ) * w_h[y]
        for x in range(L + 1):
            new[1, x, 0] = 0.0
            for y in range(1, ny):
                new[1, x, y] = (dp[0, x, y - 1] + dp[1, x, y - 1]) * w_u[y]
            for y in range(ny - 1):
                new[2, x, y] = (dp[0, x, y + 1] + dp[2, x, y + 1]) * w_d[y]
            new[2, x, ny - 1] = 0.0
        if la[j] > -INFINITY:
            # forced step right off the entry corner; its edge runs along
            # the interface of the pair and reads the lower block
            w0 = wa if lo_lab == 0 else wb
            new[0, 1, yc] += exp(la[j] - logC) * w0
        tmp = dp
        dp = new
        new = tmp
        top = dp[0, L, yc + L] + dp[1, L, yc + L] + dp[2, L, yc + L]
        if top > 0.0:
            out_up[k] = log(top) + logC
            dp[0, L, yc + L] = 0.0
            dp[1, L, yc + L] = 0.0
            dp[2, L, yc + L] = 0.0
        bot = dp[0, L, yc - L] + dp[1, L, yc - L] + dp[2, L, yc - L]
        if bot > 0.0:
            out_dn[k] = log(bot) + logC
            dp[0, L, yc - L] = 0.0
            dp[1, L, yc - L] = 0.0
            dp[2, L, yc - L] = 0.0
        mid = dp[0, L, yc] + dp[1, L, yc] + dp[2, L, yc]
        if mid > 0.0:
            if k == n:
                end_log = _logadd(end_log, log(mid) + logC)
            dp[0, L, yc] = 0.0
            dp[1, L, yc] = 0.0
            dp[2, L, yc] = 0.0
        s = 0.0
        for t in range(3):
            for x in range(L + 1):
                for y in range(ny):
                    if dp[t, x, y] > s:
                        s = dp[t, x, y]
        if s > 0.0 and (s > 1e100 or s < 1e-100):
            inv = 1.0 / s
            for t in range(3):
                for x in range(L + 1):
                    for y in range(ny):
                        dp[t, x, y] *= inv
            logC += log(s)

    cdef double tot = 0.0
    for t in range(3):
        for x in range(L + 1):
            for y in range(ny):
                tot += dp[t, x, y]
    if tot > 0.0:
        end_log = _logadd(end_log, log(tot) + logC)
    return end_log, out_up_arr, out_dn_arr
