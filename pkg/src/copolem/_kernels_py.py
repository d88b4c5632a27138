"""Pure NumPy reference implementations of the hot dynamic programs.

These mirror the compiled versions in ``_kernels_cy`` and are picked up
automatically when the extension is missing (or when COPOLEM_KERNELS=python
is set).  The counting kernel works with arbitrary-precision integers; the
interface kernel accumulates in extended precision to cover its dynamic
range, and the pair kernel rescales behind a running log offset.

Directed paths take steps RIGHT/UP/DOWN and are self-avoiding, which for
this step set just means an UP step never follows a DOWN step or vice
versa.  Every kernel below enforces that through a 3-slot "last step" axis
(order: RIGHT, UP, DOWN).
"""

from __future__ import annotations

import math

import numpy as np

from ._pair_driver import pair_ensemble_logz_impl

BACKEND_NAME = "python"

_R, _U, _D = 0, 1, 2


def crossing_counts(width: int, height: int, m_max: int) -> list:
    """Exact path counts into the far corner of a box, per step count.

    Returns a list c with c[m] = number of m-step directed self-avoiding
    paths from (0,0) to (width,height) that stay inside
    [0,width] x [0,height].  Counts are exact Python integers.
    """
    if width < 0 or height < 0 or m_max < 0:
        raise ValueError("width, height and m_max must be non-negative")
    W, H = width, height
    dp = np.zeros((3, W + 1, H + 1), dtype=object)
    # a virtual RIGHT before the first step leaves every move available
    dp[_R, 0, 0] = 1
    out = [0] * (m_max + 1)
    if W == 0 and H == 0:
        out[0] = 1
    for m in range(1, m_max + 1):
        new = np.zeros_like(dp)
        new[_R, 1:, :] = dp[_R, :-1, :] + dp[_U, :-1, :] + dp[_D, :-1, :]
        new[_U, :, 1:] = dp[_R, :, :-1] + dp[_U, :, :-1]
        new[_D, :, :-1] = dp[_R, :, 1:] + dp[_D, :, 1:]
        dp = new
        out[m] = int(dp[_R, W, H] + dp[_U, W, H] + dp[_D, W, H])
    return out


def interface_span_logz(wa: np.ndarray, wb: np.ndarray, side: int = 0) -> np.ndarray:
    """Log partition sums of interface-pinned paths, for every span at once.

    The walk starts at (0,0) and must end on the interface (y = 0) after
    m = len(wa) steps; entry s of the returned array is log Z for walks
    ending at (s, 0), with -inf where the endpoint is unreachable.  Step i
    contributes a factor wa[i] when its edge lies on the A side (height
    above the interface: y >= 1 for horizontal and upward edges arriving
    at y, lower endpoint >= 0 for downward edges) and wb[i] otherwise.

    side=+1 confines the walk to y >= 0, side=-1 to y <= 0 (horizontal
    edges on y = 0 still count as B side either way); side=0 is free.

    The sums accumulate in extended precision (80-bit long double) rather
    than in rescaled float64.  Under lopsided weights the entries of a
    single column spread apart linearly in m (a walk that climbs early and
    rides the favourable side versus the all-horizontal walk), far beyond
    the float64 exponent range, so any scheme with one scale per column
    silently flushes valid low-mass spans.  The extended exponent range
    (about 11000 nats) covers every weight regime evaluated here; a guard
    raises if the worst case could exceed it.
    """
    wa = np.asarray(wa, dtype=float)
    wb = np.asarray(wb, dtype=float)
    m = wa.shape[0]
    if wb.shape[0] != m:
        raise ValueError("weight vectors must have equal length")
    if side not in (-1, 0, 1):
        raise ValueError("side must be -1, 0 or 1")
    if m == 0:
        out = np.full(1, -np.inf)
        out[0] = 0.0
        return out
    if np.any(wa <= 0.0) or np.any(wb <= 0.0):
        raise ValueError("step weights must be positive")
    la, lb = np.abs(np.log(wa)), np.abs(np.log(wb))
    if np.sum(np.maximum(la, lb)) + (m + 1) * math.log(3.0) > 11000.0:
        raise ValueError(
            "weights too strong for the extended-precision range at this size"
        )
    ymax = m // 2
    ny = 2 * ymax + 1
    y0 = ymax  # index of y == 0
    dp = np.zeros((3, m + 1, ny), dtype=np.longdouble)
    new = np.zeros_like(dp)
    dp[_R, 0, y0] = 1.0
    ys = np.arange(-ymax, ymax + 1)
    a_h = ys >= 1   # horizontal edge at y / UP edge arriving at y
    a_d = ys >= 0   # DOWN edge arriving at y
    one = np.longdouble(1)
    for i in range(1, m + 1):
        wA, wB = wa[i - 1] * one, wb[i - 1] * one
        w_h = np.where(a_h, wA, wB)
        w_d = np.where(a_d, wA, wB)
        new.fill(0.0)
        new[_R, 1:, :] = (dp[_R, :-1, :] + dp[_U, :-1, :] + dp[_D, :-1, :]) * w_h
        new[_U, :, 1:] = (dp[_R, :, :-1] + dp[_U, :, :-1]) * w_h[1:]
        new[_D, :, :-1] = (dp[_R, :, 1:] + dp[_D, :, 1:]) * w_d[:-1]
        # drop heights the walk cannot return to the interface from
        b = min(i, m - i)
        lo, hi = y0 - b, y0 + b + 1
        if side > 0:
            lo = y0
        elif side < 0:
            hi = y0 + 1
        if lo > 0:
            new[:, :, :lo] = 0.0
        if hi < ny:
            new[:, :, hi:] = 0.0
        dp, new = new, dp
    tot = dp[_R, :, y0] + dp[_U, :, y0] + dp[_D, :, y0]
    out = np.full(m + 1, -np.inf)
    pos = tot > 0.0
    out[pos] = np.log(tot[pos]).astype(float)
    return out


def lpp_max_crossed(is_a: np.ndarray, length: int) -> int:
    """Best count of A-blocks crossed by a diagonal coarse path.

    The coarse walk starts at corner height 0 and takes `length` steps,
    each moving one column right and one unit up or down; an up step from
    height j crosses block (t, j), a down step from height j crosses block
    (t, j-1).  is_a[t, j + off] with off = length + 1 flags A-blocks, so
    is_a needs at least 2*length + 2 rows.
    """
    off = length + 1
    neg = -(10**9)
    v = np.full(2 * length + 1, neg, dtype=np.int64)
    v[length] = 0  # height 0
    heights = np.arange(-length, length + 1)
    for t in range(length):
        up_gain = is_a[t, heights + off].astype(np.int64)
        dn_gain = is_a[t, heights - 1 + off].astype(np.int64)
        new = np.full_like(v, neg)
        np.maximum(new[1:], v[:-1] + up_gain[:-1], out=new[1:])
        np.maximum(new[:-1], v[1:] + dn_gain[1:], out=new[:-1])
        v = new
    return int(v.max())


def pair_ensemble_logz(
    n: int,
    L: int,
    omega: np.ndarray,
    labels: np.ndarray,
    h_offset: int,
    alpha: float,
    beta: float,
) -> float:
    """Exact log partition sum of the block-pair path ensemble.

    Paths make n directed self-avoiding steps from the origin.  Whenever a
    path sits on a corner of the block lattice (both coordinates multiples
    of L) it must step right; that step enters the pair made of the block
    up-right of the corner and the block below it, and the path is confined
    to that pair until it leaves through the pair's upper-right or
    lower-right corner.  The mid-height right corner admits no legal
    continuation, so paths may only end there.  The path may end anywhere
    inside the pair it is currently traversing.

    labels[t, h + h_offset] in {0 (A), 1 (B)} gives the block in column t
    at row h; the pair entered from corner height h uses rows h (upper) and
    h-1 (lower), and edges running along the bottom boundary of the pair
    read row h-2.
    """
    return pair_ensemble_logz_impl(
        _pair_dp, n, L, omega, labels, h_offset, alpha, beta
    )


def _pair_dp(n, L, la, lab, w_on_a, w_on_b):
    """One pair-traversal DP driven by a log arrival vector.

    Returns (log weight of paths ending inside this pair,
             log exit vector through the upper corner,
             log exit vector through the lower corner).

    The box state carries a running log offset logC that tracks the
    arrival entries as they are injected, so the in-box dynamic range
    stays bounded by the spread of path weights across one pair.
    """
    up_lab, lo_lab, below_lab = lab
    live = np.nonzero(la > -math.inf)[0]
    out_up = np.full(n + 1, -math.inf)
    out_dn = np.full(n + 1, -math.inf)
    end_log = -math.inf
    if live.size == 0 or live[0] >= n:
        return end_log, out_up, out_dn

    ny = 2 * L + 1
    yc = L
    dp = np.zeros((3, L + 1, ny))
    new = np.zeros_like(dp)
    logC = la[live[0]]

    ys = np.arange(-L, L + 1)
    lab_h = np.where(ys >= 1, up_lab, np.where(ys > -L, lo_lab, below_lab))
    lab_u = np.where(ys >= 1, up_lab, lo_lab)
    lab_d = np.where(ys >= 0, up_lab, lo_lab)

    for j in range(int(live[0]), n):
        k = j + 1  # monomer consumed by this move
        wa, wb = w_on_a[j], w_on_b[j]
        w_h = np.where(lab_h == 0, wa, wb)
        w_u = np.where(lab_u == 0, wa, wb)
        w_d = np.where(lab_d == 0, wa, wb)
        if la[j] > logC + 600.0:
            # pull the offset up before a large injection would overflow
            dp *= math.exp(logC - la[j])
            logC = la[j]
        new.fill(0.0)
        new[_R, 1:, :] = (dp[_R, :-1, :] + dp[_U, :-1, :] + dp[_D, :-1, :]) * w_h
        new[_U, :, 1:] = (dp[_R, :, :-1] + dp[_U, :, :-1]) * w_u[1:]
        new[_D, :, :-1] = (dp[_R, :, 1:] + dp[_D, :, 1:]) * w_d[:-1]
        if la[j] > -math.inf:
            # forced step right off the entry corner; its edge runs along
            # the interface of the pair and reads the lower block
            w0 = wa if lo_lab == 0 else wb
            new[_R, 1, yc] += math.exp(la[j] - logC) * w0
        dp, new = new, dp
        top = dp[_R, L, yc + L] + dp[_U, L, yc + L] + dp[_D, L, yc + L]
        if top > 0.0:
            out_up[k] = math.log(top) + logC
            dp[:, L, yc + L] = 0.0
        bot = dp[_R, L, yc - L] + dp[_U, L, yc - L] + dp[_D, L, yc - L]
        if bot > 0.0:
            out_dn[k] = math.log(bot) + logC
            dp[:, L, yc - L] = 0.0
        mid = dp[_R, L, yc] + dp[_U, L, yc] + dp[_D, L, yc]
        if mid > 0.0:
            if k == n:
                end_log = _logadd(end_log, math.log(mid) + logC)
            dp[:, L, yc] = 0.0
        s = dp.max()
        if s > 0.0 and (s > 1e100 or s < 1e-100):
            dp /= s
            logC += math.log(s)
    tot = dp.sum()
    if tot > 0.0:
        end_log = _logadd(end_log, math.log(tot) + logC)
    return end_log, out_up, out_dn


def _logadd(a, b):
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    m = max(a, b)
    return m + math.log(math.exp(a - m) + math.exp(b - m))
