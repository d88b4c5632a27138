"""Small numeric helpers shared across the engine."""

from __future__ import annotations

import math
import warnings

import numpy as np

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def geometric_grid(lo: float, hi: float, n: int) -> np.ndarray:
    """n points from lo to hi, geometrically spaced (inclusive)."""
    if lo <= 0 or hi <= lo or n < 2:
        raise ValueError("need 0 < lo < hi and n >= 2")
    return lo * (hi / lo) ** (np.arange(n) / (n - 1))


def logsumexp(values) -> float:
    arr = np.asarray(values, dtype=float)
    arr = arr[np.isfinite(arr) | (arr > -np.inf)]
    if arr.size == 0:
        return -math.inf
    m = float(np.max(arr))
    if not math.isfinite(m):
        return m
    return m + math.log(float(np.sum(np.exp(arr - m))))


def richardson(values, sizes, levels: int = 1):
    """Eliminate 1/size corrections from a sequence of finite-size estimates.

    Each level performs the linear-in-1/size extrapolation on consecutive
    pairs; with a ratio-2 size schedule the first level also cancels a
    log(size)/size term, so two levels are appropriate for clean
    (noise-free) data and one level for Monte Carlo data.

    Returns (estimate, error) where the error is the absolute difference of
    the last two entries at the deepest level reached.
    """
    vals = [float(v) for v in values]
    szs = [float(s) for s in sizes]
    if len(vals) != len(szs) or len(vals) < 2:
        raise ValueError("need at least two (value, size) pairs")
    if any(szs[i] >= szs[i + 1] for i in range(len(szs) - 1)):
        raise ValueError("sizes must be increasing")

    prev_last = vals[-1]
    for _ in range(levels):
        if len(vals) < 2:
            break
        nxt = [
            (vals[i + 1] * szs[i + 1] - vals[i] * szs[i]) / (szs[i + 1] - szs[i])
            for i in range(len(vals) - 1)
        ]
        prev_last = vals[-1]
        vals = nxt
        szs = szs[1:]
    err = abs(vals[-1] - (vals[-2] if len(vals) >= 2 else prev_last))
    return vals[-1], err


def golden_max(f, lo: float, hi: float, tol: float = 1e-4, seed_points: int = 12):
    """Maximise a scalar function on [lo, hi].

    A coarse scan locates the best bracket, golden-section refines it.  If
    the scan shows more than one competitive local maximum a warning is
    emitted and the refinement still proceeds from the global scan winner.

    Returns (x, f(x)).
    """
    if hi < lo:
        raise ValueError("empty bracket")
    if hi == lo:
        return lo, f(lo)
    xs = np.linspace(lo, hi, max(3, seed_points))
    ys = np.array([f(x) for x in xs])
    k = int(np.argmax(ys))

    interior = ys[1:-1]
    if interior.size >= 3:
        local = (interior >= ys[:-2]) & (interior >= ys[2:])
        strong = local & (interior >= ys[k] - 10 * tol)
        if int(np.sum(strong)) > 1:
            warnings.warn("objective looks non-unimodal; keeping grid argmax", stacklevel=2)

    a = xs[max(0, k - 1)]
    b = xs[min(len(xs) - 1, k + 1)]
    if b - a < tol:
        return float(xs[k]), float(ys[k])

    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return float(x), float(f(x))
