"""Oil-percolation frequency of the coarse block lattice.

A coarse-grained path hops corner to corner, one column right and one
block up or down per step, crossing a single block each time.  The
maximal limiting fraction of A-blocks such a path can cross is the
percolation frequency rho*(p); it reaches 1 exactly when the A-blocks
percolate directionally, which happens above a critical density p_c.
This module estimates rho*(p) by last-passage dynamic programming over
sampled block fields and locates p_c by bisection with a two-length
finite-size extrapolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import lpp_max_crossed
from .model import LABEL_A, EmulsionField, sample_emulsion


class BracketError(RuntimeError):
    """The p-bisection bracket does not straddle the threshold."""


@dataclass(frozen=True)
class PercolationEstimate:
    """Monte-Carlo estimate of rho*(p) at one block density."""

    p: float
    rho_star: float
    stderr: float
    lattice_diagonal_length: int
    samples: int


def _field_extent_for(length: int) -> tuple:
    """(extent, row_min) of a block field covering the coarse cone."""
    return (length, 2 * length + 2), -(length + 1)


def max_A_frequency(field: EmulsionField, length: int, seed: int = 0) -> float:
    """Best fraction of A-blocks crossed by a length-step coarse path.

    The walk starts at corner height 0 in column 0; an up step from
    height j crosses block (t, j), a down step crosses block (t, j-1).
    The DP is deterministic; `seed` is accepted for interface symmetry
    with the sampling routines and is unused.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    if field.block_size != 1:
        raise ValueError("coarse percolation uses block_size=1 fields")
    lo_col = 0 - field.col_min
    hi_col = length - field.col_min
    lo_row = -(length + 1) - field.row_min
    hi_row = length - field.row_min + 1
    if lo_col < 0 or hi_col > field.labels.shape[0]:
        raise ValueError("field columns do not cover the coarse cone")
    if lo_row < 0 or hi_row > field.labels.shape[1]:
        raise ValueError("field rows do not cover the coarse cone")
    is_a = field.labels[lo_col:hi_col, lo_row:hi_row] == LABEL_A
    best = lpp_max_crossed(is_a, length)
    return best / length


def rho_star(p: float, length: int, samples: int, seed: int) -> PercolationEstimate:
    """Sample-mean estimate of rho*(p) at one diagonal length.

    Fields for sample k are drawn from stream (k,) of `seed` by
    thresholding per-block uniforms at p, so estimates at different p
    with the same seed are monotonically coupled.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly between 0 and 1")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    extent, row_min = _field_extent_for(length)
    freqs = np.empty(samples)
    for k in range(samples):
        field = sample_emulsion(
            extent, p, seed, block_size=1, col_min=0, row_min=row_min, stream=(k,)
        )
        freqs[k] = max_A_frequency(field, length)
    mean = float(freqs.mean())
    err = float(freqs.std(ddof=1) / np.sqrt(samples)) if samples > 1 else 0.0
    return PercolationEstimate(
        p=p,
        rho_star=mean,
        stderr=err,
        lattice_diagonal_length=length,
        samples=samples,
    )


def _threshold_p(
    length: int,
    samples: int,
    tol: float,
    seed: int,
    p_lo: float,
    p_hi: float,
    p_resolution: float,
) -> float:
    """Smallest p (to p_resolution) with rho_star estimate >= 1 - tol."""
    target = 1.0 - tol
    lo_est = rho_star(p_lo, length, samples, seed).rho_star
    hi_est = rho_star(p_hi, length, samples, seed).rho_star
    if lo_est >= target:
        raise BracketError(
            f"rho*({p_lo}) = {lo_est:.4f} already meets 1 - tol = {target:.4f}"
        )
    if hi_est < target:
        raise BracketError(
            f"rho*({p_hi}) = {hi_est:.4f} stays below 1 - tol = {target:.4f}"
        )
    lo, hi = p_lo, p_hi
    while hi - lo > p_resolution:
        mid = 0.5 * (lo + hi)
        if rho_star(mid, length, samples, seed).rho_star >= target:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class PCritEstimate:
    """Two-length threshold pair used to locate the percolation density."""

    p_c: float
    threshold_full: float
    threshold_half: float
    length: int
    samples: int
    tol: float

    @property
    def finite_size_spread(self) -> float:
        return abs(self.threshold_full - self.threshold_half)


def estimate_p_c_detail(
    length: int,
    samples: int,
    tol: float,
    seed: int = 0,
    p_lo: float = 0.3,
    p_hi: float = 0.95,
    p_resolution: float = 1e-3,
) -> PCritEstimate:
    """Critical density from threshold bisection at two diagonal lengths.

    Bisects for the smallest p whose rho* estimate reaches 1 - tol, at
    lengths length/2 and length.  The full-length threshold is the point
    estimate and the half-to-full gap is the finite-size uncertainty.
    The gap is deliberately not subtracted as a Richardson step: the
    fixed-tolerance threshold converges (slowly, roughly like N^-1/2) to
    the density where rho* itself equals 1 - tol, which lies strictly
    below the percolation point, so extrapolating along the length trend
    walks away from p_c.  At practical lengths the residual last-passage
    excess largely cancels that offset instead.

    Raises BracketError when [p_lo, p_hi] does not straddle the
    threshold at either length.
    """
    if length < 4:
        raise ValueError("length must be >= 4 for the two-length schedule")
    half = _threshold_p(length // 2, samples, tol, seed, p_lo, p_hi, p_resolution)
    full = _threshold_p(length, samples, tol, seed, p_lo, p_hi, p_resolution)
    return PCritEstimate(
        p_c=full,
        threshold_full=full,
        threshold_half=half,
        length=length,
        samples=samples,
        tol=tol,
    )


def estimate_p_c(
    length: int,
    samples: int,
    tol: float,
    seed: int = 0,
    p_lo: float = 0.3,
    p_hi: float = 0.95,
    p_resolution: float = 1e-3,
) -> float:
    """Point estimate of the percolation density; see estimate_p_c_detail."""
    detail = estimate_p_c_detail(
        length, samples, tol, seed, p_lo, p_hi, p_resolution
    )
    return detail.p_c
