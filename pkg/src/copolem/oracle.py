"""Exact finite-size ground truth for the variational pipeline.

exact_log_Z computes the true log partition sum of the n-step
block-pair-constrained path ensemble in one disorder sample, by the same
dynamic program the pair kernel provides; nothing is truncated except
that the endpoint is free, so the final pair traversal may be partial
(an O(L/n) effect on the per-step free energy).  quenched_f_mc averages
over disorder samples for a Monte-Carlo view of the quenched free
energy.  This module is the check on the variational route, so it stays
exact and direct rather than clever.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import (
    EmulsionField,
    InteractionParams,
    sample_copolymer,
    sample_emulsion,
)


@dataclass(frozen=True)
class OracleResult:
    """Monte-Carlo quenched free-energy estimate at one (n, L)."""

    params: InteractionParams
    p: float
    n: int
    L: int
    seed: int
    log_z_samples: tuple
    f_samples: tuple
    f_mean: float
    stderr: float

    @property
    def log_z(self) -> float:
        """Mean log partition sum across the samples."""
        return self.f_mean * self.n

    @property
    def samples(self) -> int:
        return len(self.f_samples)


def _strip_labels(field: EmulsionField, t_max: int):
    """Label strip covering every block a legal path can read.

    A path of t_max coarse steps reaches corner heights |h| <= t_max, and
    the pair entered at height h reads block rows h, h-1 and h-2, so the
    strip spans coarse columns [0, t_max] and rows [-(t_max+2), t_max].
    """
    lo_row, hi_row = -(t_max + 2), t_max
    if (
        field.col_min > 0
        or field.col_min + field.ncols <= t_max
        or field.row_min > lo_row
        or field.row_min + field.nrows <= hi_row
    ):
        raise ValueError(
            f"field extent cols [{field.col_min}, {field.col_min + field.ncols}) x "
            f"rows [{field.row_min}, {field.row_min + field.nrows}) does not cover "
            f"coarse columns [0, {t_max}] x rows [{lo_row}, {hi_row}]"
        )
    c0 = -field.col_min
    r0 = lo_row - field.row_min
    lab = np.ascontiguousarray(
        field.labels[c0 : c0 + t_max + 1, r0 : r0 + (hi_row - lo_row + 1)],
        dtype=np.int64,
    )
    return lab, t_max + 2


def exact_log_Z(n, L, omega, field, params: InteractionParams) -> float:
    """Exact log partition sum of the n-step ensemble in one sample.

    omega may be a CopolymerSequence or a plain label array of length n.
    The ensemble is the one DirectedPath.validate_in_field enforces: start
    on a block corner, step right off every corner into the next block
    pair, stay inside the pair until one of its far corners, free
    endpoint.
    """
    n, L = int(n), int(L)
    if L < 2:
        # with single-cell blocks every site is a corner, so no path can
        # continue past its first step and the ensemble is empty
        raise ValueError("L must be at least 2")
    if n < 2 * L:
        raise ValueError(
            f"n = {n} is too small to cross one block pair at L = {L}"
        )
    if field.block_size != L:
        raise ValueError(
            f"field block size {field.block_size} does not match L = {L}"
        )
    om = np.asarray(getattr(omega, "labels", omega))
    if om.shape != (n,):
        raise ValueError(f"omega must provide exactly {n} monomer labels")
    lab, h_offset = _strip_labels(field, n // (2 * L))
    return float(
        kernels.pair_ensemble_logz(
            n, L, om, lab, h_offset, params.alpha, params.beta
        )
    )


def quenched_f_mc(
    params: InteractionParams,
    p: float,
    n: int,
    L: int,
    samples: int,
    seed: int,
) -> OracleResult:
    """Monte-Carlo quenched free energy at one (n, L).

    Averages (1/n) exact_log_Z over i.i.d. disorder samples, both kinds
    drawn per sample from independent seeded streams.  n is required to
    be at least 10 L so the block scale stays small against the path
    length, the regime the block-pair description aims at.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly between 0 and 1")
    if n < 10 * L:
        raise ValueError(
            f"n = {n} is below 10 L = {10 * L}; the estimate needs many "
            f"blocks per path"
        )
    t_max = n // (2 * L)
    extent = (t_max + 1, 2 * t_max + 3)
    log_zs = []
    for i in range(samples):
        om = sample_copolymer(n, seed, stream=(i,))
        fld = sample_emulsion(
            extent, p, seed, block_size=L,
            col_min=0, row_min=-(t_max + 2), stream=(i,),
        )
        log_zs.append(exact_log_Z(n, L, om, fld, params))
    fs = [z / n for z in log_zs]
    mean = float(np.mean(fs))
    stderr = (
        float(np.std(fs, ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    )
    return OracleResult(
        params=params,
        p=float(p),
        n=n,
        L=L,
        seed=int(seed),
        log_z_samples=tuple(float(z) for z in log_zs),
        f_samples=tuple(float(f) for f in fs),
        f_mean=mean,
        stderr=stderr,
    )


SAMPLE_COLUMNS = (
    "alpha", "beta", "p", "n", "L", "seed", "sample", "log_z", "f",
)


def samples_to_csv(results, path) -> None:
    """Per-sample dump of one or more oracle runs for post-processing."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SAMPLE_COLUMNS)
        for res in results:
            for i, (z, f) in enumerate(zip(res.log_z_samples, res.f_samples)):
                writer.writerow(
                    [
                        repr(float(res.params.alpha)),
                        repr(float(res.params.beta)),
                        repr(float(res.p)),
                        res.n,
                        res.L,
                        res.seed,
                        i,
                        repr(float(z)),
                        repr(float(f)),
                    ]
                )
