"""Backend-independent outer loop of the block-pair partition sum.

The hot work — one pair-traversal DP driven by an arrival vector — is
supplied by the backend as `pair_dp`.  This driver walks the corner
lattice column by column, merges exit vectors into the next column's
arrival bank, and harvests complete-path weights along the way.

Arrival and exit vectors hold log weights indexed by the global step at
which the path reaches the corner (-inf marks an empty entry).  Keeping
them in log space matters: with a positive interaction strength, the
weight of an entry grows roughly exponentially in its step index, so a
single vector legitimately spans far more than the dynamic range of a
float.  An early-step entry sitting a thousand log units below the top
of its vector can still dominate the final sum, because it has that many
more steps left to grow.
"""

from __future__ import annotations

import math

import numpy as np


def pair_ensemble_logz_impl(
    pair_dp,
    n: int,
    L: int,
    omega: np.ndarray,
    labels: np.ndarray,
    h_offset: int,
    alpha: float,
    beta: float,
) -> float:
    if n < 1:
        raise ValueError("need at least one step")
    omega = np.asarray(omega)
    if omega.shape[0] != n:
        raise ValueError("omega must have length n")
    # weight of step k (1-based) when its edge sits on an A- resp. B-block
    w_on_a = np.where(omega == 0, math.exp(alpha), 1.0)
    w_on_b = np.where(omega == 1, math.exp(beta), 1.0)

    t_max = n // (2 * L)
    finals: list = []
    # arrivals: corner height -> log weight vector over arrival step
    first = np.full(n + 1, -np.inf)
    first[0] = 0.0
    arrivals: dict = {0: first}

    for t in range(t_max + 1):
        nxt: dict = {}
        for h in sorted(arrivals):
            la = arrivals[h]
            if la[n] > -math.inf:
                finals.append(la[n])  # ends on the corner
            lab = (
                int(labels[t, h + h_offset]),
                int(labels[t, h - 1 + h_offset]),
                int(labels[t, h - 2 + h_offset]),
            )
            end_log, up, dn = pair_dp(n, L, la, lab, w_on_a, w_on_b)
            if end_log > -math.inf:
                finals.append(end_log)
            for dh, vec in ((1, up), (-1, dn)):
                if t < t_max:
                    if np.max(vec) == -math.inf:
                        continue
                    cur = nxt.get(h + dh)
                    nxt[h + dh] = vec if cur is None else np.logaddexp(cur, vec)
                elif vec[n] > -math.inf:
                    finals.append(vec[n])
        arrivals = nxt

    if not finals:
        return -math.inf
    mx = max(finals)
    return mx + math.log(sum(math.exp(f - mx) for f in finals))
