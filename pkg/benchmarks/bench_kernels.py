"""Timing comparison of the pure NumPy kernels against the compiled ones.

Run from the repository root after an editable install:

    python benchmarks/bench_kernels.py
"""

import argparse
import time

import numpy as np

from copolem import _kernels_py
from copolem.model import rng_stream, sample_copolymer, sample_emulsion

try:
    from copolem import _kernels_cy
except ImportError:
    _kernels_cy = None


def _time(fn, *args, repeat=1):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_interface(m, seed, repeat):
    g = rng_stream(seed, 0)
    wa = np.where(g.integers(0, 2, size=m) == 0, np.exp(0.8), 1.0)
    wb = np.where(g.integers(0, 2, size=m) == 1, np.exp(0.3), 1.0)
    rows = []
    t_py, ref = _time(_kernels_py.interface_span_logz, wa, wb, repeat=repeat)
    rows.append(("python", t_py))
    if _kernels_cy is not None:
        t_cy, got = _time(_kernels_cy.interface_span_logz, wa, wb, repeat=repeat)
        fin = ~np.isneginf(ref)
        assert (np.isneginf(ref) == np.isneginf(got)).all()
        assert np.allclose(ref[fin], got[fin], rtol=1e-10)
        rows.append(("cython", t_cy))
    return rows


def bench_pair(n, L, seed, repeat):
    t_max = n // (2 * L)
    h_off = t_max + 2
    field = sample_emulsion(
        (t_max + 1, 2 * t_max + 4), 0.6, seed=seed,
        block_size=1, col_min=0, row_min=-h_off,
    )
    omega = sample_copolymer(n, seed=seed).labels
    args = (n, L, omega, field.labels, h_off, 1.2, 0.4)
    rows = []
    t_py, ref = _time(_kernels_py.pair_ensemble_logz, *args, repeat=repeat)
    rows.append(("python", t_py))
    if _kernels_cy is not None:
        t_cy, got = _time(_kernels_cy.pair_ensemble_logz, *args, repeat=repeat)
        assert abs(ref - got) < 1e-8 * max(1.0, abs(ref))
        rows.append(("cython", t_cy))
    return rows


def report(name, rows):
    base = rows[0][1]
    for backend, t in rows:
        speedup = "" if backend == "python" else f"  ({base / t:.1f}x)"
        print(f"  {name:<28s} {backend:<8s} {t:8.3f}s{speedup}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--interface-steps", type=int, default=800)
    ap.add_argument("--pair-steps", type=int, default=1600)
    ap.add_argument("--pair-block", type=int, default=8)
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--repeat", type=int, default=1)
    args = ap.parse_args()

    if _kernels_cy is None:
        print("compiled backend not built; timing the pure backend only")
    print("kernel benchmarks (best of %d):" % args.repeat)
    report(
        f"interface m={args.interface_steps}",
        bench_interface(args.interface_steps, args.seed, args.repeat),
    )
    report(
        f"pair n={args.pair_steps} L={args.pair_block}",
        bench_pair(args.pair_steps, args.pair_block, args.seed, args.repeat),
    )


if __name__ == "__main__":
    main()
