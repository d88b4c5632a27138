"""Crossing entropy of directed paths through a single block.

kappa(mu, nu) is the entropy per step of directed self-avoiding paths that
cross a nu*L by L block diagonally in mu*L steps, in the large-L limit.
There is no closed form here: we count paths exactly at a schedule of
finite L values (arbitrary-precision integers, so no overflow) and
extrapolate the per-step log-counts linearly in 1/L, iterating the
elimination once more to knock out the slowly varying correction.

At finite L the step number must have the parity of the displacement, so
a real-valued target mu*L is evaluated by interpolating the log-count
between the two bracketing admissible step numbers.  That keeps
kappa(mu, nu) smooth in mu, which the optimizers downstream rely on.

EntropyTable bakes kappa onto a (mu, nu) grid for caching and generic
bilinear lookups; the block-pair optimizer instead calls kappa_row on
exact nu nodes, which has no grid error beyond the in-step interpolation.
"""

from __future__ import annotations

import json
import math

import numpy as np

from . import kernels
from .util import richardson

LOG3 = math.log(3.0)

DEFAULT_L_SCHEDULE = (16, 32, 64)
DEFAULT_MU_GRID = tuple(np.round(np.arange(1.0, 12.51, 0.25), 6))
DEFAULT_NU_GRID = tuple(w / 16 for w in range(1, 17))

_TABLE_FORMAT = 1

_COUNT_CACHE: dict = {}
_LOGC_CACHE: dict = {}


class CoverageError(Exception):
    """Raised when a lookup falls outside the region a table covers."""


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _counts(L: int, W: int, m_max: int) -> list:
    """Cached exact counts for the W x L block, all step numbers to m_max."""
    key = (int(L), int(W))
    cached = _COUNT_CACHE.get(key)
    if cached is None or len(cached) <= m_max:
        cached = kernels.crossing_counts(W, L, m_max)
        _COUNT_CACHE[key] = cached
        _LOGC_CACHE.pop(key, None)
    return cached


def _log_counts(L: int, W: int, m_max: int):
    """(admissible step numbers, their log-counts) with NaN at zero counts."""
    key = (int(L), int(W))
    cached = _LOGC_CACHE.get(key)
    if cached is None or cached[0][-1] < m_max:
        counts = _counts(L, W, m_max)
        base = W + L
        ms = np.arange(base, len(counts), 2, dtype=np.int64)
        logc = np.array(
            [math.log(counts[m]) if counts[m] > 0 else np.nan for m in ms]
        )
        cached = (ms, logc)
        _LOGC_CACHE[key] = cached
    return cached


def clear_count_cache() -> None:
    _COUNT_CACHE.clear()
    _LOGC_CACHE.clear()


def count_block_crossings(L: int, m: int, nu: float) -> int:
    """Exact number of m-step crossings of a (nu*L) x L block.

    Counts directed self-avoiding paths from (0,0) to (round(nu*L), L)
    staying inside the block.  A step number below the minimum or of the
    wrong parity yields zero, which is a valid count, not an error.
    """
    if L < 1:
        raise ValueError("L must be a positive integer")
    if m < 0:
        raise ValueError("m must be non-negative")
    if not 0.0 < nu <= 1.0:
        raise ValueError("nu must lie in (0, 1]")
    W = _round_half_up(nu * L)
    if m < W + L or (m - (W + L)) % 2 != 0:
        return 0
    return _counts(L, W, m)[m]


def _row_at_L(L: int, mus: np.ndarray, nu: float) -> np.ndarray:
    """Per-step log-count at one block size for an array of slopes.

    Interpolates the log-count between the two admissible step numbers
    bracketing mu*L.  NaN marks slopes no path can realize at this L.
    """
    W = _round_half_up(nu * L)
    base = W + L
    target = np.maximum(mus * L, float(base))
    m_top = int(math.ceil(float(np.max(target)))) + 3
    ms, logc = _log_counts(L, W, m_top)
    if ms.size < 2:
        return np.full(mus.shape, np.nan)
    k = ((target - base) // 2).astype(np.int64)
    k = np.minimum(k, ms.size - 2)
    t = (target - (base + 2 * k)) / 2.0
    c0 = logc[k]
    c1 = logc[k + 1]
    v = ((1.0 - t) * c0 + t * c1) / target
    # an exact hit on the last admissible step number needs no upper node
    exact = (t < 1e-12) & np.isfinite(c0)
    v = np.where(exact, c0 / target, v)
    return v


def kappa_row(mus, nu: float, L_schedule=DEFAULT_L_SCHEDULE, levels: int = 2):
    """Vectorized crossing entropy along one nu, with extrapolation errors.

    Returns (values, errors) arrays over the requested slopes; entries are
    NaN where fewer than two block sizes admit the crossing.
    """
    if len(L_schedule) < 2:
        raise ValueError("L_schedule needs at least two block sizes")
    if not 0.0 < nu <= 1.0:
        raise ValueError("nu must lie in (0, 1]")
    mus = np.atleast_1d(np.asarray(mus, dtype=float))
    Ls = sorted(int(L) for L in L_schedule)
    feasible = mus >= nu + 1.0 - 1e-9
    rows = np.full((len(Ls), mus.size), np.nan)
    for r, L in enumerate(Ls):
        if np.any(feasible):
            rows[r, feasible] = _row_at_L(L, mus[feasible], float(nu))
    vals = np.full(mus.size, np.nan)
    errs = np.full(mus.size, np.nan)
    for i in range(mus.size):
        col = rows[:, i]
        ok = np.isfinite(col)
        if ok.sum() < 2:
            continue
        est, err = richardson(
            col[ok].tolist(),
            [Ls[r] for r in range(len(Ls)) if ok[r]],
            levels=min(levels, int(ok.sum()) - 1),
        )
        vals[i] = min(max(est, 0.0), LOG3)
        errs[i] = err
    return vals, errs


def kappa(mu: float, nu: float, L_schedule=DEFAULT_L_SCHEDULE, levels: int = 2):
    """Crossing entropy estimate with its extrapolation error.

    Evaluates the per-step log-count at every block size in L_schedule and
    extrapolates in 1/L; the error is the gap between the last two
    extrapolants.  Block sizes where the requested slope admits no path at
    all are skipped; at least two contributing sizes are required.
    """
    if not 0.0 < nu <= 1.0:
        raise ValueError("nu must lie in (0, 1]")
    if mu < nu + 1.0 - 1e-9:
        raise ValueError("mu must be at least nu + 1 for a crossing to exist")
    vals, errs = kappa_row([float(mu)], float(nu), L_schedule, levels)
    if not math.isfinite(vals[0]):
        raise CoverageError(
            f"kappa({mu}, {nu}) is feasible at fewer than two of the "
            f"requested block sizes {tuple(L_schedule)}"
        )
    return float(vals[0]), float(errs[0])


def sup_kappa_diag(
    a_bracket,
    tol: float = 1e-3,
    L_schedule=DEFAULT_L_SCHEDULE,
    levels: int = 2,
):
    """Maximize a -> kappa(a, 1) over the bracket by golden section.

    Returns (a*, kappa*).  The count caches are warmed for the whole
    bracket up front so each evaluation is a table read.
    """
    from .util import golden_max

    lo, hi = float(a_bracket[0]), float(a_bracket[1])
    if not 2.0 <= lo < hi:
        raise ValueError("bracket must satisfy 2 <= lo < hi")
    for L in L_schedule:
        _counts(L, L, _round_half_up(hi * L) + 4)
    a_star, k_star = golden_max(
        lambda a: kappa(a, 1.0, L_schedule, levels)[0], lo, hi, tol=tol
    )
    return a_star, k_star


class EntropyTable:
    """kappa(mu, nu) baked onto a rectangular grid, with bilinear lookup.

    Cells whose slope admits no crossing at enough finite block sizes are
    stored as NaN and count as uncovered.
    """

    def __init__(self, mu_grid, nu_grid, kappa_vals, errs, l_max, meta=None):
        self.mu_grid = np.asarray(mu_grid, dtype=float)
        self.nu_grid = np.asarray(nu_grid, dtype=float)
        self.kappa_vals = np.asarray(kappa_vals, dtype=float)
        self.errs = np.asarray(errs, dtype=float)
        self.l_max = np.asarray(l_max, dtype=int)
        self.meta = dict(meta or {})
        shape = (self.mu_grid.size, self.nu_grid.size)
        if self.kappa_vals.shape != shape or self.errs.shape != shape:
            raise ValueError("table arrays do not match the grids")
        if np.any(np.diff(self.mu_grid) <= 0) or np.any(np.diff(self.nu_grid) <= 0):
            raise ValueError("grids must be strictly increasing")

    @classmethod
    def build(
        cls,
        mu_grid=DEFAULT_MU_GRID,
        nu_grid=DEFAULT_NU_GRID,
        L_schedule=DEFAULT_L_SCHEDULE,
        levels: int = 2,
    ) -> "EntropyTable":
        mu_grid = np.asarray(sorted(float(m) for m in mu_grid))
        nu_grid = np.asarray(sorted(float(v) for v in nu_grid))
        Ls = sorted(int(L) for L in L_schedule)
        kv = np.full((mu_grid.size, nu_grid.size), np.nan)
        er = np.full_like(kv, np.nan)
        lm = np.zeros(kv.shape, dtype=int)
        for j, nu in enumerate(nu_grid):
            vals, errs = kappa_row(mu_grid, float(nu), Ls, levels)
            kv[:, j] = vals
            er[:, j] = errs
            lm[np.isfinite(vals), j] = Ls[-1]
        meta = {"l_schedule": Ls, "levels": int(levels)}
        return cls(mu_grid, nu_grid, kv, er, lm, meta)

    def lookup(self, mu: float, nu: float):
        """Bilinear (kappa, err) at one point; CoverageError when outside."""
        k = self.lookup_many(np.asarray([mu]), np.asarray([nu]))
        if math.isnan(k[0]):
            raise CoverageError(f"({mu}, {nu}) is outside the covered region")
        i = np.searchsorted(self.mu_grid, mu, side="right") - 1
        j = np.searchsorted(self.nu_grid, nu, side="right") - 1
        i = min(max(i, 0), self.mu_grid.size - 2)
        j = min(max(j, 0), self.nu_grid.size - 2)
        err = float(np.nanmax(self.errs[i : i + 2, j : j + 2]))
        return float(k[0]), err

    def lookup_many(self, mu, nu) -> np.ndarray:
        """Vectorized bilinear kappa; NaN marks uncovered points."""
        mu = np.asarray(mu, dtype=float)
        nu = np.asarray(nu, dtype=float)
        out = np.full(np.broadcast(mu, nu).shape, np.nan)
        mu, nu = np.broadcast_arrays(mu, nu)
        inside = (
            (mu >= self.mu_grid[0])
            & (mu <= self.mu_grid[-1])
            & (nu >= self.nu_grid[0])
            & (nu <= self.nu_grid[-1])
        )
        if not np.any(inside):
            return out
        i = np.clip(
            np.searchsorted(self.mu_grid, mu, side="right") - 1,
            0,
            self.mu_grid.size - 2,
        )
        j = np.clip(
            np.searchsorted(self.nu_grid, nu, side="right") - 1,
            0,
            self.nu_grid.size - 2,
        )
        du = self.mu_grid[i + 1] - self.mu_grid[i]
        dv = self.nu_grid[j + 1] - self.nu_grid[j]
        tx = (mu - self.mu_grid[i]) / du
        ty = (nu - self.nu_grid[j]) / dv
        k00 = self.kappa_vals[i, j]
        k10 = self.kappa_vals[i + 1, j]
        k01 = self.kappa_vals[i, j + 1]
        k11 = self.kappa_vals[i + 1, j + 1]
        val = (
            k00 * (1 - tx) * (1 - ty)
            + k10 * tx * (1 - ty)
            + k01 * (1 - tx) * ty
            + k11 * tx * ty
        )
        out[inside] = val[inside]
        return out

    def refine(self, other: "EntropyTable") -> "EntropyTable":
        """Merge two tables on identical grids, keeping the deeper estimate."""
        if not (
            np.array_equal(self.mu_grid, other.mu_grid)
            and np.array_equal(self.nu_grid, other.nu_grid)
        ):
            raise ValueError("tables must share their grids to be merged")
        take = other.l_max > self.l_max
        kv = np.where(take, other.kappa_vals, self.kappa_vals)
        er = np.where(take, other.errs, self.errs)
        lm = np.maximum(self.l_max, other.l_max)
        meta = dict(self.meta)
        meta.update(other.meta)
        return EntropyTable(self.mu_grid, self.nu_grid, kv, er, lm, meta)

    def to_json(self, path) -> None:
        def _clean(a):
            return [[None if math.isnan(v) else v for v in row] for row in a.tolist()]

        doc = {
            "format": _TABLE_FORMAT,
            "kind": "entropy_table",
            "mu_grid": self.mu_grid.tolist(),
            "nu_grid": self.nu_grid.tolist(),
            "kappa": _clean(self.kappa_vals),
            "err": _clean(self.errs),
            "l_max": self.l_max.tolist(),
            "meta": self.meta,
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "EntropyTable":
        with open(path) as fh:
            doc = json.load(fh)
        if doc.get("format") != _TABLE_FORMAT or doc.get("kind") != "entropy_table":
            raise ValueError(f"{path} is not an entropy table in a known format")

        def _undo(rows):
            return np.array(
                [[np.nan if v is None else v for v in row] for row in rows],
                dtype=float,
            )

        return cls(
            np.asarray(doc["mu_grid"], dtype=float),
            np.asarray(doc["nu_grid"], dtype=float),
            _undo(doc["kappa"]),
            _undo(doc["err"]),
            np.asarray(doc["l_max"], dtype=int),
            doc.get("meta", {}),
        )
