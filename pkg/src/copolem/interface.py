"""Quenched free energy of a copolymer along a flat A/B interface.

The ensemble: directed self-avoiding walks of m steps pinned to the
interface at both ends, covering a horizontal span of round(m/mu) with the
vertical coordinate free.  Edges above the interface sit in A (an A-monomer
there earns alpha), edges below sit in B (a B-monomer earns beta);
horizontal edges on the interface itself count as B-side, and a vertical
edge belongs to the side containing its midpoint.

phi(mu) is the large-m limit of (1/m) log Z averaged over monomer
sequences.  The finite-m estimator computes one dynamic program per
(m, sample) that yields log Z for every admissible span at once, so a whole
mu-grid costs the same as a single mu.  Estimates extrapolate linearly in
1/m per sample; the sample spread gives the standard error.
"""

from __future__ import annotations

import math

import numpy as np

from . import kernels
from .model import LABEL_A, LABEL_B, sample_copolymer
from .util import geometric_grid, richardson

DEFAULT_M_SCHEDULE = (200, 400, 800)
DEFAULT_SAMPLES = 8
DEFAULT_MU_GRID = tuple(geometric_grid(1.0, 8.0, 9))

_TABLE_FORMAT = 1


def _edge_weights(params, labels):
    """Per-step weights (on the A side, on the B side) for a sequence."""
    wa = np.where(labels == LABEL_A, math.exp(params.alpha), 1.0)
    wb = np.where(labels == LABEL_B, math.exp(params.beta), 1.0)
    return wa, wb


def span_for(m: int, mu: float) -> int:
    """Nearest admissible span for m steps at slope mu (parity-matched)."""
    if mu < 1.0:
        raise ValueError("mu must be at least 1")
    s = int(math.floor(m / mu + 0.5))
    if (m - s) % 2 != 0:
        s = s + 1 if m / mu > s else s - 1
    return min(max(s, 0), m)


def exact_slope_grid(m_schedule=DEFAULT_M_SCHEDULE, mu_max: float = 100.0):
    """Slopes whose spans are exact integers at every size in the schedule.

    With sizes in ratio two, the span at the base size fixes the spans at
    all larger ones, so slopes mu = m0/k (k stepping by two down from m0)
    avoid any span rounding in the extrapolation.  The grid is dense near
    mu = 1 and thins out toward mu_max, matching where the interface free
    energy actually varies.
    """
    ms = sorted(int(m) for m in m_schedule)
    m0 = ms[0]
    for a, b in zip(ms, ms[1:]):
        if b != 2 * a:
            raise ValueError("size schedule must double between sizes")
    k_min = max(int(math.ceil(m0 / mu_max)), 1)
    if (m0 - k_min) % 2 != 0:
        k_min += 1
    ks = np.arange(m0, k_min - 1, -2)
    return m0 / ks


def interface_log_partition(params, mu: float, m: int, omega) -> float:
    """Exact log partition sum at span round(m/mu), -inf if unreachable.

    The span is taken literally from rounding; when its parity does not
    match m the endpoint is unreachable and the result is -inf rather
    than an error.
    """
    if mu < 1.0:
        raise ValueError("mu must be at least 1")
    labels = np.asarray(omega.labels if hasattr(omega, "labels") else omega)
    if labels.shape[0] != m:
        raise ValueError(f"omega has {labels.shape[0]} monomers, expected {m}")
    wa, wb = _edge_weights(params, labels)
    logz = kernels.interface_span_logz(wa, wb)
    s = int(math.floor(m / mu + 0.5))
    if not 0 <= s <= m:
        return -math.inf
    return float(logz[s])


def phi_interface(params, mu: float, m: int, samples: int, seed: int):
    """Single-size quenched estimate: mean of (1/m) log Z over sequences.

    Returns (estimate, stderr).  Spans are parity-matched to m so the
    endpoint is reachable; deterministic in the seed.
    """
    if samples < 2:
        raise ValueError("need at least two samples for a standard error")
    s = span_for(m, mu)
    vals = []
    for i in range(samples):
        omega = sample_copolymer(m, seed, stream=(i,))
        wa, wb = _edge_weights(params, omega.labels)
        logz = kernels.interface_span_logz(wa, wb)
        v = logz[s]
        if not math.isfinite(v):
            raise ValueError(f"span {s} unreachable at m={m}")
        vals.append(v / m)
    vals = np.asarray(vals)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples))


def annealed_phi_bound(params, mu: float, m_schedule=DEFAULT_M_SCHEDULE) -> float:
    """Annealed upper bound: (1/m) log of the sequence-averaged Z.

    Averaging the Boltzmann weight over the fair monomer at each step turns
    the quenched DP into one with constant per-edge weights
    (e^alpha + 1)/2 above the interface and (1 + e^beta)/2 below.
    Extrapolated over the same size schedule as the quenched estimate.
    """
    if mu < 1.0:
        raise ValueError("mu must be at least 1")
    ea = 0.5 * (math.exp(params.alpha) + 1.0)
    eb = 0.5 * (1.0 + math.exp(params.beta))
    vals, ms = [], []
    for m in sorted(int(m) for m in m_schedule):
        wa = np.full(m, ea)
        wb = np.full(m, eb)
        logz = kernels.interface_span_logz(wa, wb)
        s = span_for(m, mu)
        vals.append(float(logz[s]) / m)
        ms.append(m)
    if len(ms) == 1:
        return vals[0]
    est, _ = richardson(vals, ms, levels=1)
    return est


class InterfaceFreeEnergy:
    """Extrapolated phi(mu) for one parameter pair, sharing DP sweeps.

    One dynamic program per (size, sample) serves every mu, so evaluating
    a dense mu-grid costs no more than a single point.  Per-sample values
    extrapolate linearly in 1/m; the mean over samples is the estimate and
    the sample spread gives the standard error.  Monomer sequences for the
    smaller sizes are prefixes of the largest one, which keeps each
    sample's finite-size curve smooth.
    """

    def __init__(
        self,
        params,
        m_schedule=DEFAULT_M_SCHEDULE,
        samples: int = DEFAULT_SAMPLES,
        seed: int = 0,
    ):
        if samples < 2:
            raise ValueError("need at least two samples for a standard error")
        self.params = params
        self.m_schedule = tuple(sorted(int(m) for m in m_schedule))
        self.samples = int(samples)
        self.seed = int(seed)
        self._logz: dict = {}
        self._mu_cache: dict = {}

    @property
    def mu_max(self) -> float:
        """Largest slope the smallest sweep size still resolves.

        A slope needs a span of at least two steps at every size, so the
        smallest size m0 caps usable slopes at m0 / 2.
        """
        return self.m_schedule[0] / 2.0

    def _sweep(self, m: int, sample: int, side: int = 0) -> np.ndarray:
        key = (m, sample, side)
        out = self._logz.get(key)
        if out is None:
            m_top = self.m_schedule[-1]
            omega = sample_copolymer(m_top, self.seed, stream=(sample,))
            wa, wb = _edge_weights(self.params, omega.labels[:m])
            out = kernels.interface_span_logz(wa, wb, side)
            self._logz[key] = out
        return out

    def _sample_estimates(self, mu: float, side: int = 0) -> np.ndarray:
        """One extrapolated (1/m) log Z value per disorder sample."""
        ests = np.empty(self.samples)
        for i in range(self.samples):
            vals = []
            for m in self.m_schedule:
                s = span_for(m, mu)
                v = self._sweep(m, i, side)[s]
                if not math.isfinite(v):
                    raise ValueError(f"span {s} unreachable at m={m}")
                vals.append(float(v) / m)
            if len(vals) == 1:
                ests[i] = vals[0]
            else:
                ests[i] = richardson(vals, list(self.m_schedule), levels=1)[0]
        return ests

    def phi(self, mu: float, side: int = 0):
        """(estimate, stderr) of the interface free energy at one slope.

        side=+1 restricts the walk to the upper half-plane, side=-1 to the
        lower one; the same monomer sequences drive all three ensembles,
        so differences between sides are not washed out by disorder noise.
        """
        if side not in (-1, 0, 1):
            raise ValueError("side must be -1, 0 or 1")
        key = (round(float(mu), 12), side)
        out = self._mu_cache.get(key)
        if out is None:
            ests = self._sample_estimates(float(mu), side)
            out = (
                float(ests.mean()),
                float(ests.std(ddof=1) / math.sqrt(self.samples)),
            )
            self._mu_cache[key] = out
        return out

    def phi_limit(self, side: int = 0) -> float:
        """Exact infinite-slope limit of the interface free energy.

        As the slope grows the horizontal displacement per step vanishes:
        the entropy per step goes to zero and the walk degenerates into a
        few long vertical excursions.  Each excursion carries a contiguous
        chunk of the monomer sequence, and by the law of large numbers any
        long chunk matches half of its monomers on whichever side it is
        placed, earning alpha/2 per step above or beta/2 below.  The best
        placement keeps every chunk on the richer side.  Restricting to one
        half-plane only forbids the poorer side, which an optimal walk
        never uses anyway, except that the lower half-plane cannot reach
        the alpha reward at all.
        """
        if side not in (-1, 0, 1):
            raise ValueError("side must be -1, 0 or 1")
        if side < 0:
            return 0.5 * self.params.beta
        if side > 0:
            return 0.5 * self.params.alpha
        return 0.5 * max(self.params.alpha, self.params.beta)

    def phi_many(self, mus, side: int = 0):
        """Vectorized phi over a mu-grid: (estimates, stderrs)."""
        mus = np.atleast_1d(np.asarray(mus, dtype=float))
        est = np.empty(mus.size)
        se = np.empty(mus.size)
        for i, mu in enumerate(mus):
            est[i], se[i] = self.phi(float(mu), side)
        return est, se

    def dense_slopes(self, mu_max: float = 8.0) -> np.ndarray:
        """Every admissible slope up to mu_max resolvable at the top size."""
        m = self.m_schedule[-1]
        s_min = max(int(math.ceil(m / mu_max)), 1)
        spans = np.arange(m, s_min - 1, -2)
        return m / spans


def build_interface_table(
    params,
    mu_grid=DEFAULT_MU_GRID,
    m_schedule=DEFAULT_M_SCHEDULE,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
) -> "InterfaceTable":
    fe = InterfaceFreeEnergy(params, m_schedule, samples, seed)
    mus = np.asarray(sorted(float(m) for m in mu_grid))
    est, se = fe.phi_many(mus)
    return InterfaceTable(
        params.alpha,
        params.beta,
        mus,
        est,
        se,
        {
            "m_schedule": list(fe.m_schedule),
            "samples": samples,
            "seed": seed,
            "edge_convention": "interface-edges-B-side",
        },
    )


class InterfaceTable:
    """phi(mu) on a grid for one parameter pair, with provenance metadata."""

    def __init__(self, alpha, beta, mu_grid, phi_vals, stderr, meta=None):
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.mu_grid = np.asarray(mu_grid, dtype=float)
        self.phi_vals = np.asarray(phi_vals, dtype=float)
        self.stderr = np.asarray(stderr, dtype=float)
        self.meta = dict(meta or {})
        if not (self.mu_grid.size == self.phi_vals.size == self.stderr.size):
            raise ValueError("grid and value arrays must have equal length")
        if np.any(np.diff(self.mu_grid) <= 0):
            raise ValueError("mu grid must be strictly increasing")

    def lookup(self, mu: float):
        """Linear interpolation of (phi, stderr) on the grid."""
        if not self.mu_grid[0] <= mu <= self.mu_grid[-1]:
            raise ValueError(f"mu={mu} outside table range")
        return (
            float(np.interp(mu, self.mu_grid, self.phi_vals)),
            float(np.interp(mu, self.mu_grid, self.stderr)),
        )

    def to_json(self, path) -> None:
        import json

        doc = {
            "format": _TABLE_FORMAT,
            "kind": "interface_table",
            "alpha": self.alpha,
            "beta": self.beta,
            "mu_grid": self.mu_grid.tolist(),
            "phi": self.phi_vals.tolist(),
            "stderr": self.stderr.tolist(),
            "meta": self.meta,
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "InterfaceTable":
        import json

        with open(path) as fh:
            doc = json.load(fh)
        if doc.get("format") != _TABLE_FORMAT or doc.get("kind") != "interface_table":
            raise ValueError(f"{path} is not an interface table in a known format")
        return cls(
            doc["alpha"],
            doc["beta"],
            np.asarray(doc["mu_grid"], dtype=float),
            np.asarray(doc["phi"], dtype=float),
            np.asarray(doc["stderr"], dtype=float),
            doc.get("meta", {}),
        )
