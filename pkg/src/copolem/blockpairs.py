"""Block-pair free energies built from crossing entropy and the interface.

psi_kl(a) is the free energy per step of a path that traverses a pair of
adjacent solvent blocks, entering at the corner where four blocks meet and
leaving at the diagonally opposite corner of the upper block, spending a*L
steps in the pair, in the large-L limit.  The first index is the block the
path crosses, the second the block just below it.

Homogeneous pairs carry no interface.  The path crosses a single block
diagonally and meets half of its favored monomers on the way:

    psi_AA(a) = alpha/2 + kappa(a, 1)      psi_BB(a) = beta/2 + kappa(a, 1)

Mixed pairs trade bulk crossing against time spent at the flat boundary
between the two blocks.  The path follows the boundary over a horizontal
distance b*L during c*L steps, then crosses the remaining (1-b)L-wide part
of the upper block in the remaining (a-c)L steps:

    a * psi_AB(a) = sup { c*phi(c/b) + (a-c)*(alpha/2 + kappa(a-c, 1-b)) }

over 0 <= b <= 1, c >= b, a-c >= 2-b, with phi the linear-interface free
energy at slope mu = c/b (steps per unit of distance covered).  b = 0
admits no dawdling and is the pure-crossing strategy c = 0; b = 1 pins the
whole width to the boundary, leaving a single straight vertical exit
column, so c = a-1 is forced and the bulk entropy term vanishes.  psi_BA
is the same construction with the roles of the two solvents exchanged:
the interface model runs at swapped parameters and the crossed block
contributes beta/2 instead of alpha/2.

The supremum is taken by a coarse feasible-grid scan refined with nested
golden sections (outer in b, inner in c).  Ties against the pure-crossing
value go to b = c = 0, so downstream phase classification never reports
boundary pinning on numerical noise.
"""

from __future__ import annotations

import json
from typing import NamedTuple

import numpy as np

from . import entropy
from .interface import DEFAULT_M_SCHEDULE, DEFAULT_SAMPLES, InterfaceFreeEnergy
from .model import InteractionParams
from .util import golden_max

MU_CAP = 100.0
GRID_NODES = 32
VALUE_TOL = 1e-4
TIE_TOL = 1e-6

_TABLE_FORMAT = 1

PAIR_KINDS = ("AA", "AB", "BA", "BB")


class PairOptimum(NamedTuple):
    """A mixed-pair value with the strategy that attains it."""

    value: float
    b: float
    c: float


def _check_a(a: float) -> float:
    a = float(a)
    if not a >= 2.0:
        raise ValueError("a must be at least 2: the shortest pair crossing "
                         "spans one block width plus one block height")
    return a


def psi_aa(params, a, L_schedule=entropy.DEFAULT_L_SCHEDULE, levels: int = 2):
    """Free energy per step across a homogeneous A pair: alpha/2 + kappa(a,1)."""
    a = _check_a(a)
    val, _ = entropy.kappa(a, 1.0, L_schedule, levels)
    return 0.5 * params.alpha + val


def psi_bb(params, a, L_schedule=entropy.DEFAULT_L_SCHEDULE, levels: int = 2):
    """Free energy per step across a homogeneous B pair: beta/2 + kappa(a,1)."""
    a = _check_a(a)
    val, _ = entropy.kappa(a, 1.0, L_schedule, levels)
    return 0.5 * params.beta + val


class BlockPairs:
    """Evaluator for the four pair free energies at one parameter point.

    Holds one interface model per mixed orientation (the BA pair sees the
    mirror interface, which is the AB one with the two solvents exchanged)
    and shares their dynamic-programming sweeps across every a requested.
    Deterministic in the seed.
    """

    def __init__(
        self,
        params,
        m_schedule=DEFAULT_M_SCHEDULE,
        samples: int = DEFAULT_SAMPLES,
        seed: int = 0,
        L_schedule=entropy.DEFAULT_L_SCHEDULE,
        levels: int = 2,
    ):
        self.params = params
        self.L_schedule = tuple(L_schedule)
        self.levels = int(levels)
        swapped = InteractionParams(params.beta, params.alpha)
        self._iface = {
            "AB": InterfaceFreeEnergy(params, m_schedule, samples, seed),
            "BA": InterfaceFreeEnergy(swapped, m_schedule, samples, seed),
        }

    def psi_aa(self, a) -> float:
        return psi_aa(self.params, a, self.L_schedule, self.levels)

    def psi_bb(self, a) -> float:
        return psi_bb(self.params, a, self.L_schedule, self.levels)

    def psi_ab(self, a, grid_nodes: int = GRID_NODES) -> PairOptimum:
        """(value, b*, c*) for the A-over-B pair."""
        return self._optimum("AB", 0.5 * self.params.alpha, _check_a(a),
                             int(grid_nodes))

    def psi_ba(self, a, grid_nodes: int = GRID_NODES) -> PairOptimum:
        """(value, b*, c*) for the B-over-A pair."""
        return self._optimum("BA", 0.5 * self.params.beta, _check_a(a),
                             int(grid_nodes))

    def psi(self, kind: str, a, grid_nodes: int = GRID_NODES):
        """Dispatch by pair kind; mixed kinds return PairOptimum."""
        if kind == "AA":
            return self.psi_aa(a)
        if kind == "BB":
            return self.psi_bb(a)
        if kind == "AB":
            return self.psi_ab(a, grid_nodes)
        if kind == "BA":
            return self.psi_ba(a, grid_nodes)
        raise ValueError(f"unknown pair kind {kind!r}")

    # ------------------------------------------------------------------
    # mixed-pair optimization

    def _kappa_node(self, mu: float, nu: float) -> float:
        return entropy.kappa(mu, nu, self.L_schedule, self.levels)[0]

    def _kappa(self, mu: float, nu: float) -> float:
        """Crossing entropy on the interpolated width surface.

        An arbitrary width fraction rounds to a different effective
        fraction at every size in the schedule, which feeds the size
        extrapolation inconsistent geometries and can inflate the result
        well past the optimizer's tolerance.  Widths are therefore only
        ever evaluated on the sixteenth grid, where nu * L is a whole
        number at each size, and interpolated linearly in between.  When
        the upper node is out of reach (mu < 1 + nu_hi) the segment ends
        on the feasibility boundary nu = mu - 1 instead, where the only
        crossings are minimal staircases and the entropy is the binomial
        mix of the rises among the steps.
        """
        if nu >= 1.0 - 1e-9:
            return self._kappa_node(mu, 1.0)
        j = int(np.floor(nu * 16.0 + 1e-9))
        nu_lo = j / 16.0
        if nu - nu_lo < 1e-9:
            return self._kappa_node(mu, nu_lo) if j > 0 else 0.0
        k_lo = self._kappa_node(mu, nu_lo) if j > 0 else 0.0
        nu_hi = (j + 1) / 16.0
        if mu >= 1.0 + nu_hi - 1e-12:
            k_hi = self._kappa_node(mu, nu_hi)
        else:
            nu_hi = mu - 1.0
            if nu_hi - nu_lo < 1e-12:
                return k_lo
            q = nu_hi / mu
            k_hi = -(q * np.log(q) + (1.0 - q) * np.log1p(-q))
        t = (nu - nu_lo) / (nu_hi - nu_lo)
        return k_lo + t * (k_hi - k_lo)

    def _phi(self, kind: str, mu: float) -> float:
        """Interface free energy per step, with the large-slope tail.

        Slopes beyond the cap outrun what the finite interface sizes
        resolve; there phi is continued linearly in 1/mu between the
        capped value and the exact infinite-slope limit, which is where
        the free energy is already flat to a few percent.
        """
        iface = self._iface[kind]
        cap = min(MU_CAP, iface.mu_max)
        if mu <= cap:
            return iface.phi(mu)[0]
        head = iface.phi(cap)[0]
        tail = iface.phi_limit()
        return tail + (head - tail) * (cap / mu)

    def _objective(self, kind: str, half: float, a: float, b: float,
                   c: float) -> float:
        """a * psi for one interior strategy (b, c).

        A long dwell inside a very thin crossing slab exceeds what the
        finite entropy sizes can resolve (a width-W box caps the path
        length at roughly (W+1)*L steps).  Such strategies are dominated,
        a slab that thin only ever pays with a near-minimal crossing, so
        the scan treats them as absent rather than extrapolating.
        """
        try:
            bulk = half + self._kappa(a - c, 1.0 - b)
        except entropy.CoverageError:
            return -np.inf
        if c == 0.0:
            return a * bulk
        return c * self._phi(kind, c / b) + (a - c) * bulk

    def _inner(self, kind: str, half: float, a: float, b: float,
               grid_nodes: int):
        """Best interior value over c at fixed b, with its optimizer.

        The c = b endpoint goes first: it carries the largest crossing
        slope seen at this b, so the entropy count caches grow once
        instead of piecemeal.
        """
        c_lo, c_hi = b, a - 2.0 + b
        best_c = c_lo
        best = self._objective(kind, half, a, b, c_lo)
        if c_hi > c_lo:
            cs = c_lo + (c_hi - c_lo) * np.arange(1, grid_nodes + 1) / grid_nodes
            vals = [self._objective(kind, half, a, b, float(c)) for c in cs]
            k = int(np.argmax(vals))
            if vals[k] > best:
                best_c, best = float(cs[k]), float(vals[k])
            lo = float(cs[k - 1]) if k > 0 else c_lo
            hi = float(cs[k + 1]) if k + 1 < len(cs) else c_hi
            if hi > lo:
                x, v = golden_max(
                    lambda c: self._objective(kind, half, a, b, float(c)),
                    lo, hi, tol=VALUE_TOL, seed_points=3,
                )
                if v > best:
                    best_c, best = float(x), float(v)
        return best, best_c

    def _optimum(self, kind: str, half: float, a: float,
                 grid_nodes: int) -> PairOptimum:
        if grid_nodes < 2:
            raise ValueError("grid_nodes must be at least 2")
        pure = a * (half + self._kappa(a, 1.0))
        best = PairOptimum(pure / a, 0.0, 0.0)

        # b = 1: the boundary carries the whole width and the exit is one
        # straight vertical column with a single path, so c = a-1 exactly
        # and the bulk keeps only its energy half.
        v1 = (a - 1.0) * self._phi(kind, a - 1.0) + half
        if v1 > a * best.value + TIE_TOL:
            best = PairOptimum(v1 / a, 1.0, a - 1.0)

        # Interior scan on nested fractions of the unit square, b strictly
        # inside (0, 1) so both entropy arguments stay in range; the
        # endpoints are the two closed-form branches above.  b stops at
        # 15/16 because a thinner crossing slab leaves the width surface
        # with no lower node, and the finite entropy sizes resolve nothing
        # there anyway; the gap to b = 1 is covered by the explicit branch
        # and continuity.
        b_hi_cap = 15.0 / 16.0
        bs = np.arange(1, grid_nodes) / grid_nodes
        bs = bs[bs <= b_hi_cap + 1e-12]
        inner = [self._inner(kind, half, a, float(b), grid_nodes) for b in bs]
        vals = np.array([v for v, _ in inner])
        k = int(np.argmax(vals))
        v_int, c_int, b_int = float(vals[k]), float(inner[k][1]), float(bs[k])

        lo = float(bs[k - 1]) if k > 0 else 1e-6
        hi = float(bs[k + 1]) if k + 1 < len(bs) else b_hi_cap
        if hi > lo:
            x, v = golden_max(
                lambda b: self._inner(kind, half, a, float(b), grid_nodes)[0],
                lo, hi, tol=VALUE_TOL, seed_points=3,
            )
            if v > v_int:
                b_int = float(x)
                v_int, c_int = self._inner(kind, half, a, b_int, grid_nodes)
        if v_int > a * best.value + TIE_TOL:
            best = PairOptimum(v_int / a, b_int, c_int)
        return best


def psi_ab(params, a, grid_nodes: int = GRID_NODES, **kwargs) -> PairOptimum:
    """One-off (value, b*, c*) for the A-over-B pair.

    Builds a fresh BlockPairs evaluator; loops should construct one
    themselves so the interface sweeps are shared.
    """
    return BlockPairs(params, **kwargs).psi_ab(a, grid_nodes)


def psi_ba(params, a, grid_nodes: int = GRID_NODES, **kwargs) -> PairOptimum:
    """One-off (value, b*, c*) for the B-over-A pair."""
    return BlockPairs(params, **kwargs).psi_ba(a, grid_nodes)


class PsiTable:
    """Dense psi values with stored optimizers on an (alpha, beta, a) grid."""

    def __init__(self, alphas, betas, a_vals, values, b_opt, c_opt, meta=None):
        self.alphas = np.asarray(alphas, dtype=float)
        self.betas = np.asarray(betas, dtype=float)
        self.a_vals = np.asarray(a_vals, dtype=float)
        self.values = {k: np.asarray(values[k], dtype=float) for k in PAIR_KINDS}
        self.b_opt = {k: np.asarray(b_opt[k], dtype=float) for k in ("AB", "BA")}
        self.c_opt = {k: np.asarray(c_opt[k], dtype=float) for k in ("AB", "BA")}
        self.meta = dict(meta or {})
        shape = (self.alphas.size, self.betas.size, self.a_vals.size)
        for k in PAIR_KINDS:
            if self.values[k].shape != shape:
                raise ValueError(f"values[{k}] shape {self.values[k].shape} "
                                 f"does not match grid {shape}")

    def _index(self, grid: np.ndarray, x: float, name: str) -> int:
        hits = np.nonzero(np.isclose(grid, x, rtol=0.0, atol=1e-9))[0]
        if hits.size == 0:
            raise entropy.CoverageError(
                f"{name}={x} is not a node of this table; rebuild with an "
                f"extended grid instead of interpolating")
        return int(hits[0])

    def value(self, kind: str, alpha: float, beta: float, a: float) -> float:
        i = self._index(self.alphas, alpha, "alpha")
        j = self._index(self.betas, beta, "beta")
        k = self._index(self.a_vals, a, "a")
        return float(self.values[kind][i, j, k])

    def optimum(self, kind: str, alpha: float, beta: float, a: float):
        """PairOptimum stored for a mixed pair at one grid node."""
        if kind not in ("AB", "BA"):
            raise ValueError("optimizers are stored for mixed pairs only")
        i = self._index(self.alphas, alpha, "alpha")
        j = self._index(self.betas, beta, "beta")
        k = self._index(self.a_vals, a, "a")
        return PairOptimum(float(self.values[kind][i, j, k]),
                           float(self.b_opt[kind][i, j, k]),
                           float(self.c_opt[kind][i, j, k]))

    def curve(self, kind: str, alpha: float, beta: float):
        """(a grid, psi values) along a at one parameter node."""
        i = self._index(self.alphas, alpha, "alpha")
        j = self._index(self.betas, beta, "beta")
        return self.a_vals.copy(), self.values[kind][i, j].copy()

    def to_json(self, path) -> None:
        payload = {
            "format": _TABLE_FORMAT,
            "alphas": self.alphas.tolist(),
            "betas": self.betas.tolist(),
            "a_vals": self.a_vals.tolist(),
            "values": {k: self.values[k].tolist() for k in PAIR_KINDS},
            "b_opt": {k: self.b_opt[k].tolist() for k in ("AB", "BA")},
            "c_opt": {k: self.c_opt[k].tolist() for k in ("AB", "BA")},
            "meta": self.meta,
        }
        with open(path, "w") as fh:
            json.dump(payload, fh)

    @classmethod
    def from_json(cls, path) -> "PsiTable":
        with open(path) as fh:
            payload = json.load(fh)
        if payload.get("format") != _TABLE_FORMAT:
            raise ValueError(f"unsupported table format {payload.get('format')}")
        return cls(payload["alphas"], payload["betas"], payload["a_vals"],
                   payload["values"], payload["b_opt"], payload["c_opt"],
                   payload.get("meta"))


def build_psi_tables(
    alphas,
    betas,
    a_vals,
    m_schedule=DEFAULT_M_SCHEDULE,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    L_schedule=entropy.DEFAULT_L_SCHEDULE,
    levels: int = 2,
    grid_nodes: int = GRID_NODES,
) -> PsiTable:
    """Evaluate every pair kind on a dense (alpha, beta, a) grid.

    One BlockPairs evaluator per parameter node keeps the interface
    sweeps shared across the whole a row.  Rebuilding with the same
    arguments reproduces the table bit for bit.
    """
    alphas = np.asarray(sorted(float(x) for x in alphas))
    betas = np.asarray(sorted(float(x) for x in betas))
    a_vals = np.asarray(sorted(_check_a(x) for x in a_vals))
    shape = (alphas.size, betas.size, a_vals.size)
    values = {k: np.empty(shape) for k in PAIR_KINDS}
    b_opt = {k: np.full(shape, np.nan) for k in ("AB", "BA")}
    c_opt = {k: np.full(shape, np.nan) for k in ("AB", "BA")}
    for i, al in enumerate(alphas):
        for j, be in enumerate(betas):
            pairs = BlockPairs(InteractionParams(al, be), m_schedule,
                               samples, seed, L_schedule, levels)
            for k, a in enumerate(a_vals):
                values["AA"][i, j, k] = pairs.psi_aa(a)
                values["BB"][i, j, k] = pairs.psi_bb(a)
                for kind in ("AB", "BA"):
                    opt = pairs.psi(kind, a, grid_nodes)
                    values[kind][i, j, k] = opt.value
                    b_opt[kind][i, j, k] = opt.b
                    c_opt[kind][i, j, k] = opt.c
    meta = {
        "m_schedule": list(m_schedule),
        "samples": int(samples),
        "seed": int(seed),
        "L_schedule": list(L_schedule),
        "levels": int(levels),
        "grid_nodes": int(grid_nodes),
    }
    return PsiTable(alphas, betas, a_vals, values, b_opt, c_opt, meta)
