"""Quenched free energy assembled from block-pair tables.

The long-run free energy per step is a best ratio: a strategy chooses how
long a visit to each kind of block pair lasts (the times a_kl) and how
often each kind is visited (the frequencies rho_kl), and its value is the
visit-weighted mean of the pair values psi_kl.  Dinkelbach's scheme turns
the ratio into a sequence of linear problems: at a trial level lam the
gain sup over strategies of Sum rho_kl a_kl (psi_kl(a_kl) - lam) factors
into an independent 1D maximisation per pair kind followed by a linear
step over the frequency polytope, and the level is raised to the ratio
attained at the maximiser until the gain drops to zero.  Levels only ever
rise, and the final gain is the reported residual.

Frequencies live in the polytope {rho >= 0, Sum rho = 1,
rho_AA + rho_AB <= rho_star_A, rho_BA + rho_BB <= rho_star_B}: a row cap
says the path cannot cross A-blocks (resp. B-blocks) more often than the
best directed path through the emulsion reaches them.  The caps leave the
column splits free.  The linear step is solved exactly by enumerating the
polytope's vertices, of which there are at most eight.

Pair values along the visit-time axis come from a PsiTable and are
interpolated with a shape-preserving cubic, so the inner maximisations
see a smooth curve; interpolation never overshoots the node range, and
its error is part of the reported tolerance budget.

Parameters outside the cone alpha >= |beta| should be folded in with
model.cone_reduce before tables are built; the fold is exact.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .blockpairs import PAIR_KINDS, VALUE_TOL, PsiTable
from .model import InteractionParams
from .util import golden_max

# a visit to a block pair always needs at least one two-step excursion
MIN_BLOCK_TIME = 2.0

DEFAULT_LEVEL_TOL = 1e-8
MAX_ITERATIONS = 60

# a mixed kind must beat its same-label kind by more than the tables' own
# value tolerance before it wins a row; smaller excesses are sampling
# noise on top of an exact tie (a mixed pair whose best strategy ignores
# the interface has the same value as the same-label pair), and resolving
# them toward the same-label kind keeps reported frequencies conservative
# about localization
KIND_TIE_TOL = 1e-4


@dataclass(frozen=True)
class BlockTimeMatrix:
    """Visit lengths per block-pair kind, in steps per unit of block size."""

    aa: float
    ab: float
    ba: float
    bb: float

    def __post_init__(self):
        for name, v in self.as_dict().items():
            if not v >= MIN_BLOCK_TIME - 1e-9:
                raise ValueError(f"a_{name} = {v} is below the 2-step floor")

    def as_dict(self) -> dict:
        return {"AA": self.aa, "AB": self.ab, "BA": self.ba, "BB": self.bb}


@dataclass(frozen=True)
class VisitFrequencyMatrix:
    """How often each block-pair kind is visited; a probability vector."""

    aa: float
    ab: float
    ba: float
    bb: float

    def __post_init__(self):
        vals = self.as_dict()
        if min(vals.values()) < -1e-9:
            raise ValueError("negative visit frequency")
        total = sum(vals.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"visit frequencies sum to {total}, not 1")

    @property
    def row_a(self) -> float:
        """Fraction of visits whose crossed block is an A-block."""
        return self.aa + self.ab

    @property
    def row_b(self) -> float:
        return self.ba + self.bb

    def as_dict(self) -> dict:
        return {"AA": self.aa, "AB": self.ab, "BA": self.ba, "BB": self.bb}


@dataclass(frozen=True)
class FreeEnergyResult:
    """One free-energy evaluation with its optimizer and error budget."""

    params: InteractionParams
    p: float
    f: float
    times: BlockTimeMatrix
    freqs: VisitFrequencyMatrix
    iterations: int
    residual: float
    bracket_breach: bool
    meta: dict = field(default_factory=dict)


class _CellCurve:
    """One pair kind's a -> a*psi(a) gain curve, smoothly interpolated."""

    def __init__(self, a_vals, psi_vals):
        a_vals = np.asarray(a_vals, dtype=float)
        psi_vals = np.asarray(psi_vals, dtype=float)
        self.a_lo = float(a_vals[0])
        self.a_hi = float(a_vals[-1])
        self.nodes = int(a_vals.size)
        if self.nodes == 1:
            self._gain = None
            self._g0 = float(a_vals[0] * psi_vals[0])
        else:
            self._gain = PchipInterpolator(a_vals, a_vals * psi_vals)

    def best(self, lam: float):
        """(a*, m) with m = sup over the bracket of a * (psi(a) - lam)."""
        if self.nodes == 1:
            return self.a_lo, self._g0 - lam * self.a_lo
        a, m = golden_max(
            lambda a: float(self._gain(a)) - lam * a,
            self.a_lo,
            self.a_hi,
            tol=1e-6,
            seed_points=max(9, 2 * self.nodes - 1),
        )
        return float(a), float(m)


def _check_cap(value: float, name: str) -> float:
    v = float(value)
    if not -1e-9 <= v <= 1.0 + 1e-9:
        raise ValueError(f"{name} = {value} is not a frequency in [0, 1]")
    return min(max(v, 0.0), 1.0)


def _split_bounds(cap_a: float, cap_b: float):
    """Feasible range for the A-row visit mass s = rho_AA + rho_AB."""
    s_lo = max(0.0, 1.0 - cap_b)
    s_hi = min(1.0, cap_a)
    if s_lo > s_hi + 1e-12:
        raise ValueError(
            f"visit caps rho_star_A={cap_a} and rho_star_B={cap_b} "
            f"leave no feasible frequency split"
        )
    return s_lo, max(s_lo, s_hi)


def _vertex_split(gain: dict, s_lo: float, s_hi: float):
    """Maximise Sum rho_kl * gain_kl over the frequency polytope.

    The objective is linear, so the optimum sits at a vertex: the A-row
    mass s at an end of its feasible range and each row's mass on one
    kind.  A mixed kind needs a margin of KIND_TIE_TOL over the same-label
    kind to win its row, and row-mass ties go to the larger A-row mass, so
    repeated runs pick the same vertex and noise never flips a row.
    """
    kind_a = "AB" if gain["AB"] > gain["AA"] + KIND_TIE_TOL else "AA"
    kind_b = "BA" if gain["BA"] > gain["BB"] + KIND_TIE_TOL else "BB"
    best_a, best_b = gain[kind_a], gain[kind_b]
    s = s_hi if best_a >= best_b else s_lo
    rho = dict.fromkeys(PAIR_KINDS, 0.0)
    rho[kind_a] = s
    rho[kind_b] = 1.0 - s
    return s * best_a + (1.0 - s) * best_b, rho


def evaluate_f(
    params: InteractionParams,
    p: float,
    tables: PsiTable,
    rho_star_A: float,
    rho_star_B: float,
    tol: float = DEFAULT_LEVEL_TOL,
    max_iter: int = MAX_ITERATIONS,
) -> FreeEnergyResult:
    """Free energy at one parameter point from a covering PsiTable.

    rho_star_A and rho_star_B are the maximal crossing frequencies of
    A-blocks (density p) and B-blocks (density 1 - p); they bound the row
    masses of the visit-frequency polytope.  The level iteration starts
    from the value of a feasible strategy built on table nodes, so the
    level trace (meta["level_trace"]) is nondecreasing, and it stops once
    the auxiliary gain is at most tol, which brackets f within tol / 2 of
    the returned level.  The time bracket is the table's a-grid span; an
    inner maximiser pinned to the top of the bracket is reported through
    bracket_breach, meaning the table should be rebuilt with a longer
    a-grid.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    cap_a = _check_cap(rho_star_A, "rho_star_A")
    cap_b = _check_cap(rho_star_B, "rho_star_B")
    s_lo, s_hi = _split_bounds(cap_a, cap_b)

    cells = {}
    node_best = {}
    for kind in PAIR_KINDS:
        a_vals, psi_vals = tables.curve(kind, params.alpha, params.beta)
        cells[kind] = _CellCurve(a_vals, psi_vals)
        k = int(np.argmax(psi_vals))
        node_best[kind] = (float(a_vals[k]), float(psi_vals[k]))

    # start the level at the value of one feasible strategy (each row on
    # its plainly better kind, row masses at the favoured end), so every
    # later level is a true ratio and the sequence can only rise
    a_a, v_a = node_best["AA"] if node_best["AA"][1] >= node_best["AB"][1] else node_best["AB"]
    a_b, v_b = node_best["BB"] if node_best["BB"][1] >= node_best["BA"][1] else node_best["BA"]
    s0 = s_hi if v_a >= v_b else s_lo
    lam = (s0 * a_a * v_a + (1.0 - s0) * a_b * v_b) / (s0 * a_a + (1.0 - s0) * a_b)

    trace = [lam]
    breach = False
    residual = np.inf
    times = {}
    rho = {}
    iterations = 0
    for iterations in range(1, max_iter + 1):
        gain = {}
        for kind in PAIR_KINDS:
            a_star, m = cells[kind].best(lam)
            cell = cells[kind]
            if cell.nodes > 1 and cell.a_hi - a_star <= 1e-4 * (cell.a_hi - cell.a_lo):
                breach = True
            times[kind] = a_star
            gain[kind] = m
        value, rho = _vertex_split(gain, s_lo, s_hi)
        if value <= tol:
            residual = value
            break
        visit_time = sum(rho[k] * times[k] for k in PAIR_KINDS)
        lam += value / visit_time
        trace.append(lam)
    else:
        raise RuntimeError(
            f"level iteration did not close within {max_iter} steps; "
            f"last levels {trace[-3:]}, last gain {value}"
        )

    meta = {
        "rho_star_A": cap_a,
        "rho_star_B": cap_b,
        "level_trace": trace,
        "tolerances": {
            "level": tol,
            "pair_value": VALUE_TOL,
            "table": dict(tables.meta),
        },
    }
    return FreeEnergyResult(
        params=params,
        p=float(p),
        f=lam,
        times=BlockTimeMatrix(times["AA"], times["AB"], times["BA"], times["BB"]),
        freqs=VisitFrequencyMatrix(rho["AA"], rho["AB"], rho["BA"], rho["BB"]),
        iterations=iterations,
        residual=residual,
        bracket_breach=breach,
        meta=meta,
    )


def f_surface(
    alphas,
    betas,
    p: float,
    tables: PsiTable,
    rho_star_A: float,
    rho_star_B: float,
    tol: float = DEFAULT_LEVEL_TOL,
) -> list:
    """Free energy over a parameter grid, optimizers retained.

    Rows come out in row-major order (alpha outer, beta inner).  The
    evaluation is deterministic, so rebuilding with the same inputs gives
    an identical surface.
    """
    out = []
    for al in alphas:
        for be in betas:
            out.append(
                evaluate_f(
                    InteractionParams(float(al), float(be)),
                    p, tables, rho_star_A, rho_star_B, tol,
                )
            )
    return out


SURFACE_COLUMNS = (
    "alpha", "beta", "p", "f",
    "a_AA", "a_AB", "a_BA", "a_BB",
    "rho_AA", "rho_AB", "rho_BA", "rho_BB",
    "residual",
)


def _surface_row(res: FreeEnergyResult) -> list:
    t, r = res.times.as_dict(), res.freqs.as_dict()
    return (
        [res.params.alpha, res.params.beta, res.p, res.f]
        + [t[k] for k in PAIR_KINDS]
        + [r[k] for k in PAIR_KINDS]
        + [res.residual]
    )


def surface_to_csv(results, path) -> None:
    """Write a surface as CSV with one row per parameter point."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SURFACE_COLUMNS)
        for res in results:
            writer.writerow([repr(float(x)) for x in _surface_row(res)])


def surface_to_json(results, path, extra_meta=None) -> None:
    """Write a surface as JSON, carrying the shared tolerance metadata."""
    meta = {}
    if results:
        meta = {k: v for k, v in results[0].meta.items() if k != "level_trace"}
    if extra_meta:
        meta.update(extra_meta)
    payload = {
        "format": 1,
        "columns": list(SURFACE_COLUMNS),
        "rows": [[float(x) for x in _surface_row(res)] for res in results],
        "meta": meta,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)
