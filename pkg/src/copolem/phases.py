"""Phase classification, critical-curve tracing, and phase-diagram assembly.

The localized phase is where the polymer gains strictly more than the best
delocalized strategy by running along oil-water interfaces.  Whether that
happens at a parameter point is decided by the interface excess

    S(alpha, beta) = sup_{mu >= 1} mu * [phi(mu) - alpha/2 - kappa_max]

where phi is the single-interface free energy per step at slope mu and
kappa_max = (1/2) log 5 is the crossing-entropy ceiling of a diagonally
traversed block.  The excess weighs the interface premium against the
entropy lost by steepening the rest of the crossing; localization sets in
exactly when S clears a fixed positive threshold, (1/2) log (9/5).  The
criterion involves no block density: when the favored solvent percolates,
the density only decides that the delocalized reference is the all-A one.

On top of that criterion this module provides:

* ``trace_beta_c``: bisection for the critical curve beta_c(alpha).  The
  curve has two regimes: a diagonal piece beta_c = alpha at small alpha
  (the predicate never fires below the diagonal, but does above it) and an
  interior crossing beta_c < alpha beyond the departure point alpha_star.
* ``transition_order_probe``: measures f(alpha, beta_c + delta) - f(alpha,
  beta_c) on a geometric delta grid and fits the growth exponent; a value
  near 2 means the transition is second order along that cut.
* ``classify_subcritical``: a four-way label for points where the oil does
  not percolate, read off the structure of the realized optimizer.  A
  mixed block pair is "entered" when its pair value strictly exceeds the
  matching same-solvent pair value (the optimizer bends into the
  interface layer of the neighboring block), and "localized" when, in
  addition, the interface excess for that pair's orientation clears the
  threshold.  Never entered is D1; entered without localization is D2
  (the path dips across the interface but takes the interface free energy
  at its delocalized value); localization in the pairs that cross the
  less-favored solvent only is L1; in both pair types it is L2.
* ``phase_diagram``: labels a rectangular in-cone grid, extracts boundary
  polylines and triple junctions.  Boundary curves are peeled in the
  delocalization order (D1, D2, L1, L2, or D, L): curve k separates the
  k-th region from the union of the later ones, which reproduces the
  natural count of distinct critical curves when several regions meet at
  a junction.

Free energies are evaluated through the ratio solver on a shared pair
table, so one table build serves a whole diagram and all interface sweeps
behind the localization excess are cached in an ``InterfaceBank``.
"""

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .blockpairs import MU_CAP, PsiTable, build_psi_tables
from .entropy import CoverageError
from .freeenergy import FreeEnergyResult, evaluate_f
from .interface import InterfaceFreeEnergy, exact_slope_grid
from .model import InteractionParams, cone_reduce
from .percolation import BracketError, rho_star
from .util import golden_max

HALF_LOG5 = 0.5 * math.log(5.0)

# Localization threshold for the interface excess, used verbatim: the
# entropy cost of rerouting a block crossing through the interface.
LOCALIZATION_THRESHOLD = 0.5 * math.log(9.0 / 5.0)

# Excess must clear the threshold by this much before a point is called
# localized; smaller excesses are within the Monte-Carlo noise of the
# interface sweeps, and ties go to the delocalized label.
LOC_MARGIN = 1e-3

# A mixed pair value must beat its same-solvent partner by this much
# before the pair counts as entering the neighboring block.
ENTER_TOL = 2e-4

# rho* at or above this is treated as percolating (exactly one when the
# favored solvent percolates, estimated with downward finite-size bias).
PERCOLATED_CAP = 0.995

DEFAULT_DELTAS = (0.02, 0.04, 0.08, 0.16)
DEFAULT_BETA_CAP = 4.0

# Module-default schedules for curve tracing; each predicate evaluation
# costs a fresh set of interface sweeps, so these sit below the
# table-building defaults.
TRACE_M_SCHEDULE = (100, 200, 400)
TRACE_SAMPLES = 4

SUBCRITICAL_ORDER = ("D1", "D2", "L1", "L2")
SUPERCRITICAL_ORDER = ("D", "L")

LOCALIZED_LABELS = frozenset({"L", "L1", "L2"})


# ---------------------------------------------------------------------------
# localization excess


def localization_excess(params, interface, bulk_reward=None):
    """Interface excess S at one parameter point.

    ``interface`` is either a dense interface table or a sweep-backed
    evaluator; with an evaluator the supremum runs over every slope the
    size schedule resolves exactly, up to the slope cap, so no extra
    dynamic programming is triggered beyond the cached sweeps.

    ``bulk_reward`` is the per-step reward rate of the delocalized
    strategy the interface run competes against.  It defaults to
    ``params.alpha``, the ride through the percolating solvent that the
    supercritical criterion compares against.  The pair-pinning variant
    passes ``max(alpha, beta)`` instead: an interface path that is not
    pinned by the disorder can always drift off along its better side,
    so only value above that escape counts as localization.
    """
    if bulk_reward is None:
        bulk_reward = params.alpha
    ref = 0.5 * float(bulk_reward) + HALF_LOG5
    if hasattr(interface, "mu_grid"):
        if (abs(interface.alpha - params.alpha) > 1e-9
                or abs(interface.beta - params.beta) > 1e-9):
            raise CoverageError(
                f"interface table holds ({interface.alpha}, {interface.beta}), "
                f"not ({params.alpha}, {params.beta})")
        mus = np.asarray(interface.mu_grid, dtype=float)
        phis = np.asarray(interface.phi_vals, dtype=float)
        keep = mus >= 1.0 - 1e-12
        if not keep.any():
            raise CoverageError("interface table has no slopes at or above 1")
        return float(np.max(mus[keep] * (phis[keep] - ref)))
    cap = min(MU_CAP, interface.mu_max)
    best = -math.inf
    for mu in exact_slope_grid(interface.m_schedule, cap):
        mu = float(mu)
        val = mu * (interface.phi(mu)[0] - ref)
        if val > best:
            best = val
    return best


class InterfaceBank:
    """Cache of interface evaluators and their excesses, keyed by point.

    Every operation in this module that needs the localization predicate
    at many parameter points shares one bank, so each point pays for its
    dynamic-programming sweeps exactly once per process.
    """

    def __init__(self, m_schedule=TRACE_M_SCHEDULE, samples=TRACE_SAMPLES,
                 seed=0):
        self.m_schedule = tuple(int(m) for m in m_schedule)
        self.samples = int(samples)
        self.seed = int(seed)
        self._evals = {}
        self._excess = {}
        self._pin = {}

    @classmethod
    def from_table_meta(cls, meta):
        """Bank matching the schedules a pair table was built with."""
        return cls(tuple(meta["m_schedule"]), int(meta["samples"]),
                   int(meta["seed"]))

    def _key(self, alpha, beta):
        return (round(float(alpha), 9), round(float(beta), 9))

    def evaluator(self, alpha, beta) -> InterfaceFreeEnergy:
        key = self._key(alpha, beta)
        ev = self._evals.get(key)
        if ev is None:
            ev = InterfaceFreeEnergy(InteractionParams(key[0], key[1]),
                                     self.m_schedule, self.samples, self.seed)
            self._evals[key] = ev
        return ev

    def excess(self, alpha, beta) -> float:
        """Supercritical-form excess: delocalized reference alpha/2."""
        key = self._key(alpha, beta)
        out = self._excess.get(key)
        if out is None:
            out = localization_excess(InteractionParams(key[0], key[1]),
                                      self.evaluator(alpha, beta))
            self._excess[key] = out
        return out

    def pin_excess(self, alpha, beta) -> float:
        """Pinning-form excess: reference is the better of the two sides."""
        key = self._key(alpha, beta)
        out = self._pin.get(key)
        if out is None:
            out = localization_excess(InteractionParams(key[0], key[1]),
                                      self.evaluator(alpha, beta),
                                      bulk_reward=max(key))
            self._pin[key] = out
        return out

    def localized(self, alpha, beta, margin: float = LOC_MARGIN) -> bool:
        return self.excess(alpha, beta) > LOCALIZATION_THRESHOLD + margin


def _bank_for(tables, bank):
    if bank is not None:
        return bank
    return InterfaceBank.from_table_meta(tables.meta)


# ---------------------------------------------------------------------------
# critical curve


def _bisect(pred, lo: float, hi: float, tol: float) -> float:
    """Smallest root bracket midpoint: pred(lo) is False, pred(hi) True."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def trace_beta_c(alpha, p, tol: float = 1e-3, m_schedule=TRACE_M_SCHEDULE,
                 samples: int = TRACE_SAMPLES, seed: int = 0,
                 beta_cap: float = DEFAULT_BETA_CAP, bank=None) -> float:
    """Critical beta at one alpha, to bisection tolerance ``tol``.

    The localization predicate is scanned in beta below the diagonal
    first.  A crossing there is the curve point.  No crossing means the
    curve rides the diagonal at this alpha, which is only reported as
    such after confirming that the predicate does switch on somewhere in
    (alpha, beta_cap]; a predicate that never switches (after widening
    the bracket once) is an error, not a curve point.

    ``p`` is accepted for interface symmetry with the rest of the module
    and validated, but the predicate itself does not involve the block
    density.
    """
    alpha = float(alpha)
    if alpha < 0.0:
        raise ValueError("alpha must be nonnegative")
    if not 0.0 <= float(p) <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if bank is None:
        bank = InterfaceBank(m_schedule, samples, seed)

    def localized(beta):
        return bank.localized(alpha, beta)

    if alpha == 0.0:
        # The cone degenerates to the single point beta = 0.
        return 0.0
    if localized(0.0):
        # Unexpected: no interface reward at beta = 0 should localize.
        # Widen downward once before giving up.
        if localized(-alpha):
            raise BracketError(
                f"localization predicate holds on all of "
                f"[{-alpha}, {alpha}] at alpha={alpha}")
        return _bisect(localized, -alpha, 0.0, tol)
    if localized(alpha):
        return _bisect(localized, 0.0, alpha, tol)
    hi = max(float(beta_cap), alpha + tol)
    if not localized(hi) and not localized(2.0 * hi):
        raise BracketError(
            f"localization predicate constant over [0, {2.0 * hi}] at "
            f"alpha={alpha}; no critical point to trace")
    return alpha


def locate_alpha_star(p, tol: float = 1e-3, m_schedule=TRACE_M_SCHEDULE,
                      samples: int = TRACE_SAMPLES, seed: int = 0,
                      alpha_cap: float = DEFAULT_BETA_CAP, bank=None) -> float:
    """Departure point of the critical curve from the diagonal.

    Bisects the localization predicate along the diagonal beta = alpha,
    where it flips exactly once; below the root the curve is the
    diagonal itself, above it the crossing moves inside the cone.
    """
    if not 0.0 <= float(p) <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if bank is None:
        bank = InterfaceBank(m_schedule, samples, seed)

    def on_diagonal(a):
        return bank.localized(a, a)

    hi = float(alpha_cap)
    if not on_diagonal(hi):
        hi = 2.0 * hi
        if not on_diagonal(hi):
            raise BracketError(
                f"diagonal stays delocalized up to alpha={hi}; "
                f"no departure point in the bracket")
    if on_diagonal(0.0):
        return 0.0
    return _bisect(on_diagonal, 0.0, hi, tol)


@dataclass(frozen=True)
class CriticalCurve:
    """Sampled critical curve with its diagonal departure point."""

    p: float
    alphas: tuple
    betas: tuple
    alpha_star: float
    slope_discontinuity_detected: bool
    tol: float

    def samples(self):
        return list(zip(self.alphas, self.betas))


def critical_curve(alphas, p, tol: float = 1e-3,
                   m_schedule=TRACE_M_SCHEDULE, samples: int = TRACE_SAMPLES,
                   seed: int = 0, beta_cap: float = DEFAULT_BETA_CAP,
                   probe_step: float = 0.15, bank=None) -> CriticalCurve:
    """Trace beta_c over an alpha grid and flag the diagonal departure.

    The departure point alpha_star is located on the diagonal, where the
    curve sits at beta_c = alpha_star with unit slope from below.  The
    slope flag is set when the secant from there to the traced point at
    alpha_star + probe_step drops clearly below one: a curve leaving the
    diagonal can only do so with a slope break, so a sub-unit secant
    right past the departure is the discontinuity.  When the departure
    lies outside the bracket the coarse grid secants are used instead.
    """
    alphas = [float(a) for a in alphas]
    if sorted(alphas) != alphas:
        raise ValueError("alpha grid must be sorted ascending")
    if bank is None:
        bank = InterfaceBank(m_schedule, samples, seed)
    betas = [trace_beta_c(a, p, tol, beta_cap=beta_cap, bank=bank)
             for a in alphas]

    star = math.nan
    try:
        star = locate_alpha_star(p, tol, alpha_cap=max(alphas[-1], 1.0),
                                 bank=bank)
    except BracketError:
        pass

    detected = False
    if math.isfinite(star):
        probe_alpha = star + float(probe_step)
        probe_beta = trace_beta_c(probe_alpha, p, tol, beta_cap=beta_cap,
                                  bank=bank)
        secant = (probe_beta - star) / float(probe_step)
        drop = max(0.15, 4.0 * tol / float(probe_step))
        detected = secant < 1.0 - drop
    else:
        on_diag = [abs(b - a) <= 2.0 * tol for a, b in zip(alphas, betas)]
        if any(on_diag) and not all(on_diag):
            k = max(i for i, flag in enumerate(on_diag) if flag)
            if k + 1 < len(alphas):
                da = alphas[k + 1] - alphas[k]
                secant = (betas[k + 1] - betas[k]) / da
                detected = secant < 1.0 - max(0.15, 4.0 * tol / da)
    return CriticalCurve(float(p), tuple(alphas), tuple(betas), star,
                         detected, float(tol))


# ---------------------------------------------------------------------------
# transition order


@dataclass(frozen=True)
class TransitionProbe:
    """Growth of the free energy just above the critical curve."""

    alpha: float
    p: float
    beta_c: float
    deltas: tuple
    delta_f: tuple
    exponent: float
    c1: float
    c2: float
    delta0: float
    used: tuple
    noise_floor: float


def _fit_exponent(deltas, gaps) -> float:
    slope = np.polyfit(np.log(deltas), np.log(gaps), 1)[0]
    return float(slope)


def _resolve_caps(p, rho_star_A, rho_star_B, length, samples, seed):
    if rho_star_A is None:
        rho_star_A = rho_star(p, length, samples, seed).rho_star
    if rho_star_B is None:
        rho_star_B = rho_star(1.0 - p, length, samples, seed).rho_star
    return min(max(float(rho_star_A), 0.0), 1.0), \
        min(max(float(rho_star_B), 0.0), 1.0)


DEFAULT_A_GRID = tuple(np.concatenate([np.arange(2.0, 4.0 + 1e-9, 0.25),
                                       [5.0, 6.0, 8.0, 10.0]]))


def transition_order_probe(alpha, p, deltas=DEFAULT_DELTAS, *, beta_c=None,
                           tol: float = 5e-4, a_grid=DEFAULT_A_GRID,
                           m_schedule=TRACE_M_SCHEDULE,
                           samples: int = TRACE_SAMPLES, seed: int = 0,
                           L_schedule=(16, 32, 64), levels: int = 2,
                           grid_nodes: int = 16, rho_star_A=None,
                           rho_star_B=None, perc_length: int = 256,
                           perc_samples: int = 32,
                           noise_floor: float = 2e-4,
                           bank=None) -> TransitionProbe:
    """Fit the growth exponent of f across the critical curve at one alpha.

    Evaluates f at beta_c and at beta_c + delta for each delta, all from
    one pair table built with a common seed so the disorder noise in the
    interface sweeps largely cancels in the differences.  Deltas whose
    gap sits below the noise floor are excluded from the fit; the largest
    delta is dropped (once at a time) while its presence moves the fitted
    exponent by more than 0.25, and the largest surviving delta is
    reported as the clean power-law range.
    """
    alpha = float(alpha)
    deltas = sorted(float(d) for d in deltas)
    if not deltas or deltas[0] <= 0.0:
        raise ValueError("deltas must be positive")
    if bank is None:
        bank = InterfaceBank(m_schedule, samples, seed)
    if not bank.localized(alpha, alpha):
        raise ValueError(
            f"alpha={alpha} lies on the diagonal piece of the critical "
            f"curve; the order probe needs the interior crossing regime")
    if beta_c is None:
        beta_c = trace_beta_c(alpha, p, tol, bank=bank)
    beta_c = float(beta_c)
    if beta_c + deltas[-1] > alpha:
        raise ValueError(
            f"beta_c + max delta = {beta_c + deltas[-1]} leaves the cone "
            f"at alpha={alpha}; shrink the delta grid or move alpha up")

    cap_a, cap_b = _resolve_caps(p, rho_star_A, rho_star_B, perc_length,
                                 perc_samples, seed + 1)
    betas = [beta_c] + [beta_c + d for d in deltas]
    tab = build_psi_tables([alpha], betas, a_grid, m_schedule, samples,
                           seed, L_schedule, levels, grid_nodes)
    fs = [evaluate_f(InteractionParams(alpha, b), p, tab, cap_a, cap_b).f
          for b in betas]
    gaps = [f - fs[0] for f in fs[1:]]
    for d, g in zip(deltas, gaps):
        if g < -noise_floor:
            raise RuntimeError(
                f"free energy dropped by {-g:.2e} at delta={d}; the traced "
                f"crossing point is suspect")

    usable = [(d, g) for d, g in zip(deltas, gaps) if g > noise_floor]
    if len(usable) < 2:
        raise RuntimeError(
            f"transition signal below the noise floor {noise_floor} at "
            f"every delta; largest gap {max(gaps):.2e}")
    kept = list(usable)
    while len(kept) > 2:
        full = _fit_exponent([d for d, _ in kept], [g for _, g in kept])
        trimmed = _fit_exponent([d for d, _ in kept[:-1]],
                                [g for _, g in kept[:-1]])
        if abs(full - trimmed) <= 0.25:
            break
        kept = kept[:-1]
    exponent = _fit_exponent([d for d, _ in kept], [g for _, g in kept])
    ratios = [g / (d * d) for d, g in kept]
    return TransitionProbe(alpha, float(p), beta_c, tuple(deltas),
                           tuple(gaps), exponent, min(ratios), max(ratios),
                           kept[-1][0], tuple(d for d, _ in kept),
                           float(noise_floor))


def diagonal_first_order_gap(alpha, p, h: float = 0.1, *,
                             a_grid=DEFAULT_A_GRID,
                             m_schedule=TRACE_M_SCHEDULE,
                             samples: int = TRACE_SAMPLES, seed: int = 0,
                             L_schedule=(16, 32, 64), levels: int = 2,
                             grid_nodes: int = 16, rho_star_A=None,
                             rho_star_B=None, perc_length: int = 256,
                             perc_samples: int = 32):
    """One-sided slopes of f at the diagonal: (below in beta, along it).

    On the diagonal piece of the critical curve the free energy is flat
    in beta from below (the delocalized value does not involve beta) but
    grows at rate one half along the diagonal itself; the mismatch of
    the two one-sided slopes is the signature of a first-order fold
    across the diagonal segment.  Returns (below_slope, along_slope).
    """
    alpha = float(alpha)
    h = float(h)
    if h <= 0.0 or h > alpha:
        raise ValueError("need 0 < h <= alpha to stay inside the cone")
    cap_a, cap_b = _resolve_caps(p, rho_star_A, rho_star_B, perc_length,
                                 perc_samples, seed + 1)
    tab_lo = build_psi_tables([alpha], [alpha - h, alpha], a_grid,
                              m_schedule, samples, seed, L_schedule, levels,
                              grid_nodes)
    tab_hi = build_psi_tables([alpha + h], [alpha + h], a_grid, m_schedule,
                              samples, seed, L_schedule, levels, grid_nodes)
    f_below = evaluate_f(InteractionParams(alpha, alpha - h), p, tab_lo,
                         cap_a, cap_b).f
    f_on = evaluate_f(InteractionParams(alpha, alpha), p, tab_lo,
                      cap_a, cap_b).f
    f_diag = evaluate_f(InteractionParams(alpha + h, alpha + h), p, tab_hi,
                        cap_a, cap_b).f
    return (f_on - f_below) / h, (f_diag - f_on) / h


# ---------------------------------------------------------------------------
# subcritical classification


def _interp_at(a_grid, vals, a):
    if a_grid.size == 1:
        return float(vals[0])
    a = min(max(float(a), float(a_grid[0])), float(a_grid[-1]))
    return float(PchipInterpolator(a_grid, vals)(a))


def _pair_state(tables, alpha, beta, kind, plain_kind, rho_val, a_val,
                enter_tol):
    """Visit, entry, and stored optimizer summary for one mixed pair."""
    a_grid, mixed = tables.curve(kind, alpha, beta)
    _, plain = tables.curve(plain_kind, alpha, beta)
    gap = _interp_at(a_grid, mixed, a_val) - _interp_at(a_grid, plain, a_val)
    node = int(np.argmin(np.abs(a_grid - a_val)))
    opt = tables.optimum(kind, alpha, beta, float(a_grid[node]))
    visited = rho_val > 1e-6
    return {
        "rho": float(rho_val),
        "a": float(a_val),
        "gap": float(gap),
        "b": opt.b,
        "c": opt.c,
        "visited": visited,
        "entered": bool(visited and gap > enter_tol),
    }


def _classify_detail(params, f_result, tables, bank, enter_tol, loc_margin):
    al, be = params.alpha, params.beta
    state = {
        "AB": _pair_state(tables, al, be, "AB", "AA", f_result.freqs.ab,
                          f_result.times.ab, enter_tol),
        "BA": _pair_state(tables, al, be, "BA", "BB", f_result.freqs.ba,
                          f_result.times.ba, enter_tol),
    }
    s_ab = bank.pin_excess(al, be)
    s_ba = bank.pin_excess(be, al)
    state["AB"]["excess"] = s_ab
    state["BA"]["excess"] = s_ba
    state["AB"]["entry_excess"] = bank.excess(al, be)
    state["BA"]["entry_excess"] = bank.excess(be, al)
    loc_ab = state["AB"]["entered"] and \
        s_ab > LOCALIZATION_THRESHOLD + loc_margin
    loc_ba = state["BA"]["entered"] and \
        s_ba > LOCALIZATION_THRESHOLD + loc_margin
    state["AB"]["localized"] = loc_ab
    state["BA"]["localized"] = loc_ba
    if loc_ab and loc_ba:
        label = "L2"
    elif loc_ab or loc_ba:
        label = "L1"
    elif state["AB"]["entered"] or state["BA"]["entered"]:
        label = "D2"
    else:
        label = "D1"
    return label, state


def classify_subcritical(params, p, f_result: FreeEnergyResult,
                         tables: PsiTable, *, bank=None,
                         enter_tol: float = ENTER_TOL,
                         loc_margin: float = LOC_MARGIN) -> str:
    """Four-way label for a point where the favored solvent is subcritical.

    Reads the realized optimizer out of ``f_result`` (built on ``tables``)
    and the interface excesses for both pair orientations.  All the
    margins break ties toward the more delocalized label, so noise never
    promotes a point into a localized phase.
    """
    if not 0.0 < float(p) < 1.0:
        raise ValueError("p must lie strictly inside (0, 1)")
    label, _ = _classify_detail(params, f_result, tables,
                                _bank_for(tables, bank), enter_tol,
                                loc_margin)
    return label


# ---------------------------------------------------------------------------
# phase diagram


@dataclass(frozen=True)
class PhasePoint:
    """One labeled grid point with its optimizer summary."""

    alpha: float
    beta: float
    p: float
    f: float
    label: str
    s_excess: float
    detail: dict = field(repr=False)

    @property
    def params(self) -> InteractionParams:
        return InteractionParams(self.alpha, self.beta)


@dataclass(frozen=True)
class PhaseDiagram:
    """Labeled grid with extracted boundaries and junctions.

    ``labels[i][j]`` corresponds to ``(alphas[i], betas[j])`` and is None
    outside the cone.  ``curves`` holds the order-peeled boundary
    polylines; ``junctions`` the grid corners where at least three labels
    meet, with half-cell error bars.
    """

    p: float
    alphas: tuple
    betas: tuple
    labels: tuple
    f_vals: tuple
    s_vals: tuple
    details: tuple = field(repr=False)
    regions: tuple = ()
    curves: tuple = ()
    junctions: tuple = ()
    meta: dict = field(default_factory=dict, repr=False)

    def point(self, i: int, j: int) -> PhasePoint:
        label = self.labels[i][j]
        if label is None:
            raise ValueError(f"grid point ({i}, {j}) lies outside the cone")
        return PhasePoint(self.alphas[i], self.betas[j], self.p,
                          self.f_vals[i][j], label, self.s_vals[i][j],
                          self.details[i][j])

    def region_labels(self):
        return sorted({r["label"] for r in self.regions})


def _connected_regions(labels):
    """Connected components of equal labels under 4-adjacency."""
    n_a = len(labels)
    n_b = len(labels[0]) if n_a else 0
    seen = [[False] * n_b for _ in range(n_a)]
    regions = []
    for i in range(n_a):
        for j in range(n_b):
            if labels[i][j] is None or seen[i][j]:
                continue
            lab = labels[i][j]
            stack = [(i, j)]
            seen[i][j] = True
            cells = []
            while stack:
                ci, cj = stack.pop()
                cells.append((ci, cj))
                for ni, nj in ((ci - 1, cj), (ci + 1, cj), (ci, cj - 1),
                               (ci, cj + 1)):
                    if 0 <= ni < n_a and 0 <= nj < n_b and not seen[ni][nj] \
                            and labels[ni][nj] == lab:
                        seen[ni][nj] = True
                        stack.append((ni, nj))
            cells.sort()
            regions.append({"label": lab, "cells": len(cells),
                            "anchor": cells[0]})
    regions.sort(key=lambda r: (r["label"], r["anchor"]))
    return regions


def _cell_edges(grid):
    """Voronoi edge coordinates between and around sorted grid values."""
    g = np.asarray(grid, dtype=float)
    if g.size == 1:
        half = 0.5
        return np.array([g[0] - half, g[0] + half])
    mids = 0.5 * (g[:-1] + g[1:])
    lo = g[0] - 0.5 * (g[1] - g[0])
    hi = g[-1] + 0.5 * (g[-1] - g[-2])
    return np.concatenate([[lo], mids, [hi]])


def _rounded(x, y):
    return (round(float(x), 9), round(float(y), 9))


def _boundary_segments(labels, alphas, betas):
    """Dual segments between unequal labeled neighbors, tagged by pair."""
    a_edges = _cell_edges(alphas)
    b_edges = _cell_edges(betas)
    segments = []
    for i in range(len(alphas)):
        for j in range(len(betas)):
            lab = labels[i][j]
            if lab is None:
                continue
            if i + 1 < len(alphas) and labels[i + 1][j] is not None \
                    and labels[i + 1][j] != lab:
                x = a_edges[i + 1]
                segments.append((frozenset((lab, labels[i + 1][j])),
                                 _rounded(x, b_edges[j]),
                                 _rounded(x, b_edges[j + 1])))
            if j + 1 < len(betas) and labels[i][j + 1] is not None \
                    and labels[i][j + 1] != lab:
                y = b_edges[j + 1]
                segments.append((frozenset((lab, labels[i][j + 1])),
                                 _rounded(a_edges[i], y),
                                 _rounded(a_edges[i + 1], y)))
    return segments


def _chain_segments(segments):
    """Join shared-endpoint segments into polylines, deterministically."""
    adj = defaultdict(list)
    for k, (p1, p2) in enumerate(segments):
        adj[p1].append(k)
        adj[p2].append(k)
    used = [False] * len(segments)

    def walk(start):
        path = [start]
        cur = start
        while True:
            nxt = next((k for k in adj[cur] if not used[k]), None)
            if nxt is None:
                return path
            used[nxt] = True
            p1, p2 = segments[nxt]
            cur = p2 if p1 == cur else p1
            path.append(cur)

    chains = []
    for key in sorted(adj):
        if len([k for k in adj[key] if not used[k]]) % 2 == 1:
            chains.append(walk(key))
    for key in sorted(adj):
        while any(not used[k] for k in adj[key]):
            chains.append(walk(key))
    return chains


def _peel_curves(labels, alphas, betas, order):
    """Boundary polylines peeled in delocalization order.

    Curve k separates the k-th label from every later one, so a junction
    where three regions meet contributes one through-going curve plus one
    that ends there, matching the count of distinct critical curves.
    """
    tagged = _boundary_segments(labels, alphas, betas)
    curves = []
    for k, lab in enumerate(order):
        later = set(order[k + 1:])
        segs = [(p1, p2) for pair, p1, p2 in tagged
                if lab in pair and pair - {lab} <= later]
        if not segs:
            continue
        for chain in _chain_segments(segs):
            curves.append({"label": lab,
                           "separates": sorted(later),
                           "points": [list(pt) for pt in chain]})
    return curves


def _find_junctions(labels, alphas, betas):
    a_edges = _cell_edges(alphas)
    b_edges = _cell_edges(betas)
    out = []
    for i in range(len(alphas) - 1):
        for j in range(len(betas) - 1):
            quad = {labels[i][j], labels[i + 1][j], labels[i][j + 1],
                    labels[i + 1][j + 1]}
            quad.discard(None)
            if len(quad) >= 3:
                out.append({
                    "alpha": float(a_edges[i + 1]),
                    "beta": float(b_edges[j + 1]),
                    "labels": sorted(quad),
                    "bar_alpha": float(0.5 * (alphas[i + 1] - alphas[i])),
                    "bar_beta": float(0.5 * (betas[j + 1] - betas[j])),
                })
    return out


def _kappa_ceiling(tables):
    """Best interpolated crossing entropy the tables themselves resolve.

    The delocalized free energy in these tables is alpha/2 plus this
    number, so comparisons against the delocalized reference use it
    instead of the infinite-size ceiling and stay free of the shared
    finite-size bias.
    """
    al = float(tables.alphas[0])
    be = float(tables.betas[0])
    a_grid, vals = tables.curve("AA", al, be)
    kappa = vals - 0.5 * al
    if a_grid.size == 1:
        return float(kappa[0])
    interp = PchipInterpolator(a_grid, a_grid * kappa)
    _, best = golden_max(lambda a: float(interp(a)) / a, float(a_grid[0]),
                         float(a_grid[-1]), tol=1e-8,
                         seed_points=max(9, 2 * a_grid.size - 1))
    return best


def phase_diagram(p, alphas, betas, tables: PsiTable, *, rho_star_A=None,
                  rho_star_B=None, perc_length: int = 256,
                  perc_samples: int = 32, perc_seed: int = 1,
                  level_tol: float = 1e-8, enter_tol: float = ENTER_TOL,
                  loc_margin: float = LOC_MARGIN, cross_tol: float = 2e-3,
                  supercritical=None, bank=None) -> PhaseDiagram:
    """Label an in-cone grid and extract its boundary structure.

    Grid points outside the cone are masked.  When the oil percolates
    (``supercritical``, inferred from the A-cap when not given) each
    point gets D or L from the interface excess, with an independent
    cross-check comparing f against the tables' own delocalized
    reference; disagreements are counted in ``meta`` and carried per
    point.  Otherwise points get the four-way subcritical label.  The
    same pair tables, percolation caps, and interface bank serve every
    point, so the grid cost is one table build plus one interface sweep
    set per point.
    """
    if not 0.0 < float(p) < 1.0:
        raise ValueError("p must lie strictly inside (0, 1)")
    alphas = [float(a) for a in alphas]
    betas = [float(b) for b in betas]
    if sorted(alphas) != alphas or sorted(betas) != betas:
        raise ValueError("grid axes must be sorted ascending")
    bank = _bank_for(tables, bank)
    cap_a, cap_b = _resolve_caps(p, rho_star_A, rho_star_B, perc_length,
                                 perc_samples, perc_seed)
    if supercritical is None:
        supercritical = cap_a >= PERCOLATED_CAP
    kappa_hat = _kappa_ceiling(tables)

    labels, f_vals, s_vals, details = [], [], [], []
    disagreements = 0
    for al in alphas:
        row_l, row_f, row_s, row_d = [], [], [], []
        for be in betas:
            if al < abs(be) - 1e-12:
                row_l.append(None)
                row_f.append(math.nan)
                row_s.append(math.nan)
                row_d.append({})
                continue
            params, q, offset = cone_reduce(al, be, p)
            caps = (cap_a, cap_b) if abs(q - p) < 1e-12 else (cap_b, cap_a)
            res = evaluate_f(params, q, tables, caps[0], caps[1],
                             tol=level_tol)
            excess = bank.excess(params.alpha, params.beta)
            if supercritical:
                label = "L" if excess > LOCALIZATION_THRESHOLD + loc_margin \
                    else "D"
                deloc_gap = res.f - (0.5 * params.alpha + kappa_hat)
                f_label = "L" if deloc_gap > cross_tol else "D"
                detail = {"f_label": f_label, "deloc_gap": float(deloc_gap),
                          "agrees": f_label == label,
                          "freqs": res.freqs.as_dict(),
                          "times": res.times.as_dict()}
                if not detail["agrees"]:
                    disagreements += 1
            else:
                label, state = _classify_detail(params, res, tables, bank,
                                                enter_tol, loc_margin)
                detail = {"pairs": state, "freqs": res.freqs.as_dict(),
                          "times": res.times.as_dict()}
            row_l.append(label)
            row_f.append(offset + res.f)
            row_s.append(excess)
            row_d.append(detail)
        labels.append(row_l)
        f_vals.append(row_f)
        s_vals.append(row_s)
        details.append(row_d)

    order = SUPERCRITICAL_ORDER if supercritical else SUBCRITICAL_ORDER
    regions = _connected_regions(labels)
    curves = _peel_curves(labels, alphas, betas, order)
    junctions = _find_junctions(labels, alphas, betas)
    meta = {
        "p": float(p),
        "supercritical": bool(supercritical),
        "rho_star_A": cap_a,
        "rho_star_B": cap_b,
        "kappa_ceiling": kappa_hat,
        "cross_check_disagreements": disagreements,
        "tolerances": {"enter": enter_tol, "loc_margin": loc_margin,
                       "cross": cross_tol, "level": level_tol},
        "table": dict(tables.meta),
    }
    return PhaseDiagram(float(p), tuple(alphas), tuple(betas),
                        tuple(tuple(r) for r in labels),
                        tuple(tuple(r) for r in f_vals),
                        tuple(tuple(r) for r in s_vals),
                        tuple(tuple(r) for r in details),
                        tuple(regions), tuple(curves), tuple(junctions),
                        meta)


def localization_boundary(diagram: PhaseDiagram):
    """Column-wise onset of localized labels: list of (alpha, beta_mid).

    For each alpha column holding both localized and delocalized labels,
    returns the midpoint between the highest delocalized beta below the
    first localized cell and that cell; columns without a localized cell
    are skipped.  Useful for comparing onset curves across densities.
    """
    out = []
    for i, al in enumerate(diagram.alphas):
        prev_j = None
        for j, be in enumerate(diagram.betas):
            lab = diagram.labels[i][j]
            if lab is None:
                continue
            if lab in LOCALIZED_LABELS:
                if prev_j is not None:
                    out.append((al, 0.5 * (diagram.betas[prev_j] + be)))
                break
            prev_j = j
    return out


# ---------------------------------------------------------------------------
# writers

DIAGRAM_COLUMNS = ("alpha", "beta", "p", "f", "label", "S_excess")


def diagram_to_csv(diagram: PhaseDiagram, path) -> None:
    """Labeled points as CSV, row-major over the grid, masked points skipped."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DIAGRAM_COLUMNS)
        for i, al in enumerate(diagram.alphas):
            for j, be in enumerate(diagram.betas):
                lab = diagram.labels[i][j]
                if lab is None:
                    continue
                writer.writerow([repr(float(al)), repr(float(be)),
                                 repr(diagram.p),
                                 repr(diagram.f_vals[i][j]), lab,
                                 repr(diagram.s_vals[i][j])])


def diagram_to_json(diagram: PhaseDiagram, path, extra_meta=None) -> None:
    """Full diagram payload: grid, labels, boundaries, junctions, meta."""
    meta = dict(diagram.meta)
    meta.update(extra_meta or {})
    payload = {
        "format": 1,
        "p": diagram.p,
        "alphas": list(diagram.alphas),
        "betas": list(diagram.betas),
        "labels": [list(row) for row in diagram.labels],
        "f": [list(row) for row in diagram.f_vals],
        "s_excess": [list(row) for row in diagram.s_vals],
        "regions": [dict(r) for r in diagram.regions],
        "curves": [dict(c) for c in diagram.curves],
        "junctions": [dict(j) for j in diagram.junctions],
        "meta": meta,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
