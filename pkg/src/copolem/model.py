"""Core model objects shared by every other module.

Holds the two disorder samples (block field and monomer sequence), directed
paths with their validity rules, the match Hamiltonian, and the parameter
symmetries that fold an arbitrary (alpha, beta) into the cone
alpha >= |beta|.

Labels are 0 for A and 1 for B throughout the package.  Steps are encoded
0 (RIGHT), 1 (UP), 2 (DOWN); a directed path is self-avoiding when an UP
step never directly follows a DOWN step or vice versa.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LABEL_A = 0
LABEL_B = 1

RIGHT, UP, DOWN = 0, 1, 2

_STEP_CHARS = {"R": RIGHT, "U": UP, "D": DOWN}
_STEP_VECS = np.array([[1, 0], [0, 1], [0, -1]], dtype=np.int64)

# domain tags keep streams for different disorder kinds independent even
# when they share a seed
_DOMAIN_COPOLYMER = 1
_DOMAIN_EMULSION = 2


def rng_stream(seed, *stream):
    """Independent counter-based generator for (seed, stream indices).

    Distinct stream tuples give statistically independent generators, and
    the result is identical whether streams are drawn serially or in
    parallel.
    """
    ss = np.random.SeedSequence(
        entropy=int(seed), spawn_key=tuple(int(i) for i in stream)
    )
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class InteractionParams:
    """Interaction strengths: alpha per AA-match, beta per BB-match."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError("alpha and beta must be finite")

    @property
    def in_cone(self) -> bool:
        """True when alpha >= |beta|, the parameter cone the solver works in."""
        return self.alpha >= abs(self.beta)


class CopolymerSequence:
    """Monomer labels along the chain, one per step."""

    def __init__(self, labels):
        arr = np.ascontiguousarray(labels, dtype=np.uint8)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("labels must be a non-empty 1D sequence")
        if arr.max() > 1:
            raise ValueError("labels must be 0 (A) or 1 (B)")
        arr.setflags(write=False)
        self.labels = arr

    def __len__(self):
        return self.labels.shape[0]

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    def fraction_a(self) -> float:
        return float(np.mean(self.labels == LABEL_A))


class EmulsionField:
    """Block labels on a finite piece of the coarse lattice.

    labels[c, r] is the label of block column col_min + c, row row_min + r;
    each block is a block_size x block_size square of lattice cells, block
    (t, h) covering the half-open square (t*L, (t+1)*L] x (h*L, (h+1)*L]
    with L = block_size.  Queries outside the stored extent raise.
    """

    def __init__(self, labels, block_size, col_min=0, row_min=0):
        arr = np.ascontiguousarray(labels, dtype=np.uint8)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("labels must be a non-empty 2D grid")
        if arr.max() > 1:
            raise ValueError("labels must be 0 (A) or 1 (B)")
        if block_size < 1:
            raise ValueError("block_size must be a positive integer")
        arr.setflags(write=False)
        self.labels = arr
        self.block_size = int(block_size)
        self.col_min = int(col_min)
        self.row_min = int(row_min)

    @property
    def ncols(self) -> int:
        return self.labels.shape[0]

    @property
    def nrows(self) -> int:
        return self.labels.shape[1]

    def block_label(self, col, row) -> int:
        c = col - self.col_min
        r = row - self.row_min
        if not (0 <= c < self.ncols and 0 <= r < self.nrows):
            raise IndexError(
                f"block ({col}, {row}) outside stored extent "
                f"cols [{self.col_min}, {self.col_min + self.ncols}) x "
                f"rows [{self.row_min}, {self.row_min + self.nrows})"
            )
        return int(self.labels[c, r])

    def fraction_a(self) -> float:
        return float(np.mean(self.labels == LABEL_A))


def sample_copolymer(n, seed, stream=()) -> CopolymerSequence:
    """Draw n i.i.d. fair monomer labels, deterministically in the seed."""
    if n < 1:
        raise ValueError("n must be at least 1")
    g = rng_stream(seed, _DOMAIN_COPOLYMER, *stream)
    return CopolymerSequence(g.integers(0, 2, size=int(n), dtype=np.uint8))


def sample_emulsion(extent, p, seed, block_size=1, col_min=0, row_min=0, stream=()):
    """Draw an EmulsionField of i.i.d. block labels with P(A) = p.

    extent is (ncols, nrows).  Blocks are labelled by thresholding one
    uniform per block at p, so fields drawn with the same seed but
    different p are coupled monotonically (raising p only turns B-blocks
    into A-blocks).
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly between 0 and 1")
    ncols, nrows = extent
    if ncols < 1 or nrows < 1:
        raise ValueError("extent must be positive in both directions")
    g = rng_stream(seed, _DOMAIN_EMULSION, *stream)
    u = g.random((int(ncols), int(nrows)))
    labels = np.where(u < p, LABEL_A, LABEL_B).astype(np.uint8)
    return EmulsionField(labels, block_size, col_min=col_min, row_min=row_min)


def edge_block(site_a, site_b, block_size):
    """Block (col, row) that the lattice edge between two adjacent sites lies in.

    An edge belongs to the block containing its midpoint.  Midpoints of
    horizontal edges sit on a block boundary only in the vertical
    direction, where they resolve to the block below; midpoints of
    vertical edges sit on a boundary only when the edge runs along a block
    boundary column, where they resolve to the block on the left (for a
    rightward path, the block whose pair is being traversed).
    """
    L = int(block_size)
    ax, ay = site_a
    bx, by = site_b
    dx, dy = bx - ax, by - ay
    if (dx, dy) in ((1, 0), (-1, 0)):
        x = min(ax, bx)
        return (x // L, (ay - 1) // L)
    if (dx, dy) in ((0, 1), (0, -1)):
        y = min(ay, by)
        return ((ax - 1) // L, y // L)
    raise ValueError(f"sites {site_a} and {site_b} are not lattice neighbours")


class DirectedPath:
    """A directed self-avoiding path: steps RIGHT, UP, DOWN from a start site."""

    def __init__(self, steps, start=(0, 0)):
        if isinstance(steps, str):
            try:
                steps = [_STEP_CHARS[c] for c in steps]
            except KeyError as bad:
                raise ValueError(f"unknown step character {bad}") from None
        arr = np.ascontiguousarray(steps, dtype=np.int8)
        if arr.ndim != 1:
            raise ValueError("steps must be a 1D sequence")
        if arr.size and not np.all((arr >= RIGHT) & (arr <= DOWN)):
            raise ValueError("steps must be RIGHT (0), UP (1) or DOWN (2)")
        if arr.size > 1 and np.any(arr[:-1] + arr[1:] == UP + DOWN):
            raise ValueError("not self-avoiding: UP and DOWN steps are adjacent")
        arr.setflags(write=False)
        self.steps = arr
        self.start = (int(start[0]), int(start[1]))

    @classmethod
    def from_string(cls, text, start=(0, 0)):
        return cls(text, start=start)

    @property
    def n(self) -> int:
        return self.steps.shape[0]

    def sites(self) -> np.ndarray:
        """All n + 1 visited sites, in order, as an (n + 1, 2) array."""
        out = np.empty((self.n + 1, 2), dtype=np.int64)
        out[0] = self.start
        if self.n:
            np.cumsum(_STEP_VECS[self.steps], axis=0, out=out[1:])
            out[1:] += out[0]
        return out

    def validate_in_field(self, field: EmulsionField) -> None:
        """Check the block-pair rule against a field, raising on violation.

        The path must start on a corner of the block lattice.  From any
        corner it must step RIGHT, which begins the traversal of the pair
        made of the block up-right of the corner and the block below; the
        path stays inside that pair until it reaches the pair's upper-right
        or lower-right corner (where the next traversal begins) or ends.
        The pair's mid-height right corner admits no further step, so the
        path may only end there.
        """
        L = field.block_size
        sites = self.sites()
        cx = cy = None  # entry corner of the pair being traversed
        for i in range(self.n):
            x, y = int(sites[i, 0]), int(sites[i, 1])
            if x % L == 0 and y % L == 0:
                if cx is not None and (x, y) == (cx + L, cy):
                    raise ValueError(
                        "invalid path: continues from the mid-height right "
                        f"corner {(x, y)} of its block pair"
                    )
                if self.steps[i] != RIGHT:
                    raise ValueError(
                        f"invalid path: step {i} from corner site {(x, y)} "
                        "must go RIGHT"
                    )
                cx, cy = x, y
            elif cx is None:
                raise ValueError(
                    f"invalid path: starts at {tuple(sites[0])}, not on a "
                    "corner of the block lattice"
                )
            nx, ny = int(sites[i + 1, 0]), int(sites[i + 1, 1])
            if not (cx <= nx <= cx + L and cy - L <= ny <= cy + L):
                raise ValueError(
                    f"invalid path: site {(nx, ny)} leaves the block pair "
                    f"entered at {(cx, cy)}"
                )

    def is_valid_in_field(self, field: EmulsionField) -> bool:
        try:
            self.validate_in_field(field)
        except ValueError:
            return False
        return True


def hamiltonian(path, omega, field, params) -> float:
    """Energy of a path: minus alpha per AA-match, minus beta per BB-match.

    Step i is an AA-match when monomer i is an A and the edge it traverses
    lies in an A-block, and likewise for BB.  Monomers live on edges, not
    vertices.  The path must be valid in the field and as long as omega.
    """
    if path.n != len(omega):
        raise ValueError(
            f"path has {path.n} steps but omega has {len(omega)} monomers"
        )
    path.validate_in_field(field)
    sites = path.sites()
    n_aa = n_bb = 0
    for i in range(path.n):
        col, row = edge_block(sites[i], sites[i + 1], field.block_size)
        block = field.block_label(col, row)
        mono = omega.labels[i]
        if mono == LABEL_A and block == LABEL_A:
            n_aa += 1
        elif mono == LABEL_B and block == LABEL_B:
            n_bb += 1
    return -params.alpha * n_aa - params.beta * n_bb


@dataclass(frozen=True)
class SymmetryTransform:
    """One of the model's free-energy symmetries, or their composition.

    swap_labels exchanges the roles of A and B (alpha <-> beta together
    with p <-> 1 - p); reflect maps (alpha, beta) to (-beta, -alpha) at the
    cost of an additive (alpha + beta) / 2 in the free energy.  Both are
    involutions and they commute, so every transform is its own inverse
    and the offsets of a transform and its inverse cancel exactly.
    """

    swap_labels: bool = False
    reflect: bool = False

    def apply(self, alpha, beta, p):
        """Transformed (alpha', beta', p', offset) with
        f(alpha, beta; p) = offset + f(alpha', beta'; p')."""
        a, b, q = float(alpha), float(beta), float(p)
        offset = 0.0
        if self.swap_labels:
            a, b, q = b, a, 1.0 - q
        if self.reflect:
            offset = 0.5 * (a + b)
            a, b = -b, -a
        return a, b, q, offset

    def inverse(self) -> "SymmetryTransform":
        return self


def cone_reduce(alpha, beta, p):
    """Fold any (alpha, beta) into the cone alpha >= |beta|.

    Returns (params, p', offset) with params.in_cone true and
    f(alpha, beta; p) = offset + f(params.alpha, params.beta; p').
    """
    if alpha >= abs(beta):
        t = SymmetryTransform()
    elif beta >= abs(alpha):
        t = SymmetryTransform(swap_labels=True)
    elif -beta >= abs(alpha):
        t = SymmetryTransform(reflect=True)
    else:
        t = SymmetryTransform(swap_labels=True, reflect=True)
    a, b, q, offset = t.apply(alpha, beta, p)
    return InteractionParams(a, b), q, offset
