"""Microscopic state: height fields, contours, and the bulk constraint weight.

A height field lives on the interior of the centered box of linear size 2N+1,
is pinned to zero on and outside the boundary, and takes integer values in
[-N/2, N/2].  Level lines are extracted on the dual lattice with a
deterministic south-west splitting at four-bond crossings, oriented so that
upward contours run clockwise around their interior (sign +1) and downward
contours counterclockwise (sign -1); summing sign * indicator(interior) over
the family reconstructs the field exactly.

The bulk weight is the log-probability that two Bernoulli fields conditioned
on the interface produce at least the requested particle excess; the gaussian
mode is the quadratic tail bound, the exact mode sums binomial laws.
"""

import csv
import json
import logging
import math
from dataclasses import dataclass, field as dataclass_field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.stats import binom
from scipy.special import logsumexp

logger = logging.getLogger("facetstack.lattice")

EXACT_VOLUME_LIMIT = 10 ** 6


@dataclass(frozen=True)
class ModelParams:
    """Microscopic parameters; derived scales follow the occupation gap."""

    n: int                 # linear box size N, even
    beta: float            # inverse temperature
    p_v: float             # vacancy-side occupation probability
    p_s: float             # solid-side occupation probability
    excess: float = 0.0    # excess-area parameter A
    eps: float = 0.25      # large-contour threshold coefficient

    def __post_init__(self):
        if self.n <= 0 or self.n % 2 != 0:
            raise ValueError("n must be a positive even integer")
        if not (0.0 < self.p_v < self.p_s < 1.0):
            raise ValueError("need 0 < p_v < p_s < 1")
        if self.beta <= 0.0:
            raise ValueError("beta must be positive")
        if self.eps <= 0.0:
            raise ValueError("eps must be positive")

    @property
    def occupation_gap(self) -> float:
        return self.p_s - self.p_v

    @property
    def occupation_variance(self) -> float:
        return 2.0 * (self.p_s * (1.0 - self.p_s) + self.p_v * (1.0 - self.p_v))

    @property
    def penalty_scale(self) -> float:
        return self.occupation_variance / self.occupation_gap ** 2

    @property
    def volume_excess(self) -> float:
        return self.excess / self.occupation_gap

    def to_json_dict(self) -> dict:
        return {"n": self.n, "beta": self.beta, "p_v": self.p_v, "p_s": self.p_s,
                "excess": self.excess, "eps": self.eps}


class HeightField:
    """Integer heights over the (2N-1) x (2N-1) interior, zero outside."""

    def __init__(self, n: int, heights: Optional[np.ndarray] = None):
        if n <= 0 or n % 2 != 0:
            raise ValueError("n must be a positive even integer")
        self.n = n
        side = 2 * n - 1
        if heights is None:
            heights = np.zeros((side, side), dtype=np.int64)
        else:
            heights = np.asarray(heights, dtype=np.int64)
            if heights.shape != (side, side):
                raise ValueError(f"heights must be {side} x {side}")
            if np.abs(heights).max(initial=0) > n // 2:
                raise ValueError(f"heights must lie in [-{n//2}, {n//2}]")
        self.heights = heights

    @property
    def side(self) -> int:
        return 2 * self.n - 1

    @property
    def height_cap(self) -> int:
        return self.n // 2

    def copy(self) -> "HeightField":
        return HeightField(self.n, self.heights.copy())

    def save_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"N={self.n}\n")
            np.savetxt(fh, self.heights, fmt="%d", delimiter=",")

    @classmethod
    def load_csv(cls, path: str) -> "HeightField":
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip()
            if not header.startswith("N="):
                raise ValueError(f"{path}: expected 'N=<n>' header, got {header!r}")
            n = int(header[2:])
            heights = np.loadtxt(fh, dtype=np.int64, delimiter=",", ndmin=2)
        return cls(n, heights)


def sos_energy(fld: HeightField) -> int:
    """Total gradient sum with zero padding; multiply by beta to weight."""
    h = np.pad(fld.heights, 1)
    return int(np.abs(np.diff(h, axis=0)).sum() + np.abs(np.diff(h, axis=1)).sum())


def snapped_gradient_cost(fld: HeightField, beta: float) -> float:
    """beta * sos_energy with every bond snapped to the log-weight grid.

    Prices bonds exactly like the sweep kernel, so multi-site moves judged
    against this total target the same measure as the single-site chain.
    """
    h = np.pad(fld.heights, 1)
    steps = np.concatenate([np.abs(np.diff(h, axis=0)).ravel(),
                            np.abs(np.diff(h, axis=1)).ravel()])
    ticks = np.rint(beta * steps / LOG_WEIGHT_STEP).astype(np.int64).sum()
    return float(ticks) * LOG_WEIGHT_STEP


def signed_volume(fld: HeightField) -> int:
    return int(fld.heights.sum())


# ---------------------------------------------------------------------------
# contour extraction

# dual-lattice headings: E, N, W, S as (dx, dy) with y pointing up
_HEADINGS = ((1, 0), (0, 1), (-1, 0), (0, -1))


@dataclass(frozen=True)
class Contour:
    level: int
    sign: int
    vertices: Tuple[Tuple[int, int], ...]   # closed walk, last edge implicit
    area: int
    interior_rows: Tuple[Tuple[int, int, int], ...]  # (row, col_start, col_end)
    label: str = "unclassified"

    @property
    def length(self) -> int:
        return len(self.vertices)

    def interior_mask(self, side: int) -> np.ndarray:
        mask = np.zeros((side, side), dtype=bool)
        for row, lo, hi in self.interior_rows:
            mask[row, lo:hi] = True
        return mask

    def rescaled_vertices(self, n: int) -> np.ndarray:
        """Dual coordinates mapped to the unit box [-1, 1]^2."""
        v = np.asarray(self.vertices, dtype=float)
        return (v - (n - 0.5)) / n

    def to_json_dict(self) -> dict:
        return {"sign": self.sign, "length": self.length, "area": self.area,
                "level": self.level, "label": self.label,
                "vertices": [list(v) for v in self.vertices]}


@dataclass(frozen=True)
class ContourSet:
    n: int
    contours: Tuple[Contour, ...]

    def reconstruct(self) -> HeightField:
        side = 2 * self.n - 1
        h = np.zeros((side, side), dtype=np.int64)
        for c in self.contours:
            for row, lo, hi in c.interior_rows:
                h[row, lo:hi] += c.sign
        return HeightField(self.n, h)

    def counts(self) -> Dict[str, int]:
        out = {"large": 0, "small": 0, "intermediate": 0, "unclassified": 0}
        for c in self.contours:
            out[c.label] += 1
        return out

    def save_json(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"n": self.n,
                       "contours": [c.to_json_dict() for c in self.contours]},
                      fh, indent=1)


def _mask_boundary_bonds(mask: np.ndarray, region_on_right: bool):
    """Directed dual-lattice bonds around a cell mask.

    With the region on the right the walk is clockwise (positive contours);
    on the left counterclockwise (negative contours).  Returns a dict keyed
    by start vertex holding lists of headings (indices into _HEADINGS).
    """
    rows, cols = mask.shape
    padded = np.zeros((rows + 2, cols + 2), dtype=bool)
    padded[1:-1, 1:-1] = mask
    bonds: Dict[Tuple[int, int], List[int]] = {}

    def add(x: int, y: int, heading: int):
        bonds.setdefault((x, y), []).append(heading)

    # horizontal boundary edges: cell (r, c) spans x in [c, c+1], y in [r, r+1]
    below = padded[:-1, 1:-1]   # cell below edge y=r, r = 0..rows
    above = padded[1:, 1:-1]
    ys, xs = np.nonzero(below != above)
    for y, x in zip(ys.tolist(), xs.tolist()):
        # region below -> top edge of that cell -> heading +x for clockwise
        if below[y, x] == region_on_right:
            add(x, y, 0)        # east
        else:
            add(x + 1, y, 2)    # west
    # vertical boundary edges at x=c, c = 0..cols
    left = padded[1:-1, :-1]
    right = padded[1:-1, 1:]
    ys, xs = np.nonzero(left != right)
    for y, x in zip(ys.tolist(), xs.tolist()):
        # region left of the edge -> right edge of that cell -> heading -y
        if left[y, x] == region_on_right:
            add(x, y + 1, 3)    # south
        else:
            add(x, y, 1)        # north
    return bonds


_SPLIT_NEXT = {
    # four-bond crossing: the walk always turns around the south-west corner
    # cell, so west-in pairs with south-out, east-in with north-out, and the
    # rotated pairs apply when north/south carry the incoming bonds
    0: 3,   # arrived heading east (west-in)   -> leave south
    2: 1,   # arrived heading west (east-in)   -> leave north
    1: 2,   # arrived heading north (south-in) -> leave west
    3: 0,   # arrived heading south (north-in) -> leave east
}


def _walk_loops(bonds) -> List[List[Tuple[int, int]]]:
    loops = []
    used = {v: [False] * len(hs) for v, hs in bonds.items()}
    for start in sorted(bonds.keys()):
        for slot0 in range(len(bonds[start])):
            if used[start][slot0]:
                continue
            loop = []
            v, slot = start, slot0
            while True:
                used[v][slot] = True
                loop.append(v)
                heading = bonds[v][slot]
                dx, dy = _HEADINGS[heading]
                v = (v[0] + dx, v[1] + dy)
                outs = bonds[v]
                # crossings pair bonds by the split rule, simple vertices
                # have a single continuation
                slot = 0 if len(outs) == 1 else outs.index(_SPLIT_NEXT[heading])
                if v == start and slot == slot0:
                    break
                if used[v][slot]:
                    raise RuntimeError("contour walk revisited a bond")
            loops.append(loop)
    return loops


def _loop_area_and_rows(loop: List[Tuple[int, int]]):
    """Signed shoelace area and the interior cells as row runs."""
    pts = np.asarray(loop + [loop[0]], dtype=np.int64)
    x, y = pts[:, 0], pts[:, 1]
    twice = int(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]))
    # interior by vertical-bond parity: cell (row, col) is inside iff an odd
    # number of vertical bonds sits at x <= col on its row
    vmask: Dict[int, List[int]] = {}
    for k in range(len(loop)):
        (x0, y0), (x1, y1) = pts[k], pts[k + 1]
        if x0 == x1:
            row = int(min(y0, y1))
            vmask.setdefault(row, []).append(int(x0))
    rows = []
    for row, xs in vmask.items():
        xs.sort()
        for i in range(0, len(xs) - 1, 2):
            rows.append((row, xs[i], xs[i + 1]))
    return twice, tuple(sorted(rows))


def extract_contours(fld: HeightField) -> ContourSet:
    """Level lines of every nonzero level, split and oriented by sign."""
    h = fld.heights
    contours: List[Contour] = []
    hmax, hmin = int(h.max(initial=0)), int(h.min(initial=0))
    levels = [(k, True) for k in range(1, hmax + 1)]
    levels += [(k, False) for k in range(-1, hmin - 1, -1)]
    for level, upward in levels:
        mask = h >= level if upward else h <= level
        bonds = _mask_boundary_bonds(mask, region_on_right=upward)
        for loop in _walk_loops(bonds):
            twice, rows = _loop_area_and_rows(loop)
            # sign +1 iff clockwise around the enclosed cells; holes inside a
            # level set come out with the opposite orientation and cancel on
            # reconstruction
            sign = 1 if twice < 0 else -1
            contours.append(Contour(level=level, sign=sign, vertices=tuple(loop),
                                    area=abs(twice) // 2, interior_rows=rows))
    return ContourSet(n=fld.n, contours=tuple(contours))


def classify(contour_set: ContourSet, eps: float) -> ContourSet:
    """Label contours large/small/intermediate; large takes precedence."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    n = contour_set.n
    large_cut = eps * n
    small_cut = math.log(n) / eps
    relabeled = []
    for c in contour_set.contours:
        if c.length >= large_cut:
            label = "large"
        elif c.length <= small_cut:
            label = "small"
        else:
            label = "intermediate"
        relabeled.append(Contour(level=c.level, sign=c.sign, vertices=c.vertices,
                                 area=c.area, interior_rows=c.interior_rows,
                                 label=label))
    return ContourSet(n=n, contours=tuple(relabeled))


# ---------------------------------------------------------------------------
# bulk constraint weight


def box_volume(n: int) -> int:
    """Cell count of the bulk slab: interior sites times vertical extent N."""
    return (2 * n - 1) ** 2 * n


def log_tail_exact_halves(n_s: int, n_v: int, p_s: float, p_v: float,
                          threshold: int) -> float:
    """log P(Bin(n_s, p_s) + Bin(n_v, p_v) >= threshold), exactly."""
    if threshold <= 0:
        return 0.0
    if threshold > n_s + n_v:
        return -math.inf
    k = np.arange(0, n_s + 1)
    terms = binom.logpmf(k, n_s, p_s) + binom.logsf(threshold - k - 1, n_v, p_v)
    return float(logsumexp(terms))


#: spacing of the dyadic grid that all log-weights are snapped to.  With
#: bond costs and tail values aligned this way (and well under 2**13 in
#: magnitude), acceptance log-ratios come out exact in float arithmetic,
#: so the samplers are reversible as an identity, not just to rounding.
LOG_WEIGHT_STEP = 2.0 ** -40


def snap_log_weight(value):
    """Round a log-weight (scalar or array) to the dyadic grid; -inf passes."""
    return np.rint(value / LOG_WEIGHT_STEP) * LOG_WEIGHT_STEP


def bulk_log_tail(params: ModelParams, alpha: int, mode: str = "gaussian") -> float:
    """Log-weight of the particle-excess constraint at signed volume alpha."""
    n = params.n
    if mode == "gaussian":
        shortfall = max(params.excess * n * n - params.occupation_gap * alpha, 0.0)
        return float(snap_log_weight(
            -(shortfall ** 2) / (2.0 * n ** 3 * params.occupation_variance)))
    if mode == "exact":
        volume = box_volume(n)
        if volume > EXACT_VOLUME_LIMIT:
            raise ValueError(f"volume {volume} exceeds {EXACT_VOLUME_LIMIT}; "
                             "use gaussian mode")
        half = volume // 2
        if abs(alpha) > half:
            raise ValueError("signed volume exceeds the slab half-volume")
        threshold = math.ceil((params.p_s + params.p_v) * half
                              + params.excess * n * n)
        return float(snap_log_weight(
            log_tail_exact_halves(half + alpha, half - alpha,
                                  params.p_s, params.p_v, threshold)))
    raise ValueError(f"unknown mode {mode!r}")


def tail_table(params: ModelParams, mode: str, alpha_max: int) -> np.ndarray:
    """bulk_log_tail evaluated on alpha = -alpha_max..alpha_max."""
    if mode == "gaussian":
        n = params.n
        alpha = np.arange(-alpha_max, alpha_max + 1)
        shortfall = np.maximum(params.excess * n * n
                               - params.occupation_gap * alpha, 0.0)
        return snap_log_weight(
            -(shortfall ** 2) / (2.0 * n ** 3 * params.occupation_variance))
    return np.array([bulk_log_tail(params, a, mode)
                     for a in range(-alpha_max, alpha_max + 1)])
