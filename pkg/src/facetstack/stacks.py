"""Monolayer stacks of types 1 and 2: closed-form energies and reductions.

A type-2 stack is a pile of l identical Wulff plaquettes; a type-1 stack is
l - 1 identical plaquettes with a Wulff shape of the same radius on top.  Both
are parameterized by their total area a; out-of-range areas get an infinite
energy so that minimization over branches propagates naturally.

All formulas live in rescaled units: axis surface tension 1, box [-1, 1]^2 of
area 4, Wulff area w in (0, 4).
"""

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .norms import WulffGeometry, curve_surface_tension, polygon_area

logger = logging.getLogger("facetstack.stacks")

INFINITE_ENERGY = math.inf

# area slack for floating-point range tests at branch endpoints
_EDGE = 1e-9


@dataclass(frozen=True)
class Stack:
    """A candidate minimizer: layer count, type, total area, radius, tension."""

    layers: int
    kind: str  # "type1", "type2" or "empty"
    area: float
    radius: float
    tau: float
    per_layer_areas: Tuple[float, ...]

    def to_json_dict(self) -> dict:
        return {
            "layers": self.layers,
            "kind": self.kind,
            "area": self.area,
            "radius": self.radius,
            "tau": self.tau,
            "per_layer_areas": list(self.per_layer_areas),
        }


EMPTY_STACK = Stack(layers=0, kind="empty", area=0.0, radius=0.0, tau=0.0,
                    per_layer_areas=())


def degeneracy_ell(w: float) -> float:
    """The layer count at which both stack types describe the same pile."""
    return 4.0 / (4.0 - w)


def guard_degenerate_w(w: float, ell_max: int) -> float:
    """Perturb w away from integer values of 4/(4-w), which collapse a branch."""
    for ell in range(1, ell_max + 1):
        if abs(ell - degeneracy_ell(w)) < 1e-9:
            warnings.warn(f"w={w!r} makes layer count {ell} degenerate; "
                          "perturbing w by 1e-7", stacklevel=2)
            return w + 1e-7
    return w


def type1_range(ell: int, w: float) -> Tuple[float, float]:
    """Valid total areas for a type-1 stack, empty (inverted) at degeneracy."""
    lo, hi = 4.0 * (ell - 1), ell * w
    return (lo, hi) if lo <= hi else (hi, lo)


def type2_range(ell: int, w: float) -> Tuple[float, float]:
    return ell * w, 4.0 * ell


def type1_stack(ell: int, a: float, w: float) -> Optional[Stack]:
    """Stack of ell - 1 plaquettes plus one Wulff shape, all of radius r.

    The radius solves the total-area constraint
    a = 4(ell-1) - r^2 (ell (4-w) - 4); None is returned off-range, standing
    for the infinite-energy sentinel.
    """
    if ell < 1:
        raise ValueError("type-1 stacks need at least one layer")
    denom = 4.0 * (ell - 1) - ell * w
    if ell > 1 and abs(denom) < 1e-12:
        raise ValueError(f"degenerate layer count {ell} at w={w}; "
                         "perturb w first (guard_degenerate_w)")
    lo, hi = type1_range(ell, w)
    if not lo - _EDGE <= a <= hi + _EDGE:
        return None
    a = min(max(a, lo), hi)
    if ell == 1:
        r = math.sqrt(a / w)
    else:
        r = math.sqrt((4.0 * (ell - 1) - a) / denom)
    r = min(max(r, 0.0), 1.0)
    plaquette_area = 4.0 - (4.0 - w) * r * r
    cap_area = w * r * r
    # per-layer sum: (ell-1) plaquettes at 8 - 2r(4-w) plus a Wulff cap at 2wr
    tau = (ell - 1) * (8.0 - 2.0 * r * (4.0 - w)) + 2.0 * w * r
    return Stack(layers=ell, kind="type1", area=a, radius=r, tau=tau,
                 per_layer_areas=tuple([plaquette_area] * (ell - 1) + [cap_area]))


def type2_stack(ell: int, a: float, w: float) -> Optional[Stack]:
    """Stack of ell identical Wulff plaquettes of common radius r."""
    if ell < 1:
        raise ValueError("type-2 stacks need at least one layer")
    lo, hi = type2_range(ell, w)
    if not lo - _EDGE <= a <= hi + _EDGE:
        return None
    a = min(max(a, lo), hi)
    r = math.sqrt((4.0 * ell - a) / ((4.0 - w) * ell))
    r = min(max(r, 0.0), 1.0)
    tau = 8.0 * ell - 2.0 * math.sqrt((4.0 * ell - a) * (4.0 - w) * ell)
    return Stack(layers=ell, kind="type2", area=a, radius=r, tau=tau,
                 per_layer_areas=tuple([a / ell] * ell))


def stack_tau(ell: int, a: float, w: float, kind: str) -> float:
    """Surface tension of the requested branch; infinite off-range."""
    if ell == 0:
        return 0.0 if abs(a) <= _EDGE else INFINITE_ENERGY
    stack = type1_stack(ell, a, w) if kind == "type1" else type2_stack(ell, a, w)
    return INFINITE_ENERGY if stack is None else stack.tau


def stack_energy(stack: Optional[Stack], sigma: float) -> float:
    """Surface tension plus the quadratic area penalty a^2 / (2 sigma)."""
    if stack is None:
        return INFINITE_ENERGY
    return stack.tau + stack.area * stack.area / (2.0 * sigma)


def slope_energy(ell, a, w: float, sigma: float, v: float):
    """Tilted type-2 objective -v a + a^2/(2 sigma) + 8 l - 2 sqrt((4l-a)(4-w)l).

    Defined on the cone {0 <= l w <= a <= 4 l} (l may be real here; the
    solver uses integer l, the convexity test probes the continuum).  Returns
    the infinite-energy sentinel outside.
    """
    ell = np.asarray(ell, dtype=float)
    a = np.asarray(a, dtype=float)
    inside = (ell >= 0.0) & (a >= ell * w - _EDGE) & (a <= 4.0 * ell + _EDGE)
    rad = np.maximum((4.0 * ell - a) * (4.0 - w) * ell, 0.0)
    val = -v * a + a * a / (2.0 * sigma) + 8.0 * ell - 2.0 * np.sqrt(rad)
    out = np.where(inside, val, INFINITE_ENERGY)
    return float(out) if out.ndim == 0 else out


def optimal_stack_tau(a: float, w: float, ell_max: int = 12) -> Tuple[float, Optional[Stack]]:
    """Minimal surface tension over all stacks of total area a."""
    if a <= _EDGE:
        return 0.0, EMPTY_STACK
    best_tau, best = INFINITE_ENERGY, None
    ell_star = degeneracy_ell(w)
    for ell in range(1, ell_max + 1):
        for builder in (type2_stack, type1_stack):
            if builder is type1_stack and ell >= ell_star:
                continue  # dominated by type 2 on the shared range
            stack = builder(ell, a, w)
            if stack is not None and stack.tau < best_tau - 1e-15:
                best_tau, best = stack.tau, stack
    if best is None:
        raise ValueError(f"no stack of area {a} with at most {ell_max} layers")
    return best_tau, best


def excess_surface_tension(geometry: WulffGeometry, polygon=None,
                           stack: Optional[Stack] = None, ell_max: int = 12) -> float:
    """Surface tension above the optimum at the same total area.

    Pass either a polygon (tension integrated along its boundary) or a Stack.
    """
    if (polygon is None) == (stack is None):
        raise ValueError("pass exactly one of polygon or stack")
    if stack is not None:
        tau, area = stack.tau, stack.area
    else:
        tau = curve_surface_tension(geometry.norm, polygon)
        area = abs(polygon_area(polygon))
    best_tau, _ = optimal_stack_tau(area, geometry.w, ell_max=ell_max)
    return tau - best_tau


# ---------------------------------------------------------------------------
# level-area reduction of a compatible loop family


def _segments(poly: np.ndarray) -> np.ndarray:
    p = np.asarray(poly, dtype=float)
    return np.stack([p, np.roll(p, -1, axis=0)], axis=1)


def _proper_crossing(p1, p2, q1, q2) -> bool:
    """Strict interior crossing of segments p1p2 and q1q2."""
    d1 = p2 - p1
    d2 = q2 - q1
    denom = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(denom) < 1e-14:
        return False
    r = q1 - p1
    t = (r[0] * d2[1] - r[1] * d2[0]) / denom
    u = (r[0] * d1[1] - r[1] * d1[0]) / denom
    eps = 1e-12
    return eps < t < 1.0 - eps and eps < u < 1.0 - eps


def _point_inside(point, poly: np.ndarray) -> bool:
    """Even-odd ray test, robust enough for strictly interior probes."""
    x, y = point
    px = poly[:, 0]
    py = poly[:, 1]
    qx = np.roll(px, -1)
    qy = np.roll(py, -1)
    straddle = (py > y) != (qy > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xs = px + (y - py) * (qx - px) / (qy - py)
    return bool(np.sum(straddle & (xs > x)) % 2)


def _interior_point(poly: np.ndarray) -> np.ndarray:
    """A point strictly inside a simple polygon, via a horizontal cut."""
    ys = np.unique(poly[:, 1])
    if len(ys) > 1:
        y = 0.5 * (ys[0] + ys[1])
    else:
        y = ys[0]
    px, py = poly[:, 0], poly[:, 1]
    qx, qy = np.roll(px, -1), np.roll(py, -1)
    straddle = (py > y) != (qy > y)
    xs = np.sort(px[straddle] + (y - py[straddle]) * (qx[straddle] - px[straddle])
                 / (qy[straddle] - py[straddle]))
    return np.array([0.5 * (xs[0] + xs[1]), y])


def _contains(outer: np.ndarray, inner: np.ndarray) -> bool:
    return _point_inside(_interior_point(inner), outer)


def areas_by_level(loops: Sequence[np.ndarray], validate: bool = True) -> List[float]:
    """Areas covered at least 1, 2, ... times by a nested-or-disjoint family.

    With compatibility, the level-k area is the total area of loops at nesting
    depth exactly k, so the output is automatically non-increasing and sums to
    the total loop area.  Properly crossing loops are rejected.
    """
    polys = [np.asarray(p, dtype=float) for p in loops if len(p) >= 3]
    n = len(polys)
    if n == 0:
        return []
    areas = [abs(polygon_area(p)) for p in polys]
    if validate:
        for i in range(n):
            for j in range(i + 1, n):
                for p1, p2 in _segments(polys[i]):
                    for q1, q2 in _segments(polys[j]):
                        if _proper_crossing(p1, p2, q1, q2):
                            raise ValueError(f"loops {i} and {j} cross; family is "
                                             "not compatible")
    depth = np.ones(n, dtype=int)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            # identical repeated loops (a plaquette pile) nest by list order
            bigger = areas[j] > areas[i] + 1e-12
            twin = abs(areas[j] - areas[i]) <= 1e-12 and j < i
            if (bigger or twin) and _contains(polys[j], polys[i]):
                depth[i] += 1
    levels = [0.0] * int(depth.max())
    for i in range(n):
        levels[depth[i] - 1] += areas[i]
    return levels
