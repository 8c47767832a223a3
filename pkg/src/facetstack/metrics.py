"""Geometric comparison of sampled level lines against predicted stacks.

Distances live in the rescaled box [-1, 1]^2.  Layer heights stay in whole
monolayer units, so the three-dimensional epigraph metric mixes box lengths
horizontally with layer counts vertically; a missing or extra layer then
costs at least 1 regardless of how well the loops align.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.ndimage import distance_transform_edt
from scipy.spatial import cKDTree

from .norms import WulffGeometry, optimal_shape
from .stacks import Stack

BOX = (-1.0, 1.0, -1.0, 1.0)

_SAMPLE_SPACING = 1e-3        # boundary resampling, an order below tolerances
_SHIFT_GRID = 2e-3            # shift search resolution before refinement
_RASTER_N = 801               # epigraph raster, step 2.5e-3


def sample_polygon(vertices: np.ndarray, spacing: float = _SAMPLE_SPACING
                   ) -> np.ndarray:
    """Points along a closed polygon boundary at most `spacing` apart."""
    v = np.asarray(vertices, dtype=float)
    if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] != 2:
        raise ValueError("polygon must be a nonempty (K, 2) array")
    if v.shape[0] == 1:
        return v.copy()
    nxt = np.roll(v, -1, axis=0)
    out = []
    for p, q in zip(v, nxt):
        seg = q - p
        steps = max(1, int(math.ceil(math.hypot(*seg) / spacing)))
        t = np.arange(steps) / steps
        out.append(p + t[:, None] * seg)
    return np.concatenate(out)


def hausdorff(p_points: np.ndarray, q_points: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two sampled point sets."""
    p = np.asarray(p_points, dtype=float)
    q = np.asarray(q_points, dtype=float)
    if len(p) == 0 or len(q) == 0:
        raise ValueError("hausdorff needs nonempty point sets")
    d_pq = cKDTree(q).query(p)[0].max()
    d_qp = cKDTree(p).query(q)[0].max()
    return float(max(d_pq, d_qp))


def _admissible_box(template: np.ndarray, container: Tuple[float, float, float, float]):
    xmin, xmax, ymin, ymax = container
    tx0, ty0 = template.min(axis=0)
    tx1, ty1 = template.max(axis=0)
    lo = np.array([xmin - tx0, ymin - ty0])
    hi = np.array([xmax - tx1, ymax - ty1])
    if np.any(hi < lo - 1e-12):
        raise ValueError("template does not fit in the container at any shift")
    return lo, np.maximum(hi, lo)


def best_shift_hausdorff(p_polygon: np.ndarray, template_polygon: np.ndarray,
                         container: Tuple[float, float, float, float] = BOX,
                         spacing: float = _SAMPLE_SPACING,
                         grid_step: float = _SHIFT_GRID
                         ) -> Tuple[float, np.ndarray]:
    """Minimize hausdorff(P, x + template) over shifts keeping it contained.

    Multi-scale grid search down to `grid_step`, then halving pattern
    refinement.  The distance is 1-Lipschitz in the shift, so each zoom
    brackets the minimizer of the coarser level.
    """
    p = sample_polygon(p_polygon, spacing)
    q = sample_polygon(template_polygon, spacing)
    lo, hi = _admissible_box(q, container)
    p_tree = cKDTree(p)
    q_tree = cKDTree(q)

    def value(shift):
        d_qp = p_tree.query(q + shift)[0].max()     # shifted template -> P
        d_pq = q_tree.query(p - shift)[0].max()     # P -> shifted template
        return max(d_pq, d_qp)

    def clamp(shift):
        return np.minimum(np.maximum(shift, lo), hi)

    best_x = clamp(np.zeros(2))
    best_d = value(best_x)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1]))
    step = max(span / 8.0, grid_step)
    centre = best_x
    while True:
        xs = np.unique(np.clip(centre[0] + step * np.arange(-4, 5), lo[0], hi[0]))
        ys = np.unique(np.clip(centre[1] + step * np.arange(-4, 5), lo[1], hi[1]))
        for sx in xs:
            for sy in ys:
                d = value(np.array([sx, sy]))
                if d < best_d:
                    best_d, best_x = d, np.array([sx, sy])
        centre = best_x
        if step <= grid_step:
            break
        step = max(step / 4.0, grid_step)
    # local pattern refinement below the grid resolution
    step = grid_step / 2.0
    while step > grid_step / 16.0:
        moved = False
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1),
                       (-1, 1), (-1, -1)):
            cand = clamp(best_x + step * np.array([dx, dy]))
            d = value(cand)
            if d < best_d:
                best_d, best_x, moved = d, cand, True
        if not moved:
            step /= 2.0
    return float(best_d), best_x


# ---------------------------------------------------------------------------
# stack predictions and the epigraph metric

@dataclass(frozen=True)
class StackPrediction:
    """Nested layer polygons, bottom first; height = layers containing y."""

    polygons: Tuple[np.ndarray, ...]
    kind: str

    @property
    def layers(self) -> int:
        return len(self.polygons)

    @classmethod
    def from_stack(cls, geometry: WulffGeometry, stack: Stack) -> "StackPrediction":
        polys = tuple(optimal_shape(geometry, b)[0]
                      for b in stack.per_layer_areas)
        return cls(polygons=polys, kind=stack.kind)


def _inside_loop(xaxis: np.ndarray, yaxis: np.ndarray,
                 loop: np.ndarray) -> np.ndarray:
    """Even-odd point-in-polygon over a grid; works for any closed loop.

    Each edge only toggles the rows its y-span crosses, which keeps the cost
    proportional to the loop perimeter rather than edge count times grid.
    """
    v = np.asarray(loop, dtype=float)
    inside = np.zeros((len(yaxis), len(xaxis)), dtype=bool)
    x0, y0 = v[:, 0], v[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    for a0, b0, a1, b1 in zip(x0, y0, x1, y1):
        if b0 == b1:
            continue
        ylo, yhi = (b0, b1) if b0 < b1 else (b1, b0)
        r0 = np.searchsorted(yaxis, ylo, side="right")    # rows with y > ylo
        r1 = np.searchsorted(yaxis, yhi, side="right")    # half-open at yhi
        if r0 == r1:
            continue
        ys = yaxis[r0:r1]
        xcut = a0 + (ys - b0) * (a1 - a0) / (b1 - b0)
        inside[r0:r1, :] ^= xaxis[None, :] < xcut[:, None]
    return inside


def _convex_inside(xaxis: np.ndarray, yaxis: np.ndarray,
                   poly: np.ndarray) -> np.ndarray:
    """Wedge lookup for convex polygons with many edges (Wulff shapes)."""
    v = np.asarray(poly, dtype=float)
    if len(v) <= 16:
        return _inside_loop(xaxis, yaxis, v)
    xg, yg = np.meshgrid(xaxis, yaxis, indexing="xy")
    centre = v.mean(axis=0)
    ang = np.arctan2(v[:, 1] - centre[1], v[:, 0] - centre[0])
    order = np.argsort(ang)
    v = v[order]
    ang = ang[order]
    pa = np.arctan2(yg - centre[1], xg - centre[0])
    idx = np.searchsorted(ang, pa) - 1
    idx = np.where(idx < 0, len(v) - 1, idx)
    a = v[idx]
    b = v[(idx + 1) % len(v)]
    cross = ((b[..., 0] - a[..., 0]) * (yg - a[..., 1])
             - (b[..., 1] - a[..., 1]) * (xg - a[..., 0]))
    return cross >= 0.0


def _edt(mask: np.ndarray, step: float) -> np.ndarray:
    """Distance to the True region, in physical units; inf for empty masks."""
    if not mask.any():
        return np.full(mask.shape, np.inf)
    return distance_transform_edt(~mask, sampling=step)


def _surface_sup(heights: np.ndarray, other_edts: Sequence[np.ndarray]) -> float:
    """sup over surface points (y, h(y)), h >= 1, of the epigraph distance.

    dist((y, t), E)^2 = min(t^2, min_m [D_m(y)^2 + max(t - m, 0)^2]); the
    m = 0 term is t^2 because level 0 covers the whole box.
    """
    pts = heights >= 1
    if not pts.any():
        return 0.0
    t = heights[pts].astype(float)
    best = t * t
    for m, edt in enumerate(other_edts, start=1):
        dz = np.maximum(t - m, 0.0)
        best = np.minimum(best, edt[pts] ** 2 + dz * dz)
    return float(np.sqrt(best.max()))


class _EpigraphWorkspace:
    """Cached rasters for one observed family / prediction pair."""

    def __init__(self, observed_levels: Sequence[np.ndarray],
                 prediction: StackPrediction, grid_n: int):
        self.step = 2.0 / (grid_n - 1)
        axis = np.linspace(-1.0, 1.0, grid_n)
        self.h_obs = np.zeros((grid_n, grid_n), dtype=np.int64)
        for loop in observed_levels:
            self.h_obs += _inside_loop(axis, axis, loop)
        self.obs_edts = [_edt(self.h_obs >= m, self.step)
                         for m in range(1, int(self.h_obs.max(initial=0)) + 1)]

        self.layers = prediction.layers
        self.h_low = np.zeros((grid_n, grid_n), dtype=np.int64)
        for poly in prediction.polygons[:-1]:
            self.h_low += _convex_inside(axis, axis, poly)
        if self.layers:
            self.top_mask = _convex_inside(axis, axis,
                                           prediction.polygons[-1])
            top = prediction.polygons[-1]
            lo, hi = _admissible_box(np.asarray(top, dtype=float), BOX)
            self.shift_lo = np.ceil(lo / self.step - 1e-9).astype(int)
            self.shift_hi = np.floor(hi / self.step + 1e-9).astype(int)
        self.low_edts = [_edt(self.h_low >= m, self.step)
                         for m in range(1, self.layers)]
        self._cache = {}

    def _rolled_top(self, di: int, dj: int) -> np.ndarray:
        out = np.zeros_like(self.top_mask)
        src = self.top_mask
        rows, cols = src.shape
        r0, r1 = max(0, dj), min(rows, rows + dj)
        c0, c1 = max(0, di), min(cols, cols + di)
        out[r0:r1, c0:c1] = src[r0 - dj:r1 - dj, c0 - di:c1 - di]
        return out

    def value(self, di: int, dj: int) -> float:
        """Two-sided epigraph distance with the top layer shifted by cells."""
        if (di, dj) in self._cache:
            return self._cache[(di, dj)]
        if self.layers == 0:
            h_pred = self.h_low
            pred_edts = []
        else:
            top = self._rolled_top(di, dj)
            h_pred = self.h_low + top
            if self.layers == 1 or not np.any(top & ~(self.h_low >= self.layers - 1)):
                pred_edts = self.low_edts + [_edt(top, self.step)]
            else:
                # shifted top pokes outside the lower stack; level sets change
                pred_edts = [_edt(h_pred >= m, self.step)
                             for m in range(1, int(h_pred.max(initial=0)) + 1)]
        d = max(_surface_sup(self.h_obs, pred_edts),
                _surface_sup(h_pred, self.obs_edts))
        self._cache[(di, dj)] = d
        return d


def epigraph_search(observed_levels: Sequence[np.ndarray],
                    prediction: StackPrediction,
                    grid_n: int = _RASTER_N) -> Tuple[float, np.ndarray]:
    """Epigraph distance minimized over contained shifts of the top layer.

    Shifts are quantized to raster cells; the returned shift is in box units.
    """
    ws = _EpigraphWorkspace(observed_levels, prediction, grid_n)
    if ws.layers == 0:
        return ws.value(0, 0), np.zeros(2)
    lo, hi = ws.shift_lo, ws.shift_hi
    centre = np.array([0, 0])
    centre = np.minimum(np.maximum(centre, lo), hi)
    best = (ws.value(*centre), centre)
    span = int(max(hi[0] - lo[0], hi[1] - lo[1]))
    step = max(span // 8, 1)
    while True:
        xs = np.unique(np.clip(centre[0] + step * np.arange(-4, 5), lo[0], hi[0]))
        ys = np.unique(np.clip(centre[1] + step * np.arange(-4, 5), lo[1], hi[1]))
        for di in xs:
            for dj in ys:
                d = ws.value(int(di), int(dj))
                if d < best[0]:
                    best = (d, np.array([di, dj]))
        centre = best[1]
        if step == 1:
            break
        step = max(step // 4, 1)
    return best[0], best[1] * ws.step


def epigraph_distance(observed_levels: Sequence[np.ndarray],
                      prediction: StackPrediction,
                      grid_n: int = _RASTER_N) -> float:
    return epigraph_search(observed_levels, prediction, grid_n)[0]


def compare_stacks(observed_levels: Sequence[np.ndarray],
                   prediction: StackPrediction,
                   grid_n: int = _RASTER_N,
                   spacing: float = _SAMPLE_SPACING) -> dict:
    """Comparison report: per-layer loop distances plus the epigraph metric.

    Lower layers are compared in place; the top predicted layer is compared
    at its best contained shift, mirroring the epigraph convention.
    """
    dist, shift = epigraph_search(observed_levels, prediction, grid_n)
    per_layer = []
    for m in range(min(len(observed_levels), prediction.layers)):
        obs = observed_levels[m]
        pred = prediction.polygons[m]
        if m == prediction.layers - 1:
            d, _ = best_shift_hausdorff(obs, pred, BOX, spacing)
        else:
            d = hausdorff(sample_polygon(obs, spacing),
                          sample_polygon(pred, spacing))
        per_layer.append(float(d))
    return {"per_layer_distances": per_layer,
            "top_shift": [float(shift[0]), float(shift[1])],
            "epigraph_distance": float(dist),
            "layer_counts": {"observed": len(observed_levels),
                             "predicted": prediction.layers}}


def rasterize_prediction(prediction: StackPrediction, n: int):
    """Integer heights of the predicted stack at lattice-cell resolution.

    Cell (row, col) of the (2n-1)^2 box has its centre at
    ((col + 1 - n)/n, (row + 1 - n)/n) in rescaled coordinates.
    """
    side = 2 * n - 1
    centres = (np.arange(side) + 1.0 - n) / n
    heights = np.zeros((side, side), dtype=np.int64)
    for poly in prediction.polygons:
        heights += _convex_inside(centres, centres, poly)
    return heights


# ---------------------------------------------------------------------------
# skeleton coarse-graining

@dataclass(frozen=True)
class Skeleton:
    """First-exit subsample of a contour walk at hop scale."""

    vertices: np.ndarray
    hop: float
    source_level: int

    def rescaled(self, n: int) -> np.ndarray:
        return (np.asarray(self.vertices, dtype=float) - (n - 0.5)) / n


def skeletonize(contour, hop: float) -> Skeleton:
    """Keep the first vertex whose l1 distance from the last kept one
    exceeds `hop`; a walk that never exits yields one vertex."""
    if hop < 1:
        raise ValueError("hop must be at least 1")
    verts = np.asarray(contour.vertices, dtype=np.int64)
    kept = [0]
    last = verts[0]
    for m in range(1, len(verts)):
        if np.abs(verts[m] - last).sum() > hop:
            kept.append(m)
            last = verts[m]
    return Skeleton(vertices=verts[kept], hop=float(hop),
                    source_level=contour.level)
