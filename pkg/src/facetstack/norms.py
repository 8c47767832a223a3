"""Lattice-symmetric planar norms, Wulff shapes, Wulff plaquettes, curve tension.

All norms are normalized so the axis direction has value 1.  The Wulff shape
of a norm tau is the boundary of {x : x . n <= tau(n) for all unit n}; with the
normalization its half-width along each axis is 1 and its area w lies in
(0, 4].  The Wulff plaquette of radius r is the convex hull of four radius-r
Wulff shapes placed in the corners of the box [-1, 1]^2.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Union

import numpy as np
from scipy.spatial import ConvexHull

logger = logging.getLogger("facetstack.norms")

LOG4 = math.log(4.0)

# walk weight 2*exp(-beta)*(cosh u1 + cosh u2) = 1 <=> cosh u1 + cosh u2 = C
def _killed_walk_level(beta: float) -> float:
    return 0.5 * math.exp(beta)


def _acosh(y: float) -> float:
    # math.acosh squares its argument internally; switch to the log form
    # (absolute error < 1/(4 y^2)) before that overflows
    if y > 1e150:
        return math.log(2.0) + math.log(y)
    return math.acosh(y)


def _fold_vector(x, y):
    """Map (x, y) to the fundamental domain a >= b >= 0 of the square symmetries."""
    a = np.abs(np.asarray(x, dtype=float))
    b = np.abs(np.asarray(y, dtype=float))
    return np.maximum(a, b), np.minimum(a, b)


class Norm:
    """A norm on the plane with the full symmetry group of the square lattice.

    Evaluation folds the argument into the fundamental domain first, so the
    symmetry identities tau(theta) = tau(theta + pi/2) = tau(-theta) hold
    exactly, not just to roundoff.
    """

    def __init__(self, family_tag: str, params: Dict, raw_axis_value: float):
        if raw_axis_value <= 0.0:
            raise ValueError("norm axis value must be positive")
        self.family_tag = family_tag
        self.params = dict(params)
        self.raw_axis_value = float(raw_axis_value)

    def _raw(self, a, b):
        """Unnormalized norm on the fundamental domain a >= b >= 0."""
        raise NotImplementedError

    def of_vector(self, x, y):
        """Normalized norm of the vector (x, y); positively homogeneous."""
        a, b = _fold_vector(x, y)
        scalar = a.ndim == 0
        a = np.atleast_1d(a)
        b = np.atleast_1d(b)
        out = np.zeros_like(a)
        nz = a > 0.0
        if np.any(nz):
            out[nz] = self._raw(a[nz], b[nz]) / self.raw_axis_value
        return float(out[0]) if scalar else out

    def __call__(self, theta):
        """Normalized norm of the unit vector at angle theta."""
        theta = np.asarray(theta, dtype=float)
        return self.of_vector(np.cos(theta), np.sin(theta))


class EuclideanNorm(Norm):
    def __init__(self):
        super().__init__("euclidean", {}, 1.0)

    def _raw(self, a, b):
        return np.hypot(a, b)


class KilledWalkNorm(Norm):
    """Support function of the killed simple-random-walk rate region.

    tau_raw(x) = max{u . x : cosh u1 + cosh u2 = C} with C = exp(beta)/2,
    normalized by the axis value arccosh(C - 1).  Requires beta > ln 4 so the
    region has nonempty interior.
    """

    def __init__(self, beta: float):
        if not beta > LOG4:
            raise ValueError(f"killed_walk requires beta > ln 4 = {LOG4:.6f}, got {beta}")
        if beta > 700.0:
            raise ValueError("killed_walk level exp(beta)/2 exceeds float range above "
                             "beta = 700")
        self._level = _killed_walk_level(beta)
        axis = _acosh(self._level - 1.0)
        super().__init__("killed_walk", {"beta": float(beta)}, axis)

    def _raw(self, a, b):
        # Lagrange conditions give u_i = asinh(x_i * t) with t the root of
        # sqrt(1 + (a t)^2) + sqrt(1 + (b t)^2) = C; the left side is increasing
        # and convex in t, so Newton from the right of the root is monotone.
        # hypot keeps the iteration finite for C near the float ceiling.
        C = self._level
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        t = C / a  # f(t) >= sqrt(1 + C^2) > C: starts above the root
        for _ in range(200):
            sa = np.hypot(1.0, a * t)
            sb = np.hypot(1.0, b * t)
            f = sa + sb - C
            fp = (a * a * t) / sa + (b * b * t) / sb
            step = f / fp
            t = t - step
            if np.all(np.abs(step) <= 1e-15 * t):
                break
        return a * np.arcsinh(a * t) + b * np.arcsinh(b * t)


class SampledNorm(Norm):
    """Norm interpolated from an angular table on [0, pi/4], symmetrized."""

    def __init__(self, table: np.ndarray):
        thetas, values = _symmetrize_table(table)
        self._thetas = thetas
        self._values = values
        axis = float(np.interp(0.0, thetas, values))
        super().__init__("sampled", {"points": len(thetas)}, axis)

    def _raw(self, a, b):
        theta = np.arctan2(b, a)  # already in [0, pi/4] on the folded domain
        return np.hypot(a, b) * np.interp(theta, self._thetas, self._values)


def _symmetrize_table(table: np.ndarray):
    """Fold table angles into [0, pi/4]; reject tables that break the symmetry."""
    table = np.asarray(table, dtype=float)
    if table.ndim != 2 or table.shape[1] != 2 or len(table) < 2:
        raise ValueError("sampled norm table must be an (n, 2) array with n >= 2")
    if np.any(table[:, 1] <= 0.0):
        raise ValueError("sampled norm values must be positive")
    theta = np.mod(table[:, 0], 0.5 * np.pi)
    theta = np.where(theta > 0.25 * np.pi, 0.5 * np.pi - theta, theta)
    order = np.argsort(theta)
    theta, values = theta[order], table[order, 1]
    # entries folding onto the same angle must agree, else the table is asymmetric
    for i in range(1, len(theta)):
        if theta[i] - theta[i - 1] < 1e-9 and abs(values[i] - values[i - 1]) > 1e-8 * values[i]:
            raise ValueError("asymmetric sample table: conflicting values at folded angle "
                             f"{theta[i]:.6f}")
    keep = np.concatenate(([True], np.diff(theta) >= 1e-9))
    theta, values = theta[keep], values[keep]
    if theta[0] > 1e-2 or theta[-1] < 0.25 * np.pi - 1e-2:
        logger.warning("sampled norm table leaves gaps at the domain ends; "
                       "values are clamped there")
    return theta, values


def read_sampled_table(path: str) -> np.ndarray:
    """Read a `theta,value` table, one pair per line, '#' comments allowed."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                rows.append((float(parts[0]), float(parts[1])))
            except (IndexError, ValueError):
                if not rows:
                    continue  # tolerate a header line
                raise ValueError(f"malformed table line: {line!r}")
    return np.asarray(rows, dtype=float)


def make_norm(family_tag: str, params: Optional[Dict] = None) -> Norm:
    """Construct one of the built-in norm families.

    euclidean: no parameters.  killed_walk: {"beta": b} with b > ln 4.
    sampled: {"table": (n, 2) array or path to a theta,value file}.
    """
    params = dict(params or {})
    if family_tag == "euclidean":
        return EuclideanNorm()
    if family_tag == "killed_walk":
        return KilledWalkNorm(float(params["beta"]))
    if family_tag == "sampled":
        table = params["table"]
        if isinstance(table, (str, bytes)):
            table = read_sampled_table(table)
        return SampledNorm(np.asarray(table, dtype=float))
    raise ValueError(f"unknown norm family {family_tag!r}")


def polygon_area(vertices: np.ndarray) -> float:
    """Signed shoelace area; positive for counterclockwise orientation."""
    v = np.asarray(vertices, dtype=float)
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def write_polygon_csv(path: str, vertices: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,y\n")
        for x, y in np.asarray(vertices, dtype=float):
            fh.write(f"{x:.12g},{y:.12g}\n")


def read_polygon_csv(path: str) -> np.ndarray:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("x,"):
                continue
            a, b = line.split(",")
            rows.append((float(a), float(b)))
    return np.asarray(rows, dtype=float)


@dataclass(frozen=True)
class WulffGeometry:
    """Radius-1 Wulff shape of a norm as a polygon, with its area w."""

    norm: Norm
    vertices: np.ndarray  # counterclockwise, closed implicitly
    w: float
    facet_count: int


def build_wulff(norm: Norm, facet_count: int = 1024) -> WulffGeometry:
    """Intersect half-planes {x . n_k <= tau(n_k)} at equally spaced normals.

    The polar-dual convex hull prunes inactive half-planes, so tables that are
    not exact support functions still produce the correct convex shape.  The
    polygon is rescaled so its half-width along the axes is exactly 1.
    """
    M = int(facet_count)
    if M < 16 or M % 4 != 0:
        raise ValueError("facet_count must be a multiple of 4, at least 16")
    phi = 2.0 * np.pi * np.arange(M) / M
    normals = np.column_stack([np.cos(phi), np.sin(phi)])
    taus = np.asarray(norm(phi), dtype=float)
    hull = ConvexHull(normals / taus[:, None])
    idx = hull.vertices  # counterclockwise order of active half-planes
    n1, t1 = normals[idx], taus[idx]
    n2, t2 = np.roll(n1, -1, axis=0), np.roll(t1, -1)
    det = n1[:, 0] * n2[:, 1] - n1[:, 1] * n2[:, 0]
    x = (t1 * n2[:, 1] - t2 * n1[:, 1]) / det
    y = (n1[:, 0] * t2 - n2[:, 0] * t1) / det
    vertices = np.column_stack([x, y])
    half_width = float(np.max(np.abs(vertices[:, 0])))
    vertices = vertices / half_width
    return WulffGeometry(norm=norm, vertices=vertices, w=polygon_area(vertices),
                         facet_count=M)


_BOX = np.array([(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)])


def wulff_plaquette(geometry: WulffGeometry, radius: float) -> np.ndarray:
    """Convex hull of four radius-r Wulff shapes in the corners of [-1, 1]^2."""
    r = float(radius)
    if not 0.0 <= r <= 1.0 + 1e-12:
        raise ValueError(f"plaquette radius must lie in [0, 1], got {r}")
    r = min(r, 1.0)
    if r < 1e-12:
        return _BOX.copy()
    if r > 1.0 - 1e-12:
        return geometry.vertices.copy()
    d = 1.0 - r
    pts = np.concatenate([r * geometry.vertices + np.array(offset)
                          for offset in ((d, d), (-d, d), (-d, -d), (d, -d))])
    hull = ConvexHull(pts)
    return pts[hull.vertices]


def optimal_shape(geometry: WulffGeometry, b: float):
    """Area-b optimizer: Wulff shape for b <= w, Wulff plaquette for b > w.

    Returns (polygon, radius, tau_value) with the closed-form radius and
    surface tension of the chosen branch.
    """
    w = geometry.w
    if not -1e-12 <= b <= 4.0 + 1e-12:
        raise ValueError(f"area must lie in [0, 4], got {b}")
    b = min(max(b, 0.0), 4.0)
    if b <= w:
        r = math.sqrt(b / w)
        tau = 2.0 * math.sqrt(b * w)
        return r * geometry.vertices, r, tau
    r = math.sqrt((4.0 - b) / (4.0 - w))
    tau = 8.0 - 2.0 * math.sqrt((4.0 - w) * (4.0 - b))
    return wulff_plaquette(geometry, r), r, tau


def curve_surface_tension(norm: Norm, vertices: np.ndarray) -> float:
    """Line integral of the norm over the outward normals of a closed polygon."""
    v = np.asarray(vertices, dtype=float)
    if len(v) < 3:
        return 0.0
    d = np.roll(v, -1, axis=0) - v
    lengths = np.hypot(d[:, 0], d[:, 1])
    keep = lengths > 0.0  # degenerate edges contribute nothing
    if polygon_area(v) < 0.0:
        d = -d
    # outward normal of a counterclockwise edge (dx, dy) is (dy, -dx); the
    # norm is 1-homogeneous, so evaluating it on the unnormalized normal
    # already includes the edge length factor
    return float(np.sum(norm.of_vector(d[keep, 1], -d[keep, 0])))
