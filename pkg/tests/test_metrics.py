"""Shape-distance metrics: loop matching, epigraph distance, skeletons."""

import math

import numpy as np
import pytest

from facetstack.lattice import Contour, HeightField, extract_contours
from facetstack.metrics import (BOX, StackPrediction, best_shift_hausdorff,
                                compare_stacks, epigraph_distance,
                                epigraph_search, hausdorff,
                                rasterize_prediction, sample_polygon,
                                skeletonize)
from facetstack.norms import build_wulff, make_norm, polygon_area
from facetstack.stacks import type1_stack, type2_stack


def square(cx, cy, half):
    return np.array([[cx + half, cy + half], [cx - half, cy + half],
                     [cx - half, cy - half], [cx + half, cy - half]])


def test_sample_polygon_spacing():
    pts = sample_polygon(square(0, 0, 1.0), spacing=0.01)
    assert len(pts) >= 800
    gaps = np.linalg.norm(np.diff(np.vstack([pts, pts[:1]]), axis=0), axis=1)
    assert gaps.max() <= 0.01 + 1e-12


def test_hausdorff_basics():
    p = sample_polygon(square(0, 0, 1.0), 0.005)
    assert hausdorff(p, p) == 0.0
    q = sample_polygon(square(0.5, 0, 1.0), 0.005)
    assert hausdorff(p, q) == pytest.approx(0.5, abs=0.01)
    # scaling covariance
    assert hausdorff(2 * p, 2 * q) == pytest.approx(2 * hausdorff(p, q),
                                                    rel=1e-12)
    with pytest.raises(ValueError):
        hausdorff(p, np.empty((0, 2)))


def test_hausdorff_triangle_inequality():
    rng = np.random.default_rng(8)
    clouds = [rng.uniform(-1, 1, size=(40, 2)) for _ in range(3)]
    a, b, c = clouds
    assert hausdorff(a, c) <= hausdorff(a, b) + hausdorff(b, c) + 1e-12


def test_best_shift_recovers_translation():
    d, shift = best_shift_hausdorff(square(0.3, -0.2, 0.4), square(0, 0, 0.4))
    assert d < 1e-4
    assert shift == pytest.approx([0.3, -0.2], abs=1e-3)


def test_best_shift_clamps_to_container():
    # target sits past the admissible range; best shift lands on the wall
    d, shift = best_shift_hausdorff(square(1.4, 0.0, 0.3), square(0, 0, 0.3))
    assert d == pytest.approx(0.7, abs=1e-9)
    assert shift == pytest.approx([0.7, 0.0], abs=1e-9)


def test_best_shift_rejects_oversized_template():
    with pytest.raises(ValueError, match="does not fit"):
        best_shift_hausdorff(square(0, 0, 1.0), square(0, 0, 1.5))


def prediction_for(areas, kind="type2"):
    geo = build_wulff(make_norm("killed_walk", {"beta": 3.0}), 256)
    if kind == "type2":
        stack = type2_stack(len(areas), float(sum(areas)), geo.w)
    else:
        stack = type1_stack(len(areas), float(sum(areas)), geo.w)
    return geo, StackPrediction.from_stack(geo, stack)


def test_prediction_from_stack_layout():
    geo, pred = prediction_for([3.6, 3.6], kind="type2")
    assert pred.layers == 2
    assert len(pred.polygons) == 2
    for poly, want in zip(pred.polygons, (3.6, 3.6)):
        assert abs(polygon_area(poly)) == pytest.approx(want, rel=1e-9)
    # a single capped layer is the scaled droplet
    geo, pred = prediction_for([3.0], kind="type1")
    assert pred.layers == 1
    assert np.abs(np.asarray(pred.polygons[0])).max() < 1.0


def test_epigraph_identity_is_zero():
    _, pred = prediction_for([3.6, 3.6])
    observed = [np.asarray(p) for p in pred.polygons]
    assert epigraph_distance(observed, pred, grid_n=201) < 0.02


def test_epigraph_missing_layer_is_one():
    _, pred = prediction_for([3.6, 3.6])
    observed = [np.asarray(pred.polygons[0])]
    d = epigraph_distance(observed, pred, grid_n=201)
    assert d == pytest.approx(1.0, abs=0.02)


def test_epigraph_recovers_top_shift():
    # only a droplet cap has room to slide; flat-pile tops span the box
    _, pred = prediction_for([3.64, 2.56], kind="type1")
    delta = np.array([0.10, -0.06])
    observed = [np.asarray(pred.polygons[0]),
                np.asarray(pred.polygons[1]) + delta]
    d, shift = epigraph_search(observed, pred, grid_n=201)
    assert d < 0.03
    assert shift == pytest.approx(delta, abs=0.02)


def test_epigraph_single_layer_tracks_loop_metric():
    # shiftable droplet: both metrics chase the same translation
    _, pred = prediction_for([3.0], kind="type1")
    delta = np.array([0.05, 0.0])
    moved = np.asarray(pred.polygons[0]) + delta
    d_epi, shift = epigraph_search([moved], pred, grid_n=201)
    d_loop, _ = best_shift_hausdorff(moved, np.asarray(pred.polygons[0]))
    assert d_epi == pytest.approx(d_loop, abs=0.02)
    assert d_epi < 0.02
    assert shift == pytest.approx(delta, abs=0.02)
    # wall-to-wall pile: no admissible shift, both metrics see the residual
    _, pred = prediction_for([3.8], kind="type2")
    moved = np.asarray(pred.polygons[0]) + np.array([0.15, 0.0])
    d_epi, shift = epigraph_search([moved], pred, grid_n=201)
    d_loop, _ = best_shift_hausdorff(moved, np.asarray(pred.polygons[0]))
    assert shift == pytest.approx([0.0, 0.0], abs=1e-12)
    assert d_epi == pytest.approx(0.15, abs=0.02)
    assert d_loop == pytest.approx(0.15, abs=1e-6)


def test_compare_stacks_report():
    _, pred = prediction_for([3.6, 3.6])
    observed = [np.asarray(p) for p in pred.polygons]
    rep = compare_stacks(observed, pred, grid_n=201)
    assert rep["layer_counts"] == {"observed": 2, "predicted": 2}
    assert rep["epigraph_distance"] < 0.02
    assert len(rep["per_layer_distances"]) == 2
    assert all(d < 0.02 for d in rep["per_layer_distances"])
    assert rep["top_shift"] == pytest.approx([0.0, 0.0], abs=0.02)


def test_rasterize_prediction():
    _, pred = prediction_for([3.6, 3.6])
    n = 24
    heights = rasterize_prediction(pred, n)
    assert heights.shape == (2 * n - 1, 2 * n - 1)
    assert heights.max() == 2
    assert heights[n - 1, n - 1] == 2       # centre cell sits under both
    assert heights[0, 0] == 0
    # cell area 1/n^2 in box units; total volume tracks the stack area
    vol = heights.sum() / n ** 2
    assert vol == pytest.approx(7.2, abs=0.15)


def square_walk():
    verts = [(0, 0)] + [(i, 0) for i in range(1, 6)] \
        + [(5, j) for j in range(1, 6)] + [(i, 5) for i in range(4, -1, -1)] \
        + [(0, j) for j in range(4, 0, -1)]
    return Contour(level=1, sign=1, vertices=tuple(verts), area=25,
                   interior_rows=())


def test_skeleton_hand_trace():
    sk = skeletonize(square_walk(), 5.0)
    assert np.array_equal(sk.vertices, [[0, 0], [5, 1], [3, 5], [0, 2]])
    assert sk.source_level == 1
    assert sk.hop == 5.0


def test_skeleton_degenerate_and_guards():
    tiny = Contour(level=1, sign=1, area=1, interior_rows=(),
                   vertices=((3, 3), (4, 3), (4, 4), (3, 4)))
    sk = skeletonize(tiny, 8.0)
    assert np.array_equal(sk.vertices, [[3, 3]])
    with pytest.raises(ValueError):
        skeletonize(tiny, 0.5)


def test_skeleton_hop_property_on_real_contours():
    rng = np.random.default_rng(4)
    f = HeightField(8)
    f.heights[3:10, 4:12] = 1
    f.heights[5:8, 6:9] = 2
    for c in extract_contours(f).contours:
        hop = 3.0
        sk = skeletonize(c, hop)
        v = sk.vertices
        for a, b in zip(v, v[1:]):
            assert np.abs(a - b).sum() > hop
        scaled = sk.rescaled(8)
        assert np.all(np.abs(scaled) <= 1.0)
