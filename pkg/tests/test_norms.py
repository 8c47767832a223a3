"""Direction-dependent edge costs and the optimal droplet geometry."""

import math

import numpy as np
import pytest

from facetstack.norms import (EuclideanNorm, KilledWalkNorm, SampledNorm,
                              build_wulff, curve_surface_tension, make_norm,
                              polygon_area, read_polygon_csv,
                              read_sampled_table, wulff_plaquette,
                              optimal_shape, write_polygon_csv)

# level constant C = e^beta / 2 at beta = 3; axis value acosh(C - 1)
KW3_AXIS = 2.8920411433576265
# diagonal from the symmetric critical point 2*acosh(C/2)/sqrt(2), normalized
KW3_DIAG = 1.1231331725222782
# box area of the beta = 3 droplet at 1024 facets
KW3_W_1024 = 3.505578702253829


def test_euclidean_is_constant_one():
    n = EuclideanNorm()
    for theta in np.linspace(-3.0, 3.0, 17):
        assert n(theta) == pytest.approx(1.0, abs=1e-15)
    assert n.raw_axis_value == 1.0


def test_killed_walk_frozen_values():
    n = make_norm("killed_walk", {"beta": 3.0})
    assert n.raw_axis_value == pytest.approx(KW3_AXIS, rel=1e-14)
    assert math.acosh(math.exp(3.0) / 2 - 1) == pytest.approx(KW3_AXIS)
    assert n(0.0) == pytest.approx(1.0, abs=1e-14)
    assert n(math.pi / 4) == pytest.approx(KW3_DIAG, rel=1e-12)


def test_killed_walk_parameter_guards():
    with pytest.raises(ValueError):
        KilledWalkNorm(1.0)          # below ln 4: level set is empty
    with pytest.raises(ValueError):
        KilledWalkNorm(math.log(4.0))
    with pytest.raises(ValueError):
        KilledWalkNorm(800.0)        # cosh overflow territory
    KilledWalkNorm(1.5)              # just above ln 4 is fine


def test_norm_axioms_on_random_vectors():
    n = make_norm("killed_walk", {"beta": 2.0})
    rng = np.random.default_rng(0)
    for _ in range(50):
        x, y = rng.normal(size=2) * 3
        v = n.of_vector(x, y)
        assert v >= 0
        # dihedral symmetry
        assert n.of_vector(-x, y) == pytest.approx(v, rel=1e-12)
        assert n.of_vector(x, -y) == pytest.approx(v, rel=1e-12)
        assert n.of_vector(y, x) == pytest.approx(v, rel=1e-12)
        # positive homogeneity
        assert n.of_vector(2.5 * x, 2.5 * y) == pytest.approx(2.5 * v, rel=1e-12)
        # triangle inequality against a second vector
        u, w = rng.normal(size=2) * 3
        lhs = n.of_vector(x + u, y + w)
        assert lhs <= n.of_vector(x, y) + n.of_vector(u, w) + 1e-10


def test_sampled_norm_reproduces_source():
    src = make_norm("killed_walk", {"beta": 3.0})
    thetas = np.linspace(0.0, math.pi / 4, 513)
    table = np.column_stack([thetas, [src(t) for t in thetas]])
    approx = SampledNorm(table)
    assert approx.raw_axis_value == pytest.approx(1.0, abs=1e-12)
    for t in np.linspace(0.0, 2 * math.pi, 37):
        assert approx(t) == pytest.approx(float(src(t)), rel=1e-5)


def test_sampled_norm_rejects_bad_tables():
    with pytest.raises(ValueError):
        SampledNorm(np.array([[0.0, 1.0]]))          # too short
    with pytest.raises(ValueError):
        SampledNorm(np.array([[0.0, 1.0], [0.1, -2.0]]))
    # same folded angle, conflicting values
    bad = np.array([[0.1, 1.0], [math.pi / 2 - 0.1, 1.5], [0.0, 1.0]])
    with pytest.raises(ValueError, match="asymmetric"):
        SampledNorm(bad)


def test_read_sampled_table(tmp_path):
    path = tmp_path / "table.csv"
    path.write_text("theta,value\n# comment\n0.0,1.0\n0.3,1.1\n0.785,1.2\n")
    table = read_sampled_table(str(path))
    assert table.shape == (3, 2)
    norm = make_norm("sampled", {"table": str(path)})
    assert norm(0.0) == pytest.approx(1.0)
    with pytest.raises(ValueError, match="malformed"):
        path.write_text("0.0,1.0\noops,1.1\n")
        read_sampled_table(str(path))


def test_make_norm_unknown_family():
    with pytest.raises(ValueError, match="unknown norm family"):
        make_norm("manhattan")


def test_polygon_area_and_csv_roundtrip(tmp_path):
    square = np.array([[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]])
    assert polygon_area(square) == pytest.approx(4.0)
    assert polygon_area(square[::-1]) == pytest.approx(-4.0)
    path = tmp_path / "poly.csv"
    write_polygon_csv(str(path), square)
    back = read_polygon_csv(str(path))
    assert np.array_equal(back, square)


def test_wulff_euclidean_area_converges():
    geo = build_wulff(EuclideanNorm(), 4096)
    # circumscribed polygon: slightly above pi, excess ~ pi^3 / (3 M^2)
    assert geo.w > math.pi
    assert geo.w - math.pi < 1e-6
    assert abs(np.max(geo.vertices[:, 0]) - 1.0) < 1e-12


def test_wulff_facet_count_validation():
    with pytest.raises(ValueError):
        build_wulff(EuclideanNorm(), 12)
    with pytest.raises(ValueError):
        build_wulff(EuclideanNorm(), 30)  # not a multiple of 4


def test_wulff_killed_walk_frozen_area():
    geo = build_wulff(make_norm("killed_walk", {"beta": 3.0}), 1024)
    assert geo.w == pytest.approx(KW3_W_1024, rel=1e-12)
    # dihedral symmetry of the vertex set
    vs = geo.vertices
    for sx, sy, swap in [(-1, 1, False), (1, -1, False), (1, 1, True)]:
        mapped = vs[:, ::-1] if swap else vs
        mapped = mapped * np.array([sx, sy])
        dists = np.min(np.linalg.norm(vs[:, None, :] - mapped[None, :, :],
                                      axis=2), axis=1)
        assert dists.max() < 1e-9


def test_tau_perimeter_of_scaled_droplet():
    norm = make_norm("killed_walk", {"beta": 3.0})
    geo = build_wulff(norm, 1024)
    for r in (0.25, 0.5, 1.0):
        tau = curve_surface_tension(norm, r * geo.vertices)
        assert tau == pytest.approx(2.0 * r * geo.w, rel=1e-9)


def test_box_tau_is_eight_for_any_normalized_norm():
    box = np.array([[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]])
    for norm in (EuclideanNorm(), make_norm("killed_walk", {"beta": 2.5})):
        assert curve_surface_tension(norm, box) == pytest.approx(8.0, rel=1e-12)


def test_plaquette_area_identity():
    geo = build_wulff(make_norm("killed_walk", {"beta": 3.0}), 1024)
    for r in (0.0, 0.3, 0.7, 1.0):
        poly = wulff_plaquette(geo, r)
        expected = 4.0 - r ** 2 * (4.0 - geo.w)
        assert abs(polygon_area(poly)) == pytest.approx(expected, rel=1e-12)
    with pytest.raises(ValueError):
        wulff_plaquette(geo, 1.2)
    with pytest.raises(ValueError):
        wulff_plaquette(geo, -0.1)


def test_plaquette_tau_identity():
    norm = make_norm("killed_walk", {"beta": 3.0})
    geo = build_wulff(norm, 1024)
    for r in (0.2, 0.6, 0.95):
        tau = curve_surface_tension(norm, wulff_plaquette(geo, r))
        assert tau == pytest.approx(8.0 - r * (8.0 - 2.0 * geo.w), rel=1e-9)


def test_optimal_shape_branches():
    geo = build_wulff(make_norm("killed_walk", {"beta": 3.0}), 1024)
    w = geo.w
    # small area: scaled droplet
    poly, radius, tau = optimal_shape(geo, 0.5 * w)
    assert radius == pytest.approx(math.sqrt(0.5), rel=1e-12)
    assert abs(polygon_area(poly)) == pytest.approx(0.5 * w, rel=1e-10)
    assert tau == pytest.approx(2.0 * radius * w, rel=1e-10)
    # large area: rounded box
    b = 0.5 * (w + 4.0)
    poly, radius, tau = optimal_shape(geo, b)
    assert radius == pytest.approx(math.sqrt((4.0 - b) / (4.0 - w)), rel=1e-12)
    assert abs(polygon_area(poly)) == pytest.approx(b, rel=1e-10)
    assert tau == pytest.approx(8.0 - radius * (8.0 - 2.0 * w), rel=1e-10)
    # full box
    poly, radius, tau = optimal_shape(geo, 4.0)
    assert radius == 0.0
    assert tau == pytest.approx(8.0)
