"""Phase ladder solver against closed forms and the dense-grid oracle."""

import csv
import math

import numpy as np
import pytest

from facetstack.phase import (a_thresholds_to_A, brute_force_oracle,
                              full_phase_diagram, k_star, solve_vp_delta,
                              solve_vp_v, write_branch_data, write_phase_csv,
                              write_thresholds_csv)

W, SIGMA = math.pi, 1.0
# frozen ladder of (pi, 1): two capped windows, then flat piles
SLOPES_PI_1 = [3.487342054151, 7.255494708557, 11.004840380500, 14.764570443915]


def test_first_transition_closed_forms():
    d = full_phase_diagram(W, SIGMA, ell_max=8)
    assert d.v_star[0] == pytest.approx(2.0 + W / (2.0 * SIGMA), abs=1e-9)
    assert d.v_tilde[0] == pytest.approx(3.0 * (W / (2.0 * SIGMA)) ** (1 / 3),
                                         abs=1e-8)
    for got, want in zip(d.transition_slopes, SLOPES_PI_1):
        assert got == pytest.approx(want, abs=1e-8)
    assert d.k_star == 2
    assert d.kind_in[:4] == ("type1", "type1", "type2", "type2")
    # capped-entry windows follow the slope ladder
    assert d.transition_slopes[0] == pytest.approx(d.v_tilde[0], abs=1e-12)
    assert d.transition_slopes[2] == pytest.approx(d.v_star[2], abs=1e-12)
    assert math.isnan(d.v_tilde[2])


def test_solver_ladder_between_transitions():
    d = full_phase_diagram(W, SIGMA, ell_max=8)
    t = d.transition_slopes
    probes = [0.5 * t[0], 0.5 * (t[0] + t[1]), 0.5 * (t[1] + t[2]),
              0.5 * (t[2] + t[3])]
    for ell, v in enumerate(probes):
        sol = solve_vp_v(v, W, SIGMA, ell_max=8)
        assert sol.stack.layers == ell
    # capped windows open capped and hand off to the flat pile mid-window
    for i in range(d.k_star):
        entry = solve_vp_v(t[i] + 1e-4, W, SIGMA, ell_max=8)
        assert (entry.stack.layers, entry.stack.kind) == (i + 1, "type1")
        late = solve_vp_v(0.5 * (d.window_upper[i] + t[i + 1]), W, SIGMA,
                          ell_max=8)
        assert (late.stack.layers, late.stack.kind) == (i + 1, "type2")


def test_unit_jumps_at_transitions():
    d = full_phase_diagram(W, SIGMA, ell_max=8)
    for i, t in enumerate(d.transition_slopes[:4]):
        below = solve_vp_v(t - 1e-7, W, SIGMA, ell_max=8)
        above = solve_vp_v(t + 1e-7, W, SIGMA, ell_max=8)
        assert below.stack.layers == i
        assert above.stack.layers == i + 1
        assert above.stack.kind == d.kind_in[i]


def test_k_star_boundary():
    sigma = 1.5
    assert k_star(2.9, sigma) == 0
    assert k_star(2.0 * sigma, sigma) == 0
    assert k_star(3.1, sigma) >= 1
    assert k_star(W, 1.0) == 2


def test_oracle_agreement_sample():
    rng = np.random.default_rng(42)
    for _ in range(12):
        w = rng.uniform(2.3, 3.8)
        sigma = math.exp(rng.uniform(math.log(0.3), math.log(4.0)))
        v = rng.uniform(0.5, 9.0)
        sol = solve_vp_v(v, w, sigma, ell_max=10)
        ell_ref, kind_ref, a_ref = brute_force_oracle(v, w, sigma, ell_max=10,
                                                      grid_step=1e-3)
        assert sol.stack.layers == ell_ref
        if sol.stack.layers:
            assert sol.stack.kind == kind_ref
            assert sol.stack.area == pytest.approx(a_ref, abs=2e-3)


def test_saturation_raises():
    with pytest.raises(ValueError, match="ell_max"):
        solve_vp_v(100.0, W, SIGMA, ell_max=2)


def test_delta_formulation_matches_v_formulation():
    d_beta, tau_e = 2.0, 0.7
    sigma = tau_e * d_beta
    for delta in (1.0, 5.0, 12.0):
        sd = solve_vp_delta(delta, d_beta, W, tau_e=tau_e)
        sv = solve_vp_v(delta / sigma, W, sigma, ell_max=12)
        assert sd.v == pytest.approx(delta / sigma)
        assert sd.stack.layers == sv.stack.layers
        assert sd.stack.area == pytest.approx(sv.stack.area, abs=1e-9)
        # tilted and penalized objectives differ by the constant delta^2/(2D)
        want = tau_e * (sv.energy + delta ** 2 / (2.0 * sigma))
        assert sd.energy == pytest.approx(want, rel=1e-10)


def test_threshold_scaling():
    d = full_phase_diagram(W, SIGMA, ell_max=6)
    gap, scale = 0.5, 3.0
    A = a_thresholds_to_A(d, gap, scale, tau_e=1.0)
    for a_val, slope in zip(A, d.transition_slopes):
        assert a_val == pytest.approx(gap * scale * slope)


def test_phase_csv(tmp_path):
    path = tmp_path / "phase.csv"
    vs = [1.0, 4.0, 8.0]
    write_phase_csv(str(path), W, SIGMA, vs, ell_max=8)
    rows = list(csv.DictReader(open(path)))
    assert [r["v"] for r in rows] == ["1", "4", "8"]
    assert [int(r["ell"]) for r in rows] == [0, 1, 2]
    for r in rows:
        sol = solve_vp_v(float(r["v"]), W, SIGMA, ell_max=8)
        assert float(r["energy"]) == pytest.approx(sol.energy, rel=1e-10)
        assert float(r["a"]) == pytest.approx(sol.stack.area, rel=1e-9, abs=1e-12)


def test_thresholds_csv(tmp_path):
    path = tmp_path / "thr.csv"
    d = full_phase_diagram(W, SIGMA, ell_max=5)
    write_thresholds_csv(str(path), d, A_values=[10 * t for t in d.transition_slopes])
    rows = list(csv.DictReader(open(path)))
    assert len(rows) == 5
    assert [int(r["ell"]) for r in rows] == [1, 2, 3, 4, 5]
    assert all(int(r["k_star"]) == 2 for r in rows)
    assert [int(r["type1_window"]) for r in rows] == [1, 1, 0, 0, 0]
    assert float(rows[0]["A_ell"]) == pytest.approx(10 * d.transition_slopes[0])
    assert float(rows[2]["v_tilde"]) != float(rows[2]["v_tilde"]) or \
        math.isnan(float(rows[2]["v_tilde"]))


def test_branch_data(tmp_path):
    path = tmp_path / "branches.dat"
    write_branch_data(str(path), W, SIGMA, [2.0, 5.0], ell_max=3)
    text = path.read_text()
    assert "# ell=1 kind=type2" in text
    assert "# ell=1 kind=type1" in text
    blocks = [b for b in text.split("\n\n") if b.strip()
              and not b.strip().startswith("# branch")]
    for block in blocks:
        data_lines = [ln for ln in block.splitlines()
                      if ln and not ln.startswith("#")]
        for ln in data_lines:
            assert len(ln.split()) == 3
