"""Sweep kernel: backend agreement, incremental bookkeeping, visit counts."""

import numpy as np
import pytest

from facetstack import kernels
from facetstack.lattice import HeightField, ModelParams, signed_volume, sos_energy
from facetstack.rng import chain_stream_state, splitmix64_next
from facetstack.sampling import build_tail_table

PARAMS = ModelParams(n=4, beta=1.5, p_v=0.25, p_s=0.75, excess=0.5)


def fresh_inputs(params, seed=11):
    field = HeightField(params.n)
    side = field.side
    pad = np.zeros((side + 2, side + 2), dtype=np.int64)
    pad[1:-1, 1:-1] = field.heights
    tail, alpha_off = build_tail_table(params, "gaussian")
    state = np.array([chain_stream_state(seed, 0)], dtype=np.uint64)
    visits = np.zeros(1, dtype=np.int64)
    return pad, side, field.height_cap, tail, alpha_off, state, visits


def run(fn, params, attempts, seed=11, state=None, pad=None, alpha=0, grad=0):
    pad0, side, cap, tail, alpha_off, state0, visits = fresh_inputs(params, seed)
    if pad is None:
        pad = pad0
    if state is None:
        state = state0
    out = fn(pad, side, cap, params.beta, tail, alpha_off, alpha, grad,
             state, attempts, visits, False, 0)
    return out, pad, state


def test_backends_bit_identical():
    out_a, pad_a, state_a = run(kernels.sweep_chunk, PARAMS, 20000)
    out_b, pad_b, state_b = run(kernels.sweep_chunk_pure, PARAMS, 20000)
    assert out_a == out_b
    assert np.array_equal(pad_a, pad_b)
    assert state_a[0] == state_b[0]


def test_incremental_tallies_match_recompute():
    (alpha, grad, accepts, _), pad, _ = run(kernels.sweep_chunk, PARAMS, 30000)
    field = HeightField(PARAMS.n, heights=pad[1:-1, 1:-1])
    assert alpha == signed_volume(field)
    assert grad == sos_energy(field)
    assert accepts > 0


def test_heights_stay_within_cap():
    hot = ModelParams(n=4, beta=0.05, p_v=0.25, p_s=0.75, excess=0.0)
    _, pad, _ = run(kernels.sweep_chunk, hot, 50000)
    cap = hot.n // 2
    assert np.abs(pad[1:-1, 1:-1]).max() <= cap
    assert np.abs(pad[1:-1, 1:-1]).max() == cap  # beta this small does move


def test_stream_continuity_across_calls():
    params = PARAMS
    out_full, pad_full, state_full = run(kernels.sweep_chunk, params, 6000)
    pad, side, cap, tail, alpha_off, state, visits = fresh_inputs(params)
    alpha, grad = 0, 0
    acc = 0
    for _ in range(3):
        alpha, grad, a, _ = kernels.sweep_chunk(
            pad, side, cap, params.beta, tail, alpha_off, alpha, grad,
            state, 2000, visits, False, 0)
        acc += a
    assert (alpha, grad) == out_full[:2]
    assert acc == out_full[2]
    assert np.array_equal(pad, pad_full)
    assert state[0] == state_full[0]


def test_word_stream_matches_reference():
    # two words per attempt, straight off the shared counter stream
    params = PARAMS
    pad, side, cap, tail, alpha_off, state, visits = fresh_inputs(params)
    s0 = int(state[0])
    kernels.sweep_chunk(pad, side, cap, params.beta, tail, alpha_off,
                        0, 0, state, 7, visits, False, 0)
    s = s0
    for _ in range(14):
        s, _ = splitmix64_next(s)
    assert int(state[0]) == s


def test_visit_counts():
    params = ModelParams(n=2, beta=1.25, p_v=0.25, p_s=0.75, excess=0.5)
    field = HeightField(params.n)
    side = field.side
    pad = np.zeros((side + 2, side + 2), dtype=np.int64)
    pad[1:-1, 1:-1] = field.heights
    tail, alpha_off = build_tail_table(params, "exact")
    state = np.array([chain_stream_state(5, 0)], dtype=np.uint64)
    n_states = 3 ** (side * side)
    visits = np.zeros(n_states, dtype=np.int64)
    vindex = sum((int(h) + 1) * 3 ** k
                 for k, h in enumerate(pad[1:-1, 1:-1].ravel()))
    attempts = 40000
    *_, vend = kernels.sweep_chunk(pad, side, field.height_cap, params.beta,
                                   tail, alpha_off, 0, 0, state, attempts,
                                   visits, True, vindex)
    assert visits.sum() == attempts
    # final index decodes to the final heights
    digits = np.array([(vend // 3 ** k) % 3 for k in range(side * side)])
    assert np.array_equal(digits.reshape(side, side) - 1, pad[1:-1, 1:-1])
    # every visited state respects the cap
    seen = np.nonzero(visits)[0]
    for key in seen[:200]:
        ds = np.array([(key // 3 ** k) % 3 for k in range(side * side)]) - 1
        assert np.abs(ds).max() <= field.height_cap
