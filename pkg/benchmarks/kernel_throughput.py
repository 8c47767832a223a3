"""Throughput benchmark for the single-site sweep kernel.

Times kernels.sweep_chunk (numba when available) against the pure
python reference on identical inputs and prints attempts per second
for both, plus the speedup.  Results from both backends are checked
to be bit-identical before timing, so the numbers always describe
the same computation.

Usage: python benchmarks/kernel_throughput.py [--n N] [--attempts K]
"""

import argparse
import time

import numpy as np

from facetstack import kernels
from facetstack.lattice import HeightField, ModelParams, signed_volume, sos_energy
from facetstack.rng import chain_stream_state
from facetstack.sampling import build_tail_table


def run(fn, n, attempts, seed):
    params = ModelParams(n=n, beta=2.0, p_v=0.25, p_s=0.75, excess=0.5)
    field = HeightField(n)
    side = field.side
    pad = np.zeros((side + 2, side + 2), dtype=np.int64)
    pad[1:-1, 1:-1] = field.heights
    tail, alpha_off = build_tail_table(params, "gaussian")
    state = np.array([chain_stream_state(seed, 0)], dtype=np.uint64)
    visits = np.zeros(1, dtype=np.int64)
    alpha = signed_volume(field)
    grad = sos_energy(field)

    # warm-up also triggers jit compilation
    alpha, grad, _, _ = fn(pad, side, field.height_cap, params.beta, tail,
                           alpha_off, alpha, grad, state, side * side,
                           visits, False, 0)
    t0 = time.perf_counter()
    out = fn(pad, side, field.height_cap, params.beta, tail, alpha_off,
             alpha, grad, state, attempts, visits, False, 0)
    elapsed = time.perf_counter() - t0
    return out[:2], pad, np.uint64(state[0]), elapsed


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=24, help="box size N (side 2N-1)")
    ap.add_argument("--attempts", type=int, default=2_000_000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    print(f"active backend: {kernels.backend_name()}")
    a1, pad1, s1, t_fast = run(kernels.sweep_chunk, args.n,
                               args.attempts, args.seed)
    a2, pad2, s2, t_pure = run(kernels.sweep_chunk_pure, args.n,
                               args.attempts, args.seed)
    if not (np.array_equal(pad1, pad2) and s1 == s2 and a1 == a2):
        raise SystemExit("backends disagree, benchmark aborted")

    rate_fast = args.attempts / t_fast
    rate_pure = args.attempts / t_pure
    print(f"sweep_chunk      {rate_fast:12.0f} attempts/s  ({t_fast:.3f} s)")
    print(f"sweep_chunk_pure {rate_pure:12.0f} attempts/s  ({t_pure:.3f} s)")
    print(f"speedup          {rate_fast / rate_pure:12.1f}x")


if __name__ == "__main__":
    main()
