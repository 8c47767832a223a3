"""Hot single-site sweep kernel, jitted when numba is available.

Set FACETSTACK_NO_NUMBA=1 to force the pure-python fallback; both paths
consume the same splitmix64 stream and produce bit-identical chains.  The
kernel works on a zero-padded height array, maintains the signed volume and
gradient sum incrementally, and can track visited states through a base-3
index for small-box enumeration oracles.
"""

import logging
import os

import numpy as np

logger = logging.getLogger("facetstack.kernels")

_DISABLED = os.environ.get("FACETSTACK_NO_NUMBA", "") not in ("", "0")
if _DISABLED:
    HAS_NUMBA = False
else:
    try:
        from numba import njit
        HAS_NUMBA = True
    except ImportError:  # pragma: no cover - environment dependent
        HAS_NUMBA = False

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_SH30 = np.uint64(30)
_SH27 = np.uint64(27)
_SH31 = np.uint64(31)
_SH11 = np.uint64(11)
_BIT = np.uint64(1)
_INV53 = 2.0 ** -53
_HALF54 = 2.0 ** -54
# Log-weights are snapped to this dyadic grid (see lattice.snap_log_weight),
# and the kernel prices each bond on the same grid.  Every term entering the
# acceptance ratio is then an exactly representable multiple of 2**-40, no
# float operation below ever rounds, and the chain is exactly reversible.
_QSCALE = 2.0 ** 40
_QSTEP = 2.0 ** -40


def _sweep_impl(pad, side, cap, beta, tail, alpha_off, alpha, grad,
                state, n_attempts, visits, track, vindex):
    """Run n_attempts single-site proposals in place.

    pad is the (side+2)^2 padded height array; tail is indexed by
    alpha + alpha_off; state is a 1-element uint64 stream.  Returns
    (alpha, grad, accepts, vindex) with pad/state/visits mutated.
    """
    n_sites = side * side
    accepts = 0
    s = state[0]
    for _ in range(n_attempts):
        s = (s + _GAMMA) & _MASK
        z = s
        z = ((z ^ (z >> _SH30)) * _MIX1) & _MASK
        z = ((z ^ (z >> _SH27)) * _MIX2) & _MASK
        z = z ^ (z >> _SH31)
        k = int(z % np.uint64(n_sites))
        d = 1 if (z >> _SH31) & _BIT else -1
        s = (s + _GAMMA) & _MASK
        z = s
        z = ((z ^ (z >> _SH30)) * _MIX1) & _MASK
        z = ((z ^ (z >> _SH27)) * _MIX2) & _MASK
        z = z ^ (z >> _SH31)
        u = float(z >> _SH11) * _INV53 + _HALF54
        i = k // side + 1
        j = k % side + 1
        h0 = pad[i, j]
        h1 = h0 + d
        if h1 > cap or h1 < -cap:
            if track:
                visits[vindex] += 1
            continue
        f0 = abs(h1 - pad[i - 1, j])
        f1 = abs(h1 - pad[i + 1, j])
        f2 = abs(h1 - pad[i, j - 1])
        f3 = abs(h1 - pad[i, j + 1])
        g0 = abs(h0 - pad[i - 1, j])
        g1 = abs(h0 - pad[i + 1, j])
        g2 = abs(h0 - pad[i, j - 1])
        g3 = abs(h0 - pad[i, j + 1])
        dgrad = f0 + f1 + f2 + f3 - g0 - g1 - g2 - g3
        # per-bond costs rounded to the grid; the sum of rints is an exact
        # integer, so grouping does not matter and reverse moves negate it
        dcost = (np.rint(beta * f0 * _QSCALE) + np.rint(beta * f1 * _QSCALE)
                 + np.rint(beta * f2 * _QSCALE) + np.rint(beta * f3 * _QSCALE)
                 - np.rint(beta * g0 * _QSCALE) - np.rint(beta * g1 * _QSCALE)
                 - np.rint(beta * g2 * _QSCALE)
                 - np.rint(beta * g3 * _QSCALE)) * _QSTEP
        delta = (tail[alpha + d + alpha_off]
                 - tail[alpha + alpha_off]) - dcost
        if np.log(u) < delta:
            pad[i, j] = h1
            alpha += d
            grad += dgrad
            accepts += 1
            if track:
                vindex += d * 3 ** k
        if track:
            visits[vindex] += 1
    state[0] = s
    return alpha, grad, accepts, vindex


def sweep_chunk_pure(pad, side, cap, beta, tail, alpha_off, alpha, grad,
                     state, n_attempts, visits, track, vindex):
    # uint64 wraparound is intentional; silence numpy's overflow warnings
    with np.errstate(over="ignore"):
        return _sweep_impl(pad, side, cap, beta, tail, alpha_off, alpha,
                           grad, state, n_attempts, visits, track, vindex)


if HAS_NUMBA:
    sweep_chunk = njit(cache=True)(_sweep_impl)
else:
    sweep_chunk = sweep_chunk_pure


def backend_name() -> str:
    return "numba" if HAS_NUMBA else "pure"
