"""Counter-style splitmix64 streams, identical across kernel backends.

The generator state is a single 64-bit word advanced by a fixed odd gamma;
outputting mixes the state through two xor-shift-multiply rounds.  Per-chain
streams are derived by hashing (seed, chain index) so chains are reproducible
independently of scheduling.
"""

from typing import Tuple

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """Finalizer of splitmix64; bijective on 64-bit words."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def splitmix64_next(state: int) -> Tuple[int, int]:
    """Advance the stream; returns (new_state, output_word)."""
    state = (state + GAMMA) & MASK64
    return state, mix64(state)


def chain_stream_state(seed: int, chain_index: int) -> int:
    """Initial state of the stream owned by one chain."""
    return mix64(mix64(seed & MASK64) + chain_index)


def uniform_from_word(word: int) -> float:
    """Map a 64-bit word to the open interval (0, 1)."""
    return (word >> 11) * 2.0 ** -53 + 2.0 ** -54
