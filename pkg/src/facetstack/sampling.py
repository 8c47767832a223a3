"""Metropolis chains targeting the interface marginal.

The target log-weight of a field is -beta * (gradient sum) + tail(alpha),
where tail is the bulk constraint weight of lattice.bulk_log_tail.  Chains mix
single-site moves (the hot kernel) with monolayer moves that raise or lower
the whole region enclosed by one level line, which tunnel between layer
counts near first-order transitions.  Monolayer moves fire at most once per
sweep, with probability proposal_mix; firing them per attempt would spend
almost all time re-extracting contours, and a sweep-level mixture of
reversible kernels preserves the stationary law all the same.
"""

import logging
import math
import os
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from . import kernels, rng
from .lattice import (HeightField, ModelParams, box_volume, classify,
                      extract_contours, snapped_gradient_cost, sos_energy,
                      signed_volume, tail_table)

logger = logging.getLogger("facetstack.sampling")


@dataclass(frozen=True)
class ChainConfig:
    params: ModelParams
    sweeps: int
    burn_in: int = 0
    thinning: int = 1
    seed: int = 0
    tail_mode: str = "gaussian"
    proposal_mix: float = 0.2
    chain_index: int = 0
    snapshot_every: int = 0          # records between snapshots; 0 disables
    snapshot_dir: Optional[str] = None

    def __post_init__(self):
        if not (self.sweeps > self.burn_in >= 0):
            raise ValueError("need sweeps > burn_in >= 0")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if not (0.0 <= self.proposal_mix <= 1.0):
            raise ValueError("proposal_mix must be in [0, 1]")
        if self.tail_mode not in ("gaussian", "exact"):
            raise ValueError("tail_mode must be gaussian or exact")


@dataclass(frozen=True)
class SampleRecord:
    sweep: int
    alpha: int
    energy: int          # raw gradient sum; multiply by beta to weight
    n_large: int
    snapshot_path: Optional[str] = None


def build_tail_table(params: ModelParams, mode: str) -> Tuple[np.ndarray, int]:
    """Tail values over every reachable signed volume; (table, offset)."""
    side = 2 * params.n - 1
    alpha_max = side * side * (params.n // 2)
    return tail_table(params, mode, alpha_max), alpha_max


def metropolis_step(field: HeightField, params: ModelParams, rng_state: int,
                    tail: np.ndarray, alpha_off: int, beta: Optional[float] = None
                    ) -> Tuple[int, bool]:
    """One single-site proposal in plain python; reference for the kernel.

    Mutates the field in place; returns (new_rng_state, accepted).
    """
    side = field.side
    cap = field.height_cap
    if beta is None:
        beta = params.beta
    rng_state, word = rng.splitmix64_next(rng_state)
    k = word % (side * side)
    d = 1 if (word >> 31) & 1 else -1
    rng_state, word = rng.splitmix64_next(rng_state)
    u = rng.uniform_from_word(word)
    i, j = k // side, k % side
    h = field.heights
    h0 = int(h[i, j])
    h1 = h0 + d
    if abs(h1) > cap:
        return rng_state, False
    pad = 0
    dcost = 0.0
    for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        ni, nj = i + di, j + dj
        hn = int(h[ni, nj]) if 0 <= ni < side and 0 <= nj < side else pad
        # same grid-snapped bond pricing as the sweep kernel
        dcost += (np.rint(beta * abs(h1 - hn) * 2.0 ** 40)
                  - np.rint(beta * abs(h0 - hn) * 2.0 ** 40))
    dcost *= 2.0 ** -40
    alpha = int(h.sum())
    delta = (tail[alpha + d + alpha_off] - tail[alpha + alpha_off]) - dcost
    if math.log(u) < delta:
        h[i, j] = h1
        return rng_state, True
    return rng_state, False


def _monolayer_candidates(field: HeightField):
    """Regions proposable for a monolayer move, as interior row-run keys."""
    contours = extract_contours(field).contours
    if contours:
        return [c.interior_rows for c in contours]
    n = field.n
    side = 2 * n - 1
    s = max(1, n // 2)
    lo = (side - s) // 2
    return [tuple((row, lo, lo + s) for row in range(lo, lo + s))]


def monolayer_log_acceptance(field: HeightField, params: ModelParams,
                             region: tuple, d: int, tail: np.ndarray,
                             alpha_off: int) -> float:
    """Log acceptance ratio for shifting `region` by d; field left unchanged.

    Includes the multiplicity correction mult_y * n_x / (mult_x * n_y), where
    mult counts how often the region appears among either state's candidates,
    so detailed balance holds even when several contours enclose one region.
    Returns -inf when the move leaves the height window or is irreversible.
    """
    cands = _monolayer_candidates(field)
    mult_x = sum(1 for r in cands if r == region)
    n_x = len(cands)
    if mult_x == 0:
        raise ValueError("region is not proposable from this state")

    h = field.heights
    rows = np.array([row for row, lo, hi in region for _ in range(lo, hi)])
    cols = np.array([col for row, lo, hi in region for col in range(lo, hi)])
    new_vals = h[rows, cols] + d
    if np.abs(new_vals).max() > field.height_cap:
        return -math.inf

    cost0 = snapped_gradient_cost(field, params.beta)
    alpha0 = int(h.sum())
    h[rows, cols] = new_vals
    cost1 = snapped_gradient_cost(field, params.beta)
    cands_y = _monolayer_candidates(field)
    h[rows, cols] -= d
    mult_y = sum(1 for r in cands_y if r == region)
    n_y = len(cands_y)
    if mult_y == 0:
        return -math.inf             # no reverse move exists
    return (cost0 - cost1
            + tail[alpha0 + d * len(rows) + alpha_off]
            - tail[alpha0 + alpha_off]
            + math.log(mult_y) - math.log(n_y)
            - math.log(mult_x) + math.log(n_x))


def monolayer_proposal(field: HeightField, params: ModelParams,
                       gen: np.random.Generator, tail: np.ndarray,
                       alpha_off: int) -> bool:
    """Raise or lower the region enclosed by one level line, in place.

    Picks uniformly among (enclosed region, direction) pairs; a flat field
    offers one seeded square so layer growth can start at all.
    """
    cands = _monolayer_candidates(field)
    region = cands[int(gen.integers(len(cands)))]
    d = 1 if gen.integers(2) else -1
    delta = monolayer_log_acceptance(field, params, region, d, tail, alpha_off)
    if math.log(1.0 - gen.random()) < delta:        # (0, 1], log finite
        rows = np.array([row for row, lo, hi in region for _ in range(lo, hi)])
        cols = np.array([col for row, lo, hi in region for col in range(lo, hi)])
        field.heights[rows, cols] += d
        return True
    return False


def run_chain(config: ChainConfig,
              field: Optional[HeightField] = None) -> Tuple[List[SampleRecord], HeightField]:
    """Deterministic chain; records every `thinning` sweeps after burn-in."""
    p = config.params
    if field is None:
        field = HeightField(p.n)
    else:
        field = field.copy()
    side = field.side
    cap = field.height_cap
    tail, alpha_off = build_tail_table(p, config.tail_mode)

    pad = np.zeros((side + 2, side + 2), dtype=np.int64)
    pad[1:-1, 1:-1] = field.heights
    alpha = signed_volume(field)
    grad = sos_energy(field)
    state = np.array([rng.chain_stream_state(config.seed, config.chain_index)],
                     dtype=np.uint64)
    mono_gen = np.random.default_rng(
        rng.chain_stream_state(config.seed ^ rng.GAMMA, config.chain_index))
    dummy_visits = np.zeros(1, dtype=np.int64)

    records: List[SampleRecord] = []
    n_sites = side * side
    for sweep in range(1, config.sweeps + 1):
        if config.proposal_mix > 0.0 and mono_gen.random() < config.proposal_mix:
            field.heights = pad[1:-1, 1:-1]
            if monolayer_proposal(field, p, mono_gen, tail, alpha_off):
                alpha = signed_volume(field)
                grad = sos_energy(field)
        alpha, grad, _, _ = kernels.sweep_chunk(
            pad, side, cap, p.beta, tail, alpha_off, alpha, grad, state,
            n_sites, dummy_visits, False, 0)
        if sweep > config.burn_in and (sweep - config.burn_in) % config.thinning == 0:
            field.heights = pad[1:-1, 1:-1]
            cs = classify(extract_contours(field), p.eps)
            n_large = cs.counts()["large"]
            path = None
            if (config.snapshot_every > 0 and config.snapshot_dir is not None
                    and len(records) % config.snapshot_every == 0):
                path = os.path.join(config.snapshot_dir,
                                    f"chain{config.chain_index}_sweep{sweep}.csv")
                HeightField(field.n, pad[1:-1, 1:-1].copy()).save_csv(path)
            records.append(SampleRecord(sweep=sweep, alpha=alpha, energy=grad,
                                        n_large=n_large, snapshot_path=path))
    field = HeightField(field.n, pad[1:-1, 1:-1].copy())
    return records, field


def write_records_csv(path: str, records: List[SampleRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("sweep,alpha,energy,n_large\n")
        for r in records:
            fh.write(f"{r.sweep},{r.alpha},{r.energy},{r.n_large}\n")


def acceptance_rate(config: ChainConfig, sweeps: int = 50) -> float:
    """Fraction of accepted single-site proposals over a short fresh run."""
    p = config.params
    field = HeightField(p.n)
    side = field.side
    tail, alpha_off = build_tail_table(p, config.tail_mode)
    pad = np.zeros((side + 2, side + 2), dtype=np.int64)
    state = np.array([rng.chain_stream_state(config.seed, config.chain_index)],
                     dtype=np.uint64)
    dummy = np.zeros(1, dtype=np.int64)
    total = sweeps * side * side
    _, _, acc, _ = kernels.sweep_chunk(pad, side, field.height_cap, p.beta,
                                       tail, alpha_off, 0, 0, state, total,
                                       dummy, False, 0)
    return acc / total
