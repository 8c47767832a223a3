"""Slope phase diagram: optimal stacks, critical slopes, transition thresholds.

Two equivalent problems are solved.  The slope form minimizes
F_v(l, a) = -v a + a^2/(2 sigma) + tau(stack) over stacks; the excess form
minimizes (delta - a)^2/(2 D) + tau and maps onto the slope form through
v = delta/(tau_e D), sigma = tau_e D.

Branch conventions: the type-2 branch of l layers lives on a in [l w, 4 l]
and is convex; the type-1 branch lives on [4(l-1), l w] (only for l below the
degeneracy count 4/(4-w)) and is concave then convex, so its minimization
splits at the inflection point.  Ties between branches break toward fewer
layers, then type 2.
"""

import csv
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .stacks import (EMPTY_STACK, INFINITE_ENERGY, Stack, degeneracy_ell,
                     guard_degenerate_w, slope_energy, type1_stack, type2_stack)

logger = logging.getLogger("facetstack.phase")

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class VPSolution:
    stack: Stack
    energy: float
    v: Optional[float] = None
    delta: Optional[float] = None


@dataclass(frozen=True)
class PhaseDiagram:
    """Transition ladder of the slope problem at fixed (w, sigma)."""

    w: float
    sigma: float
    ell_max: int
    ell_star: float
    k_star: int
    v_star: Tuple[float, ...]        # type-2 coexistence slopes, index l-1
    v_tilde: Tuple[float, ...]       # type-1 entry slopes, nan for l > k_star
    window_upper: Tuple[float, ...]  # type-1 window exit 1 + l w / sigma
    transition_slopes: Tuple[float, ...]  # v_tilde where it exists, else v_star
    kind_in: Tuple[str, ...]         # branch kind entered at each transition
    a_minus: Tuple[float, ...]       # optimal area just above transition l
    a_plus: Tuple[float, ...]        # optimal area just below transition l+1

    def solve(self, v: float) -> "VPSolution":
        """Branch evaluator; always delegates so it can never go stale."""
        return solve_vp_v(v, self.w, self.sigma, self.ell_max)


def _type1_tau(ell: int, a, w: float):
    """Type-1 tension 8(l-1) + 2 sqrt((a - 4(l-1)) (l w - 4(l-1))), l < l*."""
    d = 4.0 * (ell - 1)
    c = ell * w - d
    return 8.0 * (ell - 1) + 2.0 * np.sqrt(np.maximum((np.asarray(a) - d) * c, 0.0))


def minimize_over_branch(v: float, w: float, sigma: float, ell: int,
                         kind: str) -> Tuple[float, float]:
    """Minimum of the tilted branch energy; (nan, inf) for an empty branch.

    Type 2 clamps at the left endpoint a = l w for v <= 1 + l w / sigma and
    otherwise bisects the stationarity condition
    v = sqrt((4-w)/(4-a/l)) + a/sigma, whose left side is increasing in a.
    Type 1 compares the endpoints with a golden-section minimum on the convex
    piece beyond the inflection point.
    """
    if ell == 0:
        return 0.0, 0.0
    if kind == "type2":
        lo, hi = ell * w, 4.0 * ell
        if v <= 1.0 + ell * w / sigma:
            return lo, slope_energy(ell, lo, w, sigma, v)
        a_lo, a_hi = lo, hi
        while a_hi - a_lo > 1e-12:
            mid = 0.5 * (a_lo + a_hi)
            grad = math.sqrt((4.0 - w) / (4.0 - mid / ell)) + mid / sigma
            if grad < v:
                a_lo = mid
            else:
                a_hi = mid
        a = 0.5 * (a_lo + a_hi)
        return a, slope_energy(ell, a, w, sigma, v)
    if kind == "type1":
        if ell >= degeneracy_ell(w):
            return math.nan, INFINITE_ENERGY  # dominated by type 2 there
        d = 4.0 * (ell - 1)
        c = ell * w - d

        def g(a: float) -> float:
            return -v * a + a * a / (2.0 * sigma) + float(_type1_tau(ell, a, w))

        hi = ell * w
        best_a, best_val = d, g(d)
        val_hi = g(hi)
        if val_hi < best_val:
            best_a, best_val = hi, val_hi
        a_inf = d + (sigma * sigma * c / 4.0) ** (1.0 / 3.0)
        if a_inf < hi:  # convex tail exists; golden section is safe there
            x_lo, x_hi = a_inf, hi
            x1 = x_hi - _GOLDEN * (x_hi - x_lo)
            x2 = x_lo + _GOLDEN * (x_hi - x_lo)
            f1, f2 = g(x1), g(x2)
            while x_hi - x_lo > 1e-12:
                if f1 <= f2:
                    x_hi, x2, f2 = x2, x1, f1
                    x1 = x_hi - _GOLDEN * (x_hi - x_lo)
                    f1 = g(x1)
                else:
                    x_lo, x1, f1 = x1, x2, f2
                    x2 = x_lo + _GOLDEN * (x_hi - x_lo)
                    f2 = g(x2)
            x = 0.5 * (x_lo + x_hi)
            if g(x) < best_val:
                best_a, best_val = x, g(x)
        return best_a, best_val
    raise ValueError(f"unknown branch kind {kind!r}")


def _build_stack(ell: int, kind: str, a: float, w: float) -> Stack:
    if ell == 0:
        return EMPTY_STACK
    stack = type1_stack(ell, a, w) if kind == "type1" else type2_stack(ell, a, w)
    if stack is None:
        raise RuntimeError(f"internal: minimizer left branch range "
                           f"(l={ell}, kind={kind}, a={a}, w={w})")
    return stack


def solve_vp_v(v: float, w: float, sigma: float, ell_max: int = 12) -> VPSolution:
    """Global minimizer of F_v over the empty stack and all branches l <= ell_max.

    Candidates are scanned in the tie-break order (fewer layers first, type 2
    before type 1), so exact ties resolve deterministically.  If even l_max + 1
    layers would improve the optimum, the cap is too small and an error asks
    for a larger one.
    """
    w = guard_degenerate_w(w, ell_max + 1)
    ell_star = degeneracy_ell(w)
    best = (0, "empty", 0.0, 0.0)  # (ell, kind, a, value)
    for ell in range(1, ell_max + 2):
        for kind in ("type2", "type1"):
            if kind == "type1" and ell >= ell_star:
                continue
            a, val = minimize_over_branch(v, w, sigma, ell, kind)
            if val < best[3] - 1e-12:
                if ell > ell_max:
                    raise ValueError(f"optimal stack exceeds ell_max={ell_max} at "
                                     f"v={v}; increase ell_max")
                best = (ell, kind, a, val)
    ell, kind, a, val = best
    return VPSolution(stack=_build_stack(ell, kind, a, w), energy=val, v=v)


def _branch_gap(v: float, w: float, sigma: float, ell: int,
                out_kind: str, in_kind: str) -> float:
    """Energy of the outgoing (l-1)-branch minus the incoming l-branch."""
    _, val_out = minimize_over_branch(v, w, sigma, ell - 1, out_kind)
    _, val_in = minimize_over_branch(v, w, sigma, ell, in_kind)
    return val_out - val_in


def _bisect_crossing(w: float, sigma: float, ell: int, in_kind: str,
                     tol: float = 1e-9) -> float:
    """Slope at which the l-branch overtakes the type-2 (l-1)-branch."""
    lo = 0.0
    hi = max(4.0, 2.0 * (1.0 + ell * w / sigma))
    while _branch_gap(hi, w, sigma, ell, "type2", in_kind) <= 0.0:
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("no branch crossing found")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _branch_gap(mid, w, sigma, ell, "type2", in_kind) > 0.0:
            hi = mid
        else:
            lo = mid
    root = 0.5 * (lo + hi)
    gap = _branch_gap(root, w, sigma, ell, "type2", in_kind)
    if abs(gap) > 1e-7:
        raise RuntimeError(f"coexistence equality fails at l={ell}: gap={gap}")
    return root


def critical_slopes_type2(w: float, sigma: float, ell_max: int = 12) -> List[float]:
    """Coexistence slopes of the pure type-2 ladder, l = 1..ell_max."""
    w = guard_degenerate_w(w, ell_max + 1)
    return [_bisect_crossing(w, sigma, ell, "type2") for ell in range(1, ell_max + 1)]


def sticks_out(ell: int, w: float, sigma: float) -> bool:
    """Whether the type-1 l-branch dips below the type-2 support line."""
    if ell >= degeneracy_ell(w):
        raise ValueError(f"type-1 stacks with {ell} layers are dominated at w={w}")
    v_star = _bisect_crossing(guard_degenerate_w(w, ell + 1), sigma, ell, "type2")
    return v_star < 1.0 + ell * w / sigma


def k_star(w: float, sigma: float, ell_max: int = 12) -> int:
    """Largest layer count whose type-1 branch appears; 0 iff w <= 2 sigma."""
    if w <= 2.0 * sigma:
        return 0
    k = 0
    ell = 1
    while ell <= ell_max and ell < degeneracy_ell(w):
        if sticks_out(ell, w, sigma):
            k = ell
        else:
            break  # sticking out is monotone decreasing in l
        ell += 1
    return k


def full_phase_diagram(w: float, sigma: float, ell_max: int = 12) -> PhaseDiagram:
    """Assemble slopes, windows, and area bounds for l = 1..ell_max."""
    w = guard_degenerate_w(w, ell_max + 1)
    ks = k_star(w, sigma, ell_max)
    v_star = critical_slopes_type2(w, sigma, ell_max)
    v_tilde = [
        _bisect_crossing(w, sigma, ell, "type1") if ell <= ks else math.nan
        for ell in range(1, ell_max + 1)
    ]
    window_upper = [1.0 + ell * w / sigma if ell <= ks else math.nan
                    for ell in range(1, ell_max + 1)]
    transitions = [v_tilde[i] if i + 1 <= ks else v_star[i] for i in range(ell_max)]
    kind_in = ["type1" if i + 1 <= ks else "type2" for i in range(ell_max)]
    a_minus = [minimize_over_branch(transitions[i], w, sigma, i + 1, kind_in[i])[0]
               for i in range(ell_max)]
    a_plus = [minimize_over_branch(transitions[i + 1], w, sigma, i + 1, "type2")[0]
              for i in range(ell_max - 1)] + [math.nan]
    return PhaseDiagram(w=w, sigma=sigma, ell_max=ell_max,
                        ell_star=degeneracy_ell(w), k_star=ks,
                        v_star=tuple(v_star), v_tilde=tuple(v_tilde),
                        window_upper=tuple(window_upper),
                        transition_slopes=tuple(transitions),
                        kind_in=tuple(kind_in),
                        a_minus=tuple(a_minus), a_plus=tuple(a_plus))


def solve_vp_delta(delta: float, d_beta: float, w: float, tau_e: float = 1.0,
                   ell_max: int = 12) -> VPSolution:
    """Excess-volume form: minimize (delta - a)^2/(2 D) + tau_e * tau(stack)."""
    if delta < 0.0 or d_beta <= 0.0:
        raise ValueError("need delta >= 0 and D > 0")
    sigma = d_beta * tau_e
    v = delta / sigma
    sol = solve_vp_v(v, w, sigma, ell_max=ell_max)
    a = sol.stack.area
    energy = (delta - a) ** 2 / (2.0 * d_beta) + tau_e * sol.stack.tau
    return VPSolution(stack=sol.stack, energy=energy, v=v, delta=delta)


def a_thresholds_to_A(diagram: PhaseDiagram, occupation_gap: float,
                      penalty_scale: float, tau_e: float = 1.0) -> List[float]:
    """Map transition slopes to excess-particle thresholds A_l.

    A = occupation_gap * delta and delta = tau_e * penalty_scale * v at a
    transition slope v (the type-1 entry slope where a window exists).
    """
    scale = occupation_gap * tau_e * penalty_scale
    return [scale * t for t in diagram.transition_slopes]


def brute_force_oracle(v: float, w: float, sigma: float, ell_max: int = 12,
                       grid_step: float = 1e-3) -> Tuple[int, str, float]:
    """Exhaustive grid argmin of the tilted energy over all branches."""
    if grid_step > 1e-3:
        raise ValueError("grid_step must be at most 1e-3")
    w = guard_degenerate_w(w, ell_max + 1)
    ell_star = degeneracy_ell(w)
    best = (0, "empty", 0.0, 0.0)
    for ell in range(1, ell_max + 1):
        grids = []
        lo2, hi2 = ell * w, 4.0 * ell
        a2 = np.arange(lo2, hi2 + grid_step, grid_step)
        a2 = a2[a2 <= hi2]
        vals2 = (-v * a2 + a2 * a2 / (2.0 * sigma) + 8.0 * ell
                 - 2.0 * np.sqrt(np.maximum((4.0 * ell - a2) * (4.0 - w) * ell, 0.0)))
        grids.append(("type2", a2, vals2))
        if ell < ell_star:
            d = 4.0 * (ell - 1)
            a1 = np.arange(d, ell * w + grid_step, grid_step)
            a1 = a1[a1 <= ell * w]
            vals1 = -v * a1 + a1 * a1 / (2.0 * sigma) + _type1_tau(ell, a1, w)
            grids.append(("type1", a1, vals1))
        for kind, grid, vals in grids:
            i = int(np.argmin(vals))
            if vals[i] < best[3] - 1e-12:
                best = (ell, kind, float(grid[i]), float(vals[i]))
    return best[0], best[1], best[2]


# ---------------------------------------------------------------------------
# file emission


def write_phase_csv(path: str, w: float, sigma: float, v_values: Sequence[float],
                    ell_max: int = 12) -> None:
    """Sweep of optimal stacks: one row v,ell,kind,a,radius,tau,energy each."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["v", "ell", "kind", "a", "radius", "tau", "energy"])
        for v in v_values:
            sol = solve_vp_v(float(v), w, sigma, ell_max=ell_max)
            s = sol.stack
            out.writerow([f"{v:.10g}", s.layers, s.kind, f"{s.area:.12g}",
                          f"{s.radius:.12g}", f"{s.tau:.12g}", f"{sol.energy:.12g}"])


def write_thresholds_csv(path: str, diagram: PhaseDiagram,
                         A_values: Optional[Sequence[float]] = None) -> None:
    """Transition table; A_ell defaults to identity scaling of the slopes."""
    if A_values is None:
        A_values = list(diagram.transition_slopes)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["ell", "v_star", "v_tilde", "a_minus", "a_plus", "A_ell",
                      "type1_window", "k_star"])
        for i in range(diagram.ell_max):
            ell = i + 1
            out.writerow([ell, f"{diagram.v_star[i]:.12g}",
                          f"{diagram.v_tilde[i]:.12g}",
                          f"{diagram.a_minus[i]:.12g}", f"{diagram.a_plus[i]:.12g}",
                          f"{A_values[i]:.12g}", int(ell <= diagram.k_star),
                          diagram.k_star])


def write_branch_data(path: str, w: float, sigma: float, v_values: Sequence[float],
                      ell_max: int = 12) -> None:
    """Gnuplot-ready branch minima: blocks separated by blank lines."""
    w = guard_degenerate_w(w, ell_max + 1)
    ell_star = degeneracy_ell(w)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# branch minima per slope: v a value  (blocks: ell/kind)\n")
        for ell in range(1, ell_max + 1):
            for kind in ("type2", "type1"):
                if kind == "type1" and ell >= ell_star:
                    continue
                fh.write(f"# ell={ell} kind={kind}\n")
                for v in v_values:
                    a, val = minimize_over_branch(float(v), w, sigma, ell, kind)
                    if math.isfinite(val):
                        fh.write(f"{v:.10g} {a:.10g} {val:.10g}\n")
                fh.write("\n\n")
