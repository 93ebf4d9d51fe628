"""Best-first branch-and-bound on binary variables over the LP core.

Child relaxations are solved when a node is created, so the heap always
orders nodes by exact LP bound and the global lower bound is the top of
the heap.  Branching picks the most fractional binary (ties to the lowest
variable id) or, optionally, a pseudo-cost score once history exists.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass

import numpy as np

from .lp import (
    FEASIBLE,
    INFEASIBLE,
    ITERATION_LIMIT,
    OPTIMAL,
    TIME_LIMIT,
    UNBOUNDED,
    MilpModel,
    NumericalBreakdown,
    solve_lp,
)

MOST_FRACTIONAL = "most-fractional"
PSEUDO_COST = "pseudo-cost"


@dataclass(frozen=True)
class SolveConfig:
    mip_gap_rel: float = 1e-4
    feas_tol: float = 1e-7
    int_tol: float = 1e-6
    time_limit_s: float | None = None
    branch_rule: str = MOST_FRACTIONAL
    node_limit: int = 1_000_000

    def __post_init__(self):
        if self.mip_gap_rel <= 0 or self.feas_tol <= 0 or self.int_tol <= 0:
            raise ValueError("tolerances must be > 0")
        if self.branch_rule not in (MOST_FRACTIONAL, PSEUDO_COST):
            raise ValueError(f"unknown branch rule {self.branch_rule!r}")


@dataclass
class Solution:
    """Solver outcome; ``values`` is indexable by variable id."""

    status: str
    values: np.ndarray | None
    objective: float | None
    gap: float | None = None
    node_count: int = 0

    def value(self, model: MilpModel, name: str) -> float:
        return float(self.values[model.var_index[name]])


class _PseudoCosts:
    def __init__(self, n):
        self.up_sum = np.zeros(n)
        self.up_n = np.zeros(n, dtype=int)
        self.dn_sum = np.zeros(n)
        self.dn_n = np.zeros(n, dtype=int)

    def record(self, j, direction, delta, frac):
        if direction > 0 and frac < 1.0:
            self.up_sum[j] += delta / (1.0 - frac)
            self.up_n[j] += 1
        elif direction < 0 and frac > 0.0:
            self.dn_sum[j] += delta / frac
            self.dn_n[j] += 1

    def score(self, j, frac):
        up = self.up_sum[j] / self.up_n[j] if self.up_n[j] else None
        dn = self.dn_sum[j] / self.dn_n[j] if self.dn_n[j] else None
        if up is None or dn is None:
            return None
        eps = 1e-9
        return max(dn * frac, eps) * max(up * (1.0 - frac), eps)


def _fractional_binaries(x, bin_ids, int_tol):
    out = []
    for j in bin_ids:
        f = x[j] - math.floor(x[j] + 0.5)  # signed distance to nearest int
        if abs(f) > int_tol:
            out.append((j, x[j]))
    return out


def _pick_branch_var(fracs, rule, pc):
    if rule == PSEUDO_COST and pc is not None:
        best = None
        for j, v in fracs:
            s = pc.score(j, v - math.floor(v))
            if s is not None and (best is None or s > best[0]
                                  or (s == best[0] and j < best[1])):
                best = (s, j, v)
        if best is not None:
            return best[1], best[2]
    # most fractional, ties by lowest variable id
    best_j, best_v, best_d = None, None, 2.0
    for j, v in fracs:
        d = abs((v - math.floor(v)) - 0.5)
        if d < best_d - 1e-15 or (abs(d - best_d) <= 1e-15
                                  and (best_j is None or j < best_j)):
            best_j, best_v, best_d = j, v, d
    return best_j, best_v


def solve_milp(model: MilpModel, cfg: SolveConfig = SolveConfig()) -> Solution:
    """Minimize over the model with binaries forced integral.

    Returns Optimal when the relative bound gap is at or below
    ``cfg.mip_gap_rel``; TimeLimit (with the best incumbent attached) when
    the time or node budget runs out first.
    """
    model.check_well_formed()
    start = time.monotonic()
    bin_ids = [j for j in range(model.n_vars) if model.binary[j]]

    def lp(bounds):
        return solve_lp(model, bounds=bounds, feas_tol=cfg.feas_tol)

    root = lp(None)
    nodes = 1
    if root.status in (INFEASIBLE, UNBOUNDED):
        return Solution(root.status, None, None, None, nodes)
    if root.status == ITERATION_LIMIT:
        raise NumericalBreakdown("simplex hit its iteration limit at the root")

    incumbent_x = None
    incumbent_obj = math.inf
    root_bound = root.objective

    pc = _PseudoCosts(model.n_vars) if cfg.branch_rule == PSEUDO_COST else None

    def gap_of(lb):
        if incumbent_obj == math.inf:
            return math.inf
        return max(0.0, incumbent_obj - lb) / max(abs(incumbent_obj), 1e-10)

    # heap of (lp bound, seq, bounds dict, fractional list, x)
    heap = []
    seq = 0

    def consider(sol, bounds):
        """Either record an incumbent or enqueue a branching node."""
        nonlocal incumbent_x, incumbent_obj, seq
        fracs = _fractional_binaries(sol.x, bin_ids, cfg.int_tol)
        if not fracs:
            if sol.objective < incumbent_obj - 1e-12:
                incumbent_obj = sol.objective
                incumbent_x = sol.x
            return
        if sol.objective < incumbent_obj:
            heapq.heappush(heap, (sol.objective, seq, bounds, fracs, sol.x))
            seq += 1

    consider(root, {})

    status = None
    while heap:
        lb = heap[0][0]
        if gap_of(lb) <= cfg.mip_gap_rel:
            break
        if cfg.time_limit_s is not None and time.monotonic() - start > cfg.time_limit_s:
            status = TIME_LIMIT
            break
        if nodes >= cfg.node_limit:
            status = TIME_LIMIT
            break
        bound, _, bounds, fracs, x = heapq.heappop(heap)
        if bound >= incumbent_obj:
            continue
        j, v = _pick_branch_var(fracs, cfg.branch_rule, pc)
        for direction, (blo, bhi) in ((-1, (0.0, 0.0)), (1, (1.0, 1.0))):
            child_bounds = dict(bounds)
            child_bounds[j] = (blo, bhi)
            sol = lp(child_bounds)
            nodes += 1
            if sol.status == ITERATION_LIMIT:
                raise NumericalBreakdown("simplex hit its iteration limit")
            if sol.status != OPTIMAL:
                continue
            if pc is not None:
                pc.record(j, direction, max(0.0, sol.objective - bound),
                          v - math.floor(v))
            consider(sol, child_bounds)

    final_lb = heap[0][0] if heap else incumbent_obj
    if incumbent_x is None:
        if status == TIME_LIMIT:
            return Solution(TIME_LIMIT, None, None, None, nodes)
        return Solution(INFEASIBLE, None, None, None, nodes)

    # sandwich check: the relaxation bound can never exceed the incumbent
    if root_bound > incumbent_obj + 1e-6 * max(1.0, abs(incumbent_obj)):
        raise NumericalBreakdown(
            f"relaxation bound {root_bound} above incumbent {incumbent_obj}")

    # independent feasibility re-check, not trusting solver state
    worst = model.constraint_violation(incumbent_x)
    if worst > 10 * cfg.feas_tol:
        raise NumericalBreakdown(
            f"incumbent violates constraints by {worst:.2e}")

    gap = gap_of(final_lb)
    if status == TIME_LIMIT:
        return Solution(TIME_LIMIT, incumbent_x, incumbent_obj, gap, nodes)
    status = OPTIMAL if gap <= cfg.mip_gap_rel else FEASIBLE
    return Solution(status, incumbent_x, incumbent_obj, gap, nodes)
