"""Alternating cover/knapsack heuristic (method H).

Each round solves the conditional cover with the forced set ``F``, then the
knapsack with one mandatory unit on every cover site. Sites the knapsack adds
beyond the cover form ``K``; if ``K`` is empty the round's plan is final,
otherwise the site of ``K`` with the best weight-to-price ratio joins ``F``.

``mode="cumulative"`` keeps every site ever chosen in ``F``. ``mode="single"``
forces only the latest choice (plus the instance's own forced sites); that
variant can revisit a forced set, in which case the loop stops with the last
knapsack plan and the trace is marked ``cycled``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..ccp import CcpRequest, min_conditional_cover
from ..instance import PlanningInstance, StationPlan, plan_from_counts
from ..knapsack import KnapsackInfeasible, KnapsackRequest, solve_bounded_knapsack
from ..preprocess import NotRDenseError, Preprocessed
from .common import INFEASIBLE_BUDGET, INFEASIBLE_CAPACITY, SOLVED, BilevelResult, ensure_preprocessed

CUMULATIVE = "cumulative"
SINGLE = "single"
MODES = (CUMULATIVE, SINGLE)


@dataclass
class HeuristicStep:
    s1: tuple[int, ...]
    s2: tuple[int, ...]
    added: tuple[int, ...]
    chosen: int | None
    forced: tuple[int, ...]

    def to_dict(self) -> dict:
        return {"S1": list(self.s1), "S2": list(self.s2), "K": list(self.added),
                "k1": self.chosen, "F": list(self.forced)}


@dataclass
class HeuristicTrace:
    """Per-round site sets (external ids) and the final plan."""

    iterations: list[HeuristicStep] = field(default_factory=list)
    final: StationPlan | None = None
    status: str = SOLVED
    mode: str = CUMULATIVE
    cycled: bool = False
    proven_covers: bool = True
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "mode": self.mode,
            "status": self.status,
            "cycled": self.cycled,
            "iterations": [s.to_dict() for s in self.iterations],
            "final": None if self.final is None else {
                "open": list(self.final.open),
                "counts": {str(k): v for k, v in self.final.counts.items()},
                "attractiveness": self.final.attractiveness,
                "cost": self.final.cost,
            },
        }


def run_heuristic(instance: PlanningInstance, pre: Preprocessed | None = None, *,
                  mode: str = CUMULATIVE, time_limit: float = math.inf) -> HeuristicTrace:
    """Run method H.

    ``time_limit`` bounds each inner cover solve; when it binds the cover
    may be suboptimal and ``proven_covers`` is cleared.

    Raises :class:`NotRDenseError` if some node cannot be covered.
    """
    if mode not in MODES:
        raise ValueError(f"unknown heuristic mode {mode!r}")
    pre = ensure_preprocessed(instance, pre)
    pre.require_r_dense(instance)
    ids = instance.node_ids
    n = instance.n
    w = np.asarray(pre.weights, dtype=float)
    p = np.asarray(instance.prices, dtype=float)
    q = np.asarray(instance.capacities)
    base = frozenset(instance.forced_sites)
    forced = set(base)
    seen = set()
    trace = HeuristicTrace(mode=mode)
    for _ in range(n + 1):
        key = frozenset(forced)
        if key in seen:
            trace.cycled = True
            break
        seen.add(key)
        cover = min_conditional_cover(CcpRequest(pre.coverage, key, ids), time_limit=time_limit)
        trace.proven_covers &= cover.proven_optimal
        s1 = list(cover.open)
        lb = np.zeros(n, dtype=int)
        lb[s1] = 1
        if np.any(q[s1] < 1):
            trace.status = INFEASIBLE_CAPACITY
            trace.message = "a cover site has zero capacity"
            trace.iterations.append(HeuristicStep(tuple(ids[k] for k in s1), (), (), None,
                                                  tuple(ids[k] for k in sorted(forced))))
            trace.final = None
            return trace
        try:
            res = solve_bounded_knapsack(KnapsackRequest(w, p, q, instance.budget, lb))
        except KnapsackInfeasible as exc:
            trace.status = INFEASIBLE_BUDGET
            trace.message = f"cover cost {exc.forced_cost:g} exceeds budget {exc.budget:g}"
            trace.iterations.append(HeuristicStep(tuple(ids[k] for k in s1), (), (), None,
                                                  tuple(ids[k] for k in sorted(forced))))
            trace.final = None
            return trace
        s2 = [int(k) for k in np.flatnonzero(res.counts)]
        added = sorted(set(s2) - set(s1))
        chosen = None
        if added:
            ratio = w[added] / p[added]
            chosen = added[int(np.argmax(ratio))]  # first maximum is the smallest index
        trace.iterations.append(HeuristicStep(
            tuple(ids[k] for k in s1), tuple(ids[k] for k in s2), tuple(ids[k] for k in added),
            None if chosen is None else ids[chosen], tuple(ids[k] for k in sorted(forced))))
        trace.final = plan_from_counts(instance, res.counts, w, "H")
        if chosen is None:
            break
        if mode == CUMULATIVE:
            forced.add(chosen)
        else:
            forced = set(base) | {chosen}
    return trace


def solve_heuristic(instance: PlanningInstance, pre: Preprocessed | None = None, *,
                    mode: str = CUMULATIVE, time_limit: float = math.inf) -> BilevelResult:
    start = time.perf_counter()
    try:
        trace = run_heuristic(instance, pre, mode=mode, time_limit=time_limit)
    except NotRDenseError as exc:
        return BilevelResult("H", "not_r_dense", message=str(exc))
    stats = {"iterations": len(trace.iterations), "cycled": trace.cycled,
             "proven_covers": trace.proven_covers, "wall_time": time.perf_counter() - start,
             "trace": trace}
    plan = trace.final if trace.status == SOLVED else None
    return BilevelResult("H", trace.status, plan, stats, trace.message)
