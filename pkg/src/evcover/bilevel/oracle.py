"""Brute-force bilevel solver for small instances.

The leader enumerates site sets by size, then lexicographically. The
coupling rows force the follower's support to equal the open set, so a set is
feasible when it is a conditional cover containing the forced sites, every
site has capacity, and one unit per site is affordable. The follower value is
the bounded knapsack over the set with one mandatory unit per site.

The leader objective depends on the open set only, so the optimistic and
pessimistic readings of the bilevel program give the same leader value.
"""

from __future__ import annotations

import itertools
import time

import numpy as np

from ..instance import PlanningInstance, plan_from_counts
from ..knapsack import KnapsackRequest, solve_bounded_knapsack
from ..preprocess import Preprocessed
from .common import INFEASIBLE, NOT_R_DENSE, OPTIMAL, BilevelResult, ensure_preprocessed

SIZE_LIMIT = 14


def bilevel_oracle(instance: PlanningInstance, pre: Preprocessed | None = None, *,
                   size_limit: int = SIZE_LIMIT) -> BilevelResult:
    n = instance.n
    if n > size_limit:
        raise ValueError(f"oracle is limited to {size_limit} nodes, instance has {n}")
    start = time.perf_counter()
    pre = ensure_preprocessed(instance, pre)
    if pre.coverage.uncovered_nodes():
        return BilevelResult("ORACLE", NOT_R_DENSE, message="instance is not R-dense")
    masks = [sum(1 << l for l in nb) for nb in pre.coverage.neighbor_sets]
    prices = np.asarray(instance.prices, dtype=float)
    caps = np.asarray(instance.capacities)
    forced = instance.forced_sites
    free = [k for k in range(n) if k not in forced and caps[k] >= 1]
    if any(caps[f] < 1 for f in forced):
        return BilevelResult("ORACLE", INFEASIBLE, message="a forced site has no capacity")
    base = sum(1 << f for f in forced)
    checked = 0
    for extra in range(len(free) + 1):
        for combo in itertools.combinations(free, extra):
            checked += 1
            chosen = sorted(set(combo) | forced)
            bits = base | sum(1 << l for l in combo)
            if any(not (m & bits) for m in masks):
                continue
            if prices[chosen].sum() > instance.budget + 1e-9 * max(1.0, instance.budget):
                continue
            lb = np.zeros(n, dtype=int)
            lb[chosen] = 1
            res = solve_bounded_knapsack(KnapsackRequest(
                pre.weights, prices, caps, instance.budget, lb, frozenset(chosen)))
            plan = plan_from_counts(instance, res.counts, pre.weights, "ORACLE")
            return BilevelResult("ORACLE", OPTIMAL, plan, {
                "sets_checked": checked, "wall_time": time.perf_counter() - start})
    return BilevelResult("ORACLE", INFEASIBLE, solver_stats={"sets_checked": checked},
                         message="no budget-feasible conditional cover")
