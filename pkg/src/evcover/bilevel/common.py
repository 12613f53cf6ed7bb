"""Result type and plan checks shared by the bilevel solution methods."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..instance import PlanningInstance, StationPlan
from ..preprocess import INCLUSIVE, Preprocessed, preprocess

SOLVED = "solved"
OPTIMAL = "optimal"
TIME_LIMIT = "time_limit"
NODE_LIMIT = "node_limit"
INFEASIBLE = "infeasible"
INFEASIBLE_BUDGET = "infeasible_budget"
INFEASIBLE_CAPACITY = "infeasible_capacity"
NOT_R_DENSE = "not_r_dense"
FAILED = "failed"


@dataclass
class BilevelResult:
    """Outcome of one method on one instance.

    ``plan`` is ``None`` whenever no feasible plan was found; ``status``
    then says why.
    """

    method: str
    status: str
    plan: StationPlan | None = None
    solver_stats: dict = field(default_factory=dict)
    message: str = ""

    @property
    def leader_value(self) -> int | None:
        return None if self.plan is None else self.plan.node_count

    @property
    def follower_value(self) -> float | None:
        return None if self.plan is None else self.plan.attractiveness

    @property
    def has_plan(self) -> bool:
        return self.plan is not None


def ensure_preprocessed(instance: PlanningInstance, pre: Preprocessed | None,
                        weights_mode: str = INCLUSIVE) -> Preprocessed:
    return pre if pre is not None else preprocess(instance, weights_mode)


def plan_violations(instance: PlanningInstance, pre: Preprocessed, plan: StationPlan,
                    tol: float = 1e-9) -> list[str]:
    """Check coverage, budget, capacity, coupling and support equality.

    Returns a list of human-readable problems; empty means feasible.
    """
    problems = []
    x = plan.count_vector(instance)
    y = plan.open_vector(instance)
    b = pre.coverage.b
    q = np.asarray(instance.capacities)
    ids = instance.node_ids
    for k in np.flatnonzero(~b[:, y > 0].any(axis=1)):
        problems.append(f"node {ids[k]} is not covered by another open site")
    cost = float(np.dot(instance.prices, x))
    if cost > instance.budget + tol * max(1.0, instance.budget):
        problems.append(f"cost {cost:g} exceeds budget {instance.budget:g}")
    for k in np.flatnonzero(x > q):
        problems.append(f"node {ids[k]} has {x[k]} units above capacity {q[k]}")
    for k in np.flatnonzero((x > 0) != (y > 0)):
        problems.append(f"node {ids[k]}: open flag and unit count disagree")
    for k in np.flatnonzero(x < 0):
        problems.append(f"node {ids[k]} has a negative count")
    for f in instance.forced_sites:
        if not y[f]:
            problems.append(f"forced site {ids[f]} is closed")
    w = np.asarray(pre.weights)
    if abs(float(w @ x) - plan.attractiveness) > 1e-6 * max(1.0, abs(plan.attractiveness)):
        problems.append("reported attractiveness does not match the counts")
    return problems
