"""Single-level model E2: most attractiveness, with the cover as the follower.

Leader and follower swap roles: the leader maximizes ``sum w_k x_k`` and the
follower picks the fewest open sites compatible with the units ``x``.

``variant="literal"`` uses the original dual block verbatim, with binary
``alpha, beta``::

    |B_k| * alpha_k + beta_k <= 1                  for every k
    sum alpha_k + sum beta_k * x_k = sum y_k

(the first row reads ``sum_{l in B_k} alpha_k``, whose summand does not depend
on ``l``). ``beta_k * x_k`` is linearized with bounds ``[0, q_k]``.

``variant="corrected"`` replaces that block by the LP dual of the follower
``min sum y`` s.t. ``sum_{l in B_k} y_l >= 1``, ``y <= x``, ``y <= 1``::

    sum_{k in B_l} alpha_k - beta_l - mu_l <= 1    for every l
    sum alpha_k - sum x_k beta_k - sum mu_l = sum y_k

with ``alpha, beta, mu`` in ``[0, n]``. ``x_k * beta_k`` is linearized through
a binary expansion of ``x_k``.

Both variants prefer, among plans of equal attractiveness, the one with
fewer open sites: a ``1/(n+1)`` penalty per site when weights are integral,
otherwise a second solve that minimizes the site count at the optimal
attractiveness.
"""

from __future__ import annotations

import math
import time

import numpy as np

from ..instance import PlanningInstance
from ..mip import BINARY, CONTINUOUS, INTEGER, MipModel, Tolerances, linearize_product, solve_mip
from ..preprocess import Preprocessed
from .common import NOT_R_DENSE, BilevelResult, ensure_preprocessed
from .e1 import _result_from_mip

LITERAL = "literal"
CORRECTED = "corrected"
VARIANTS = (LITERAL, CORRECTED)


def _primal_block(m: MipModel, instance: PlanningInstance, pre: Preprocessed):
    n = instance.n
    ids = instance.node_ids
    p = np.asarray(instance.prices, dtype=float)
    q = np.asarray(instance.capacities)
    nbrs = pre.coverage.neighbor_sets
    y, x = [], []
    for k in range(n):
        lo = 1.0 if k in instance.forced_sites else 0.0
        y.append(m.add_var(f"y_{ids[k]}", lo, 1.0 if q[k] >= 1 else 0.0, BINARY))
        x.append(m.add_var(f"x_{ids[k]}", 0.0, float(q[k]), INTEGER))
    m.add_constraint({x[k]: p[k] for k in range(n)}, "<=", instance.budget, "budget")
    for k in range(n):
        if q[k] >= 1:
            m.add_constraint({x[k]: 1.0, y[k]: -float(q[k])}, "<=", 0.0, f"units_le_cap_{ids[k]}")
            row = {x[k]: 1.0}
            for l in nbrs[k]:
                row[y[l]] = row.get(y[l], 0.0) - float(q[k])
            m.add_constraint(row, "<=", 0.0, f"units_le_support_{ids[k]}")
    for k in range(n):
        m.add_constraint({y[l]: 1.0 for l in nbrs[k]}, ">=", 1.0, f"cover_{ids[k]}")
    for k in range(n):
        m.add_constraint({y[k]: 1.0, x[k]: -1.0}, "<=", 0.0, f"open_le_units_{ids[k]}")
    return y, x


def _literal_dual_block(m: MipModel, instance: PlanningInstance, pre: Preprocessed, y, x):
    ids = instance.node_ids
    q = np.asarray(instance.capacities)
    duality = {}
    for k in range(instance.n):
        a = m.add_var(f"alpha_{ids[k]}", 0.0, 1.0, BINARY)
        b = m.add_var(f"beta_{ids[k]}", 0.0, 1.0, BINARY)
        size = len(pre.coverage.neighbor_sets[k])
        m.add_constraint({a: float(size), b: 1.0}, "<=", 1.0, f"dual_{ids[k]}")
        duality[a] = 1.0
        if q[k] >= 1:
            z = linearize_product(m, b, x[k], (0.0, float(q[k])), f"beta_x_{ids[k]}")
            duality[z] = 1.0
    for v in y:
        duality[v] = duality.get(v, 0.0) - 1.0
    m.add_constraint(duality, "=", 0.0, "strong_duality")


def _corrected_dual_block(m: MipModel, instance: PlanningInstance, pre: Preprocessed, y, x):
    n = instance.n
    ids = instance.node_ids
    q = np.asarray(instance.capacities)
    bound = float(max(1, n))
    alpha = [m.add_var(f"alpha_{ids[k]}", 0.0, bound, CONTINUOUS) for k in range(n)]
    beta = [m.add_var(f"beta_{ids[k]}", 0.0, bound, CONTINUOUS) for k in range(n)]
    mu = [m.add_var(f"mu_{ids[k]}", 0.0, bound, CONTINUOUS) for k in range(n)]
    for l in range(n):
        row = {alpha[k]: 1.0 for k in pre.coverage.neighbor_sets[l]}
        row[beta[l]] = -1.0
        row[mu[l]] = -1.0
        m.add_constraint(row, "<=", 1.0, f"dual_{ids[l]}")
    duality = {a: 1.0 for a in alpha}
    for v in mu:
        duality[v] = -1.0
    for v in y:
        duality[v] = -1.0
    for k in range(n):
        if q[k] < 1:
            continue
        bits = max(1, int(q[k]).bit_length())
        expansion = {x[k]: 1.0}
        for j in range(bits):
            u = m.add_var(f"x_bit_{ids[k]}_{j}", 0.0, 1.0, BINARY)
            expansion[u] = -float(2**j)
            z = linearize_product(m, u, beta[k], (0.0, bound), f"bit_beta_{ids[k]}_{j}")
            duality[z] = -float(2**j)
        m.add_constraint(expansion, "=", 0.0, f"x_binary_{ids[k]}")
    m.add_constraint(duality, "=", 0.0, "strong_duality")


def build_e2(instance: PlanningInstance, pre: Preprocessed, *, variant: str = LITERAL,
             site_penalty: float = 0.0) -> MipModel:
    """E2 model; ``site_penalty`` subtracts that much per open site."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown E2 variant {variant!r}")
    w = np.asarray(pre.weights, dtype=float)
    m = MipModel("E2", "max")
    y, x = _primal_block(m, instance, pre)
    if variant == LITERAL:
        _literal_dual_block(m, instance, pre, y, x)
    else:
        _corrected_dual_block(m, instance, pre, y, x)
    obj = {x[k]: float(w[k]) for k in range(instance.n) if w[k] != 0}
    if site_penalty:
        for v in y:
            obj[v] = -site_penalty
    m.set_objective(obj, "max")
    return m


def solve_e2(instance: PlanningInstance, pre: Preprocessed | None = None, *,
             variant: str = LITERAL, time_limit: float = math.inf,
             tol: Tolerances = Tolerances()) -> BilevelResult:
    start = time.perf_counter()
    pre = ensure_preprocessed(instance, pre)
    if pre.coverage.uncovered_nodes():
        k = pre.coverage.uncovered_nodes()[0]
        return BilevelResult("E2", NOT_R_DENSE, message=(
            f"not R-dense: node {instance.node_ids[k]} has no neighbor within R"))
    w = np.asarray(pre.weights, dtype=float)
    integral = bool(np.all(w == np.round(w)))
    n = instance.n
    if integral:
        model = build_e2(instance, pre, variant=variant, site_penalty=1.0 / (n + 1))
        sol = solve_mip(model, time_limit, tol=tol)
        res = _result_from_mip("E2", instance, pre, model, sol, start)
        res.solver_stats["tie_break"] = "penalty"
    else:
        model = build_e2(instance, pre, variant=variant)
        sol = solve_mip(model, time_limit, tol=tol)
        res = _result_from_mip("E2", instance, pre, model, sol, start)
        if sol.status == "optimal":
            remaining = time_limit - (time.perf_counter() - start)
            if remaining > 0:
                second = build_e2(instance, pre, variant=variant)
                target = sol.objective_value - 1e-6 * max(1.0, abs(sol.objective_value))
                second.add_constraint({j: c for j, c in second.objective.items()}, ">=", target,
                                      "attractiveness_floor")
                ys = [second.index(f"y_{i}") for i in instance.node_ids]
                second.set_objective({v: 1.0 for v in ys}, "min")
                sol2 = solve_mip(second, remaining, tol=tol, incumbent=sol.values)
                if sol2.has_solution:
                    res = _result_from_mip("E2", instance, pre, second, sol2, start)
                    if sol2.status != "optimal":
                        res.status = "optimal"  # attractiveness is proven; only the tie-break is not
        res.solver_stats["tie_break"] = "two_phase"
    res.solver_stats["variant"] = variant
    return res
