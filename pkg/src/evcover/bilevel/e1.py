"""Single-level model E1: fewest open sites, follower kept optimal by duality.

The follower's knapsack is treated as a linear program for fixed ``y``. Its
dual has one row per site::

    p_k*lam + beta_k + alpha_k/q_k + gamma_k + delta_k/q_k >= w_k

with ``lam, beta, alpha, delta >= 0`` and ``gamma <= 0``, and the model
requires the dual objective to equal the follower's attractiveness::

    P*lam + sum q_k beta_k + sum_k (sum_{l in B_k} y_l) alpha_k
          + sum y_k delta_k + sum y_k gamma_k = sum w_k x_k

Coverage is symmetric (``l in B_k`` iff ``k in B_l``), so the alpha term
equals ``sum_l y_l * A_l`` with ``A_l = sum_{k in B_l} alpha_k``. Each product
``y * (A, delta, gamma)`` is replaced by an exact McCormick variable.

The dual variables are boxed by ``M = max(max_k w_k q_k,
max_k max(1, p_k) * max_j w_j / p_j)``: for fixed ``y`` an optimal dual exists
with ``alpha = beta = 0``, ``lam <= max w/p``, ``delta_k <= q_k w_k`` and
``|gamma_k| <= p_k lam``, all inside the box.

Sites with zero capacity can hold no units; the coupling rows then force
them closed, so they carry no follower column and no dual row.
"""

from __future__ import annotations

import math
import time

import numpy as np

from ..instance import PlanningInstance, plan_from_counts
from ..mip import BINARY, CONTINUOUS, INTEGER, MipModel, Tolerances, linearize_product, solve_mip
from ..preprocess import Preprocessed
from .common import (FAILED, INFEASIBLE, NOT_R_DENSE, OPTIMAL, BilevelResult,
                     ensure_preprocessed)


def dual_bound(instance: PlanningInstance, weights) -> float:
    w = np.asarray(weights, dtype=float)
    p = np.asarray(instance.prices, dtype=float)
    q = np.asarray(instance.capacities, dtype=float)
    if len(w) == 0:
        return 1.0
    ratio = float(np.max(w / p))
    return max(1.0, float(np.max(w * q)), float(np.max(np.maximum(1.0, p))) * ratio)


def build_e1(instance: PlanningInstance, pre: Preprocessed, *, big_m: float | None = None) -> MipModel:
    n = instance.n
    ids = instance.node_ids
    w = np.asarray(pre.weights, dtype=float)
    p = np.asarray(instance.prices, dtype=float)
    q = np.asarray(instance.capacities)
    M = dual_bound(instance, w) if big_m is None else float(big_m)
    nbrs = pre.coverage.neighbor_sets
    m = MipModel("E1", "min")

    y = []
    x = []
    for k in range(n):
        lo = 1.0 if k in instance.forced_sites else 0.0
        hi = 1.0 if q[k] >= 1 else 0.0
        y.append(m.add_var(f"y_{ids[k]}", lo, hi, BINARY))
        x.append(m.add_var(f"x_{ids[k]}", 0.0, float(q[k]), INTEGER))
    m.set_objective({v: 1.0 for v in y}, "min")

    for k in range(n):
        m.add_constraint({y[l]: 1.0 for l in nbrs[k]}, ">=", 1.0, f"cover_{ids[k]}")
    m.add_constraint({x[k]: p[k] for k in range(n)}, "<=", instance.budget, "budget")
    for k in range(n):
        m.add_constraint({y[k]: 1.0, x[k]: -1.0}, "<=", 0.0, f"open_le_units_{ids[k]}")
        if q[k] >= 1:
            m.add_constraint({x[k]: 1.0, y[k]: -float(q[k])}, "<=", 0.0, f"units_le_cap_{ids[k]}")
            row = {x[k]: 1.0}
            for l in nbrs[k]:
                row[y[l]] = row.get(y[l], 0.0) - float(q[k])
            m.add_constraint(row, "<=", 0.0, f"units_le_support_{ids[k]}")

    active = [k for k in range(n) if q[k] >= 1]
    lam = m.add_var("lambda", 0.0, M, CONTINUOUS)
    beta, alpha, delta, gamma = {}, {}, {}, {}
    for k in active:
        beta[k] = m.add_var(f"beta_{ids[k]}", 0.0, M, CONTINUOUS)
        alpha[k] = m.add_var(f"alpha_{ids[k]}", 0.0, M, CONTINUOUS)
        delta[k] = m.add_var(f"delta_{ids[k]}", 0.0, M, CONTINUOUS)
        gamma[k] = m.add_var(f"gamma_{ids[k]}", -M, 0.0, CONTINUOUS)
        m.add_constraint({lam: p[k], beta[k]: 1.0, alpha[k]: 1.0 / q[k], gamma[k]: 1.0,
                          delta[k]: 1.0 / q[k]}, ">=", w[k], f"dual_{ids[k]}")

    duality = {lam: float(instance.budget)}
    for k in active:
        duality[beta[k]] = float(q[k])
        duality[x[k]] = -w[k]
    for l in range(n):
        terms = [k for k in nbrs[l] if k in alpha]
        if terms and q[l] >= 1:
            agg = m.add_var(f"alpha_sum_{ids[l]}", 0.0, M * len(terms), CONTINUOUS)
            row = {agg: 1.0}
            for k in terms:
                row[alpha[k]] = -1.0
            m.add_constraint(row, "=", 0.0, f"alpha_sum_def_{ids[l]}")
            z = linearize_product(m, y[l], agg, (0.0, M * len(terms)), f"y_alpha_{ids[l]}")
            duality[z] = duality.get(z, 0.0) + 1.0
    for k in active:
        zd = linearize_product(m, y[k], delta[k], (0.0, M), f"y_delta_{ids[k]}")
        zg = linearize_product(m, y[k], gamma[k], (-M, 0.0), f"y_gamma_{ids[k]}")
        duality[zd] = 1.0
        duality[zg] = 1.0
    m.add_constraint(duality, "=", 0.0, "strong_duality")
    return m


def solve_e1(instance: PlanningInstance, pre: Preprocessed | None = None, *,
             time_limit: float = math.inf, tol: Tolerances = Tolerances(),
             big_m: float | None = None) -> BilevelResult:
    start = time.perf_counter()
    pre = ensure_preprocessed(instance, pre)
    if pre.coverage.uncovered_nodes():
        k = pre.coverage.uncovered_nodes()[0]
        return BilevelResult("E1", NOT_R_DENSE, message=(
            f"not R-dense: node {instance.node_ids[k]} has no neighbor within R"))
    model = build_e1(instance, pre, big_m=big_m)
    return _result_from_mip("E1", instance, pre, model, solve_mip(model, time_limit, tol=tol), start)


def _result_from_mip(method, instance, pre, model, sol, start) -> BilevelResult:
    stats = {"mip_status": sol.status, "nodes": sol.node_count, "best_bound": sol.best_bound,
             "objective": sol.objective_value, "iterations": sol.iterations,
             "rows": model.num_constraints, "columns": model.num_vars,
             "wall_time": time.perf_counter() - start}
    if not sol.has_solution:
        status = INFEASIBLE if sol.status == "infeasible" else FAILED
        msg = "no budget-feasible plan satisfies the model" if status == INFEASIBLE else (
            f"no incumbent ({sol.status})")
        return BilevelResult(method, status if status == INFEASIBLE else sol.status,
                             solver_stats=stats, message=msg)
    x = np.array([sol.values[model.index(f"x_{i}")] for i in instance.node_ids])
    plan = plan_from_counts(instance, x, pre.weights, method)
    return BilevelResult(method, OPTIMAL if sol.status == "optimal" else sol.status, plan, stats)
