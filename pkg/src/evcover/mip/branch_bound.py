"""LP relaxation and best-bound branch-and-bound on top of :mod:`simplex`."""

from __future__ import annotations

import heapq
import itertools
import logging
import math
import time

import numpy as np

from .model import MipModel, MipSolution, Tolerances
from .simplex import INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED, DualSimplex

log = logging.getLogger(__name__)

TIME_LIMIT = "time_limit"
NODE_LIMIT = "node_limit"


class _Presolved:
    """Model in engine form with empty rows dropped and fixed columns folded."""

    def __init__(self, model: MipModel, tol: Tolerances):
        model.validate()
        A, lo, hi, c, lb, ub, integer = model.matrix_form()
        self.sign = -1.0 if model.sense == "max" else 1.0
        self.n = model.num_vars
        self.infeasible = False
        # integer bounds are rounded inward
        lb = np.where(integer, np.ceil(lb - tol.integrality), lb)
        ub = np.where(integer, np.floor(ub + tol.integrality), ub)
        if np.any(lb > ub):
            self.infeasible = True
        fixed = lb == ub
        self.fixed = fixed
        self.fixed_values = lb[fixed]
        shift = A[:, fixed] @ self.fixed_values if fixed.any() else np.zeros(A.shape[0])
        self.const = float(c[fixed] @ self.fixed_values)
        keep = ~fixed
        A = A[:, keep]
        lo, hi = lo - shift, hi - shift
        nnz = np.diff(A.tocsr().indptr)
        empty = nnz == 0
        if np.any(empty & ((lo > tol.feasibility) | (hi < -tol.feasibility))):
            self.infeasible = True
        rows = ~empty
        self.A = A.tocsr()[rows].tocsc()
        self.lo, self.hi = lo[rows], hi[rows]
        self.c = c[keep]
        self.lb, self.ub = lb[keep], ub[keep]
        self.integer = integer[keep]
        self.cols = np.flatnonzero(keep)

    def engine(self, tol: Tolerances) -> DualSimplex:
        return DualSimplex(self.A, self.lo, self.hi, self.c, self.lb, self.ub,
                           feas_tol=tol.feasibility)

    def expand(self, x_reduced: np.ndarray) -> np.ndarray:
        x = np.empty(self.n)
        x[self.fixed] = self.fixed_values
        x[self.cols] = x_reduced
        return x

    def user_objective(self, engine_obj: float) -> float:
        return self.sign * (engine_obj + self.const)


def solve_lp_relaxation(model: MipModel, tol: Tolerances = Tolerances()) -> MipSolution:
    """Solve the continuous relaxation of ``model``.

    Status is one of ``optimal``, ``infeasible`` or ``unbounded``.
    """
    start = time.perf_counter()
    pre = _Presolved(model, tol)
    if pre.infeasible:
        return MipSolution("infeasible", wall_time=time.perf_counter() - start)
    eng = pre.engine(tol)
    status = eng.solve()
    sol = MipSolution(status, iterations=eng.iterations)
    if status == OPTIMAL:
        sol.values = pre.expand(eng.values)
        sol.objective_value = pre.user_objective(eng.objective)
        sol.best_bound = sol.objective_value
    sol.wall_time = time.perf_counter() - start
    return sol


def _objective_is_integral(model: MipModel) -> bool:
    for j, cj in model.objective.items():
        if not model.variables[j].is_integer or cj != round(cj):
            return False
    return True


def _allowance(best_obj: float, integral_obj: bool, tol: Tolerances, const: float) -> float:
    """Largest engine objective a strictly better solution may have."""
    if integral_obj:
        return best_obj - 1.0 + 1e-6
    return best_obj - tol.relative_gap * max(1.0, abs(best_obj + const))


def _reduced_cost_fixing(eng: DualSimplex, int_idx, xi, lbs, ubs, allow: float):
    """Tighten integer bounds that no improving solution can leave.

    Moving a nonbasic variable ``t`` units off its bound raises the LP value
    by at least ``t * |d_j|``; beyond ``allow`` no improvement remains.
    """
    if allow < 0:
        return lbs, ubs
    d = eng.d[int_idx]
    nonbasic = ~eng.is_basic[int_idx]
    at_lo = nonbasic & (np.abs(xi - lbs) <= 1e-9) & (d > 1e-9)
    at_hi = nonbasic & (np.abs(xi - ubs) <= 1e-9) & (d < -1e-9)
    if not (at_lo.any() or at_hi.any()):
        return lbs, ubs
    lbs, ubs = lbs.copy(), ubs.copy()
    with np.errstate(divide="ignore"):
        room = np.floor(allow / np.abs(d) + 1e-9)
    ubs[at_lo] = np.minimum(ubs[at_lo], lbs[at_lo] + room[at_lo])
    lbs[at_hi] = np.maximum(lbs[at_hi], ubs[at_hi] - room[at_hi])
    return lbs, ubs


def solve_mip(model: MipModel, time_limit: float = math.inf, *,
              tol: Tolerances = Tolerances(), incumbent: np.ndarray | None = None,
              node_limit: int | None = None) -> MipSolution:
    """Branch-and-bound over the integer variables of ``model``.

    Nodes are explored by a depth-first dive toward the nearer rounding of
    the most fractional variable (lowest index on ties); when a dive ends the
    open node with the best bound is resumed. Returns the proven optimum, or
    the best incumbent and bound when ``time_limit`` seconds or
    ``node_limit`` nodes run out.
    """
    if not time_limit > 0:
        raise ValueError("time_limit must be positive")
    start = time.perf_counter()
    pre = _Presolved(model, tol)
    if pre.infeasible:
        return MipSolution("infeasible", wall_time=time.perf_counter() - start)

    integral_obj = _objective_is_integral(model)
    int_idx = np.flatnonzero(pre.integer)
    eng = pre.engine(tol)

    best_x: np.ndarray | None = None
    best_obj = math.inf  # engine (minimization) space, without ``const``
    if incumbent is not None:
        inc = np.asarray(incumbent, dtype=float)
        if not model.violations(inc, tol.integrality):
            best_x = inc[pre.cols].copy()
            best_obj = float(pre.c @ best_x)

    def effective(bound: float) -> float:
        if integral_obj:
            # objective takes integer values once ``const`` is added back
            return math.ceil(bound + pre.const - 1e-6) - pre.const
        return bound

    def pruned(bound: float) -> bool:
        if best_obj == math.inf:
            return False
        gap = tol.relative_gap * max(1.0, abs(best_obj + pre.const))
        return bound >= best_obj - gap

    root_lb, root_ub = pre.lb[int_idx].copy(), pre.ub[int_idx].copy()
    cur_lb, cur_ub = root_lb.copy(), root_ub.copy()
    counter = itertools.count()
    heap: list = []
    current = (-math.inf, root_lb, root_ub)
    nodes = 0
    status = None

    while True:
        if current is None:
            while heap and pruned(heap[0][0]):
                heapq.heappop(heap)
            if not heap:
                break
            bound, _, lbs, ubs = heapq.heappop(heap)
            current = (bound, lbs, ubs)
        if time.perf_counter() - start > time_limit:
            status = TIME_LIMIT
            break
        if node_limit is not None and nodes >= node_limit:
            status = NODE_LIMIT
            break
        _, lbs, ubs = current
        changed = np.flatnonzero((lbs != cur_lb) | (ubs != cur_ub))
        if len(changed):
            eng.set_bounds(int_idx[changed], lbs[changed], ubs[changed])
            cur_lb[changed], cur_ub[changed] = lbs[changed], ubs[changed]
        lp_status = eng.solve()
        nodes += 1
        if lp_status == UNBOUNDED:
            if nodes == 1:
                status = UNBOUNDED
                break
            current = None
            continue
        if lp_status in (INFEASIBLE, ITERATION_LIMIT):
            if lp_status == ITERATION_LIMIT:
                log.warning("LP iteration limit at node %d; node dropped", nodes)
            current = None
            continue
        bound = effective(eng.objective)
        if pruned(bound):
            current = None
            continue
        x = eng.values
        xi = x[int_idx]
        if best_x is not None:
            lbs, ubs = _reduced_cost_fixing(eng, int_idx, xi, lbs, ubs,
                                            _allowance(best_obj, integral_obj, tol, pre.const)
                                            - eng.objective)
        frac = np.abs(xi - np.round(xi))
        fractional = frac > tol.integrality
        if not fractional.any():
            x[int_idx] = np.round(xi)
            obj = float(pre.c @ x)
            if obj < best_obj:
                best_obj, best_x = obj, x
            current = None
            continue
        dist = np.where(fractional, np.minimum(xi - np.floor(xi), np.ceil(xi) - xi), -1.0)
        k = int(np.argmax(dist))  # argmax returns the lowest index on ties
        down_ub = ubs.copy()
        down_ub[k] = math.floor(xi[k])
        up_lb = lbs.copy()
        up_lb[k] = math.ceil(xi[k])
        down = (bound, lbs, down_ub)
        up = (bound, up_lb, ubs)
        if xi[k] - math.floor(xi[k]) >= 0.5:
            dive, other = up, down
        else:
            dive, other = down, up
        heapq.heappush(heap, (other[0], next(counter), other[1], other[2]))
        current = dive

    sol = MipSolution(status or (OPTIMAL if best_x is not None else INFEASIBLE),
                      node_count=nodes, iterations=eng.iterations)
    if status == UNBOUNDED:
        sol.wall_time = time.perf_counter() - start
        return sol
    if best_x is not None:
        sol.values = pre.expand(best_x)
        sol.objective_value = pre.user_objective(best_obj)
    if status is None:
        sol.best_bound = sol.objective_value
    else:
        open_bounds = [b for b, *_ in heap]
        if current is not None:
            open_bounds.append(current[0])
        lower = min(open_bounds, default=best_obj)
        lower = min(lower, best_obj)
        sol.best_bound = pre.user_objective(lower) if math.isfinite(lower) else (
            -math.inf * pre.sign)
    sol.wall_time = time.perf_counter() - start
    return sol
