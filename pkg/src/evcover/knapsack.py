"""Bounded knapsack with per-site minimum counts and an optional whitelist."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .instance import StationPlan
from .mip import INTEGER, MipModel, solve_mip

MAX_DP_CELLS = 10_000_000
MAX_SCALE_DIGITS = 7


class KnapsackInfeasible(ValueError):
    """The forced minimum counts already cost more than the budget."""

    def __init__(self, forced_cost: float, budget: float, message: str | None = None):
        super().__init__(message or f"forced cost {forced_cost:g} exceeds budget {budget:g}")
        self.forced_cost = forced_cost
        self.budget = budget


@dataclass(frozen=True, eq=False)
class KnapsackRequest:
    weights: np.ndarray
    prices: np.ndarray
    capacities: np.ndarray
    budget: float
    lower_bounds: np.ndarray | None = None
    allowed_sites: frozenset[int] | None = None

    def __post_init__(self):
        n = len(self.weights)
        for name in ("prices", "capacities"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has wrong length")
        if self.lower_bounds is not None:
            lb = np.asarray(self.lower_bounds)
            if len(lb) != n or np.any(lb < 0) or np.any(lb > np.asarray(self.capacities)):
                raise ValueError("lower bounds must satisfy 0 <= lb <= capacity")

    @property
    def n(self) -> int:
        return len(self.weights)


@dataclass
class KnapsackResult:
    counts: np.ndarray
    objective: float
    cost: float
    method: str

    @property
    def open(self) -> tuple[int, ...]:
        return tuple(int(k) for k in np.flatnonzero(self.counts))


def _integer_scale(values: np.ndarray) -> int | None:
    for digits in range(MAX_SCALE_DIGITS + 1):
        s = 10**digits
        scaled = values * s
        if np.all(np.abs(scaled - np.round(scaled)) <= 1e-9 * np.maximum(1.0, np.abs(scaled))):
            return s
    return None


def _dp(weights, prices, extra, lb_zero, budget_units):
    """Suffix DP over items; returns the chosen extra counts.

    ``value[k][b]``/``opened[k][b]`` describe the best use of items ``k..n-1``
    with at most ``b`` budget units, ranked by value (high) then newly opened
    sites (few). Reconstruction from item 0 takes the smallest count reaching
    that rank, which yields the lexicographically smallest count vector.
    """
    n = len(weights)
    B = budget_units
    tol = 1e-9 * max(1.0, float(np.max(weights * extra, initial=0.0)) * max(1, n))
    value = np.zeros(B + 1)
    opened = np.zeros(B + 1, dtype=np.int64)
    choice = np.zeros((n, B + 1), dtype=np.int32)
    for k in range(n - 1, -1, -1):
        best_v = value.copy()
        best_o = opened.copy()
        best_c = np.zeros(B + 1, dtype=np.int32)
        step = int(prices[k])
        for c in range(1, int(extra[k]) + 1):
            shift = c * step
            if shift > B:
                break
            cand_v = np.full(B + 1, -np.inf)
            cand_v[shift:] = value[: B + 1 - shift] + c * weights[k]
            cand_o = np.zeros(B + 1, dtype=np.int64)
            cand_o[shift:] = opened[: B + 1 - shift] + (1 if lb_zero[k] else 0)
            better = (cand_v > best_v + tol) | ((np.abs(cand_v - best_v) <= tol) & (cand_o < best_o))
            best_v = np.where(better, cand_v, best_v)
            best_o = np.where(better, cand_o, best_o)
            best_c = np.where(better, c, best_c)
        value, opened = best_v, best_o
        choice[k] = best_c
    x = np.zeros(n, dtype=int)
    b = B
    for k in range(n):
        c = int(choice[k, b])
        x[k] = c
        b -= c * int(prices[k])
    return x


def _mip(weights, prices, extra, budget):
    model = MipModel("knapsack", "max")
    xs = [model.add_var(f"x{k}", 0, int(extra[k]), INTEGER) for k in range(len(weights))]
    model.add_constraint({x: float(p) for x, p in zip(xs, prices)}, "<=", budget, "budget")
    model.set_objective({x: float(w) for x, w in zip(xs, weights)}, "max")
    sol = solve_mip(model)
    if not sol.has_solution:
        raise RuntimeError(f"knapsack MIP failed: {sol.status}")
    return np.rint(sol.values).astype(int)


def solve_bounded_knapsack(req: KnapsackRequest) -> KnapsackResult:
    """Maximize total weight under the budget with ``lb <= x <= q``.

    Ties are broken toward fewer open sites, then the lexicographically
    smallest count vector (exact on the dynamic-programming path).

    Raises :class:`KnapsackInfeasible` if the minimum counts are unaffordable
    or forced onto sites outside ``allowed_sites``.
    """
    n = req.n
    w = np.asarray(req.weights, dtype=float)
    p = np.asarray(req.prices, dtype=float)
    caps = np.asarray(req.capacities, dtype=int).copy()
    lb = np.zeros(n, dtype=int) if req.lower_bounds is None else np.asarray(req.lower_bounds, dtype=int)
    if req.allowed_sites is not None:
        mask = np.zeros(n, dtype=bool)
        mask[list(req.allowed_sites)] = True
        if np.any(lb[~mask] > 0):
            raise KnapsackInfeasible(math.nan, req.budget, "minimum counts on a site outside the whitelist")
        caps[~mask] = 0
    forced_cost = float(p @ lb)
    budget = float(req.budget)
    if forced_cost > budget + 1e-9 * max(1.0, budget):
        raise KnapsackInfeasible(forced_cost, budget)
    extra = caps - lb
    residual = max(0.0, budget - forced_cost)
    # zero-weight units only cost money; never buy them
    extra = np.where(w > 0, extra, 0)

    scale = _integer_scale(np.append(p, 1.0))
    method = "dp"
    if scale is not None:
        units = math.floor(residual * scale + 1e-9 * max(1.0, residual * scale))
        if n * (units + 1) > MAX_DP_CELLS:
            scale = None
    if scale is None:
        method = "mip"
        add = _mip(w, p, extra, residual)
    else:
        int_prices = np.rint(p * scale).astype(np.int64)
        # items priced above the residual can never be bought
        add = _dp(w, int_prices, np.where(int_prices <= units, extra, 0), lb == 0, units)
    x = lb + add
    return KnapsackResult(x, float(w @ x), float(p @ x), method)


def solve_knapsack(req: KnapsackRequest, node_ids=None) -> StationPlan:
    res = solve_bounded_knapsack(req)
    ids = tuple(node_ids) if node_ids is not None else tuple(range(req.n))
    nz = np.flatnonzero(res.counts)
    return StationPlan("KP", tuple(ids[k] for k in nz), {ids[k]: int(res.counts[k]) for k in nz},
                       res.objective, res.cost)
