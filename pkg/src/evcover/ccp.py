"""Conditional covering: fewest open sites such that every node has another
open site within the coverage radius.

The optimum count comes from branch-and-bound on the 0-1 model. Among all
optimal covers the lexicographically smallest site set is then recovered by a
depth-first search that fixes sites in index order, trying "open" first, and
prunes with the LP bound.
"""

from __future__ import annotations

import logging
import math
import sys
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .instance import PlanningInstance, StationPlan
from .mip import BINARY, MipModel, Tolerances, solve_mip
from .mip.simplex import OPTIMAL, DualSimplex
from .preprocess import CoverageStructure, NotRDenseError

log = logging.getLogger(__name__)

LEX_NODE_LIMIT = 20000
# nodes one tie-break question may use before the site keeps the witness's value
LEX_SITE_LIMIT = 1500


@dataclass(frozen=True, eq=False)
class CcpRequest:
    coverage: CoverageStructure
    forced: frozenset[int] = frozenset()
    node_ids: tuple[int, ...] | None = None

    def __post_init__(self):
        n = self.coverage.n
        bad = [f for f in self.forced if not 0 <= f < n]
        if bad:
            raise ValueError(f"forced sites {bad} are not nodes")

    def ids(self) -> tuple[int, ...]:
        return self.node_ids if self.node_ids is not None else tuple(range(self.coverage.n))


@dataclass
class CoverResult:
    open: tuple[int, ...]  # internal indices, ascending
    proven_optimal: bool = True
    lex_smallest: bool = True
    nodes: int = 0
    wall_time: float = 0.0
    stats: dict = field(default_factory=dict)

    @property
    def node_count(self) -> int:
        return len(self.open)


def is_cover(coverage: CoverageStructure, open_mask) -> bool:
    y = np.asarray(open_mask, dtype=bool)
    return bool(np.all(coverage.b[:, y].any(axis=1)))


def _check_dense(req: CcpRequest) -> None:
    missing = req.coverage.uncovered_nodes()
    if missing:
        raise NotRDenseError(req.ids()[missing[0]])


def greedy_warm_start(req: CcpRequest) -> np.ndarray:
    """Greedy cover seeded with the forced sites, then pruned of redundancy."""
    _check_dense(req)
    b = req.coverage.b
    n = req.coverage.n
    y = np.zeros(n, dtype=bool)
    y[list(req.forced)] = True
    covered = b[:, y].any(axis=1)
    while not covered.all():
        gain = b[~covered].sum(axis=0)
        gain[y] = -1
        y[int(np.argmax(gain))] = True
        covered = b[:, y].any(axis=1)
    counts = b[:, y].sum(axis=1)
    for l in sorted(np.flatnonzero(y), reverse=True):
        if l in req.forced:
            continue
        if np.all(counts[b[:, l]] >= 2):
            y[l] = False
            counts -= b[:, l]
    return y


def build_ccp_model(req: CcpRequest) -> MipModel:
    model = MipModel("ccp", "min")
    ids = req.ids()
    n = req.coverage.n
    y = [model.add_var(f"y_{ids[l]}", 1.0 if l in req.forced else 0.0, 1.0, BINARY)
         for l in range(n)]
    for k, nbrs in enumerate(req.coverage.neighbor_sets):
        model.add_constraint({y[l]: 1.0 for l in nbrs}, ">=", 1.0, f"cover_{ids[k]}")
    model.set_objective({v: 1.0 for v in y}, "min")
    return model


class _CoverSearch:
    """Depth-first cover search on one persistent LP engine.

    ``find(target)`` looks for a cover with at most ``target`` sites under
    the current fixings. Each node first propagates forced openings (a row
    left with a single candidate), then prunes with the rounded-up LP bound
    and fixes closed any site whose reduced cost exceeds the slack. It
    branches on the unsatisfied row with the fewest candidates, one child per
    candidate, largest LP value first.
    """

    def __init__(self, req: CcpRequest):
        cov = req.coverage
        self.b = cov.b
        self.bi = cov.b.astype(np.int32)
        n = cov.n
        self.lb = np.zeros(n)
        self.lb[list(req.forced)] = 1.0
        self.ub = np.ones(n)
        self.eng = DualSimplex(sp.csc_matrix(cov.b.astype(float)), np.ones(n),
                               np.full(n, np.inf), np.ones(n), self.lb.copy(), self.ub.copy())
        self._eng_lb, self._eng_ub = self.lb.copy(), self.ub.copy()
        self.nodes = 0

    def fix(self, j: int, lo: float, hi: float) -> None:
        self.lb[j], self.ub[j] = lo, hi

    def _sync(self) -> None:
        changed = np.flatnonzero((self.lb != self._eng_lb) | (self.ub != self._eng_ub))
        if len(changed):
            self.eng.set_bounds(changed, self.lb[changed], self.ub[changed])
            self._eng_lb[changed] = self.lb[changed]
            self._eng_ub[changed] = self.ub[changed]

    def _propagate(self, lb, ub, target):
        """Open sites that are the last candidate of an unsatisfied row.

        Returns ``None`` when some row has no candidate left or the forced
        openings exceed ``target``.
        """
        while True:
            if lb.sum() > target:
                return None
            covered = self.bi @ (lb > 0) > 0
            free = (ub > 0) & (lb == 0)
            count = self.bi @ free
            open_rows = ~covered
            if np.any(open_rows & (count == 0)):
                return None
            single = np.flatnonzero(open_rows & (count == 1))
            if len(single) == 0:
                return lb
            lb = lb.copy()
            for k in single:
                lb[np.flatnonzero(self.b[k] & free)[0]] = 1.0

    def find(self, target: int, node_limit: int, deadline: float):
        """Return ``(mask, complete)``; ``mask`` is ``None`` if nothing was found
        and ``complete`` is ``False`` when a limit cut the search short."""
        root_lb, root_ub = self.lb.copy(), self.ub.copy()
        stack = [(root_lb, root_ub)]
        found = None
        complete = True
        budget = self.nodes + node_limit
        while stack:
            lb, ub = stack.pop()
            self.nodes += 1
            if self.nodes > budget or time.perf_counter() > deadline:
                complete = False
                break
            lb = self._propagate(lb, ub, target)
            if lb is None:
                continue
            self.lb, self.ub = lb, ub
            self._sync()
            if self.eng.solve() != OPTIMAL:
                continue
            obj = self.eng.objective
            if math.ceil(obj - 1e-6) > target:
                continue
            x = self.eng.values
            # opening a site whose reduced cost exceeds the remaining slack
            # would push the LP bound past the target
            d = self.eng.d[: len(x)]
            closed = ~self.eng.is_basic[: len(x)] & (ub > lb) & (x < 0.5) & (d > target - obj + 1e-9)
            if closed.any():
                ub = ub.copy()
                ub[closed] = 0.0
            frac = np.minimum(x - np.floor(x), np.ceil(x) - x)
            if np.all(frac <= 1e-6):
                mask = x > 0.5
                if mask.sum() <= target and self.b[:, mask].any(axis=1).all():
                    found = mask
                    break
                continue
            # branch on who covers the tightest unsatisfied row: child i opens
            # its i-th candidate and closes the earlier ones
            covered = self.bi @ (lb > 0) > 0
            free = (ub > 0) & (lb == 0)
            count = np.where(covered, len(lb) + 1, self.bi @ free)
            row = int(np.argmin(count))
            if covered[row]:
                # every row is covered by fixed sites; LP is fractional only
                # in optional sites, so closing them all is optimal
                mask = lb > 0
                if mask.sum() <= target:
                    found = mask
                    break
                continue
            cands = np.flatnonzero(self.b[row] & free)
            cands = cands[np.lexsort((cands, -x[cands]))]
            children = []
            closed_ub = ub.copy()
            for c in cands:
                child_lb = lb.copy()
                child_lb[c] = 1.0
                children.append((child_lb, closed_ub.copy()))
                closed_ub[c] = 0.0
            stack.extend(reversed(children))
        self.lb, self.ub = root_lb, root_ub
        return found, complete


def _swap_in(req: CcpRequest, witness: np.ndarray, j: int) -> np.ndarray | None:
    """Open ``j`` and close a later site that has become redundant, if any."""
    y = witness.copy()
    y[j] = True
    hits = req.coverage.b[:, y].sum(axis=1)
    for k in np.flatnonzero(y):
        if k <= j or k in req.forced:
            continue
        if np.all(hits[req.coverage.b[:, k]] >= 2):
            y[k] = False
            return y
    return None


def _lex_smallest(search: _CoverSearch, req: CcpRequest, witness: np.ndarray,
                  node_limit: int, deadline: float,
                  site_limit: int = LEX_SITE_LIMIT) -> tuple[np.ndarray, bool]:
    """Lexicographically smallest cover with as many sites as ``witness``.

    Sites are decided in index order: a site is opened when some optimal
    cover agrees with every earlier decision and opens it. ``witness`` always
    holds such a cover, so only sites it leaves closed need a search.

    A question left open by ``site_limit`` or the overall ``node_limit``
    keeps the witness's decision. The result is then still an optimal cover,
    and the returned flag is ``False``.
    """
    target = int(witness.sum())
    budget = search.nodes + node_limit
    witness = witness.copy()
    exact = True
    opened = len(req.forced)
    for j in range(req.coverage.n):
        if j in req.forced:
            continue
        if opened == target:
            search.fix(j, 0.0, 0.0)
            continue
        if witness[j]:
            search.fix(j, 1.0, 1.0)
            opened += 1
            continue
        search.fix(j, 1.0, 1.0)
        swapped = _swap_in(req, witness, j)
        if swapped is not None:
            witness = swapped
            opened += 1
            continue
        remaining = min(site_limit, budget - search.nodes)
        found = None
        complete = False
        if remaining > 0:
            found, complete = search.find(target, remaining, deadline)
        if found is not None:
            witness = found
            opened += 1
            continue
        exact &= complete
        search.fix(j, 0.0, 0.0)
    return witness, exact


def _optimum_by_search(search: _CoverSearch, warm: np.ndarray, deadline: float):
    """Shrink ``warm`` one site at a time until no smaller cover exists."""
    y = warm.copy()
    while True:
        found, complete = search.find(int(y.sum()) - 1, sys.maxsize, deadline)
        if found is None:
            return y, complete
        y = found


def min_conditional_cover(req: CcpRequest, *, time_limit: float = math.inf,
                          tol: Tolerances = Tolerances(),
                          lex_node_limit: int = LEX_NODE_LIMIT,
                          method: str = "search") -> CoverResult:
    """Optimal conditional cover over internal indices.

    ``method="search"`` proves the optimum with the cover search used for the
    tie-break; ``method="mip"`` solves :func:`build_ccp_model` with the
    generic branch and bound. Both return the same lexicographic optimum.

    Raises :class:`NotRDenseError` when some node has an empty neighbor set.
    """
    if method not in ("search", "mip"):
        raise ValueError(f"unknown cover method {method!r}")
    start = time.perf_counter()
    deadline = start + time_limit if math.isfinite(time_limit) else math.inf
    warm = greedy_warm_start(req)
    stats = {"method": method}
    if method == "mip":
        model = build_ccp_model(req)
        sol = solve_mip(model, time_limit, tol=tol, incumbent=warm.astype(float))
        if not sol.has_solution:
            # cannot happen on R-dense input with a feasible warm start
            raise RuntimeError(f"conditional cover solve failed: {sol.status}")
        y = sol.values > 0.5
        proven = sol.status == OPTIMAL
        stats.update(bb_status=sol.status, bb_nodes=sol.node_count, best_bound=sol.best_bound)
        search = _CoverSearch(req)
    else:
        search = _CoverSearch(req)
        y, proven = _optimum_by_search(search, warm.astype(bool), deadline)
        stats["search_nodes"] = search.nodes
    opt_nodes = search.nodes
    lex = False
    if proven:
        y, lex = _lex_smallest(search, req, y, lex_node_limit, deadline)
        if not lex:
            log.info("tie-break hit its node limits; cover is optimal but may not be "
                     "lexicographically smallest")
    stats["lex_nodes"] = search.nodes - opt_nodes
    nodes = stats.get("bb_nodes", 0) + search.nodes
    return CoverResult(
        open=tuple(int(l) for l in np.flatnonzero(y)),
        proven_optimal=proven,
        lex_smallest=lex,
        nodes=nodes,
        wall_time=time.perf_counter() - start,
        stats=stats,
    )


def solve_ccp(req: CcpRequest, **kwargs) -> StationPlan:
    """Solve the conditional covering problem; ``counts`` stay unset."""
    res = min_conditional_cover(req, **kwargs)
    ids = req.ids()
    return StationPlan("CCP", tuple(ids[l] for l in res.open))


def request_for(instance: PlanningInstance, coverage: CoverageStructure,
                forced=None) -> CcpRequest:
    forced = instance.forced_sites if forced is None else frozenset(forced)
    return CcpRequest(coverage, frozenset(forced), instance.node_ids)
