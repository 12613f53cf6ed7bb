"""Shortest paths, attractiveness weights and the coverage matrix."""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass

import numpy as np

from .instance import PlanningInstance, RoadNetwork

TOL = 1e-9
INCLUSIVE = "inclusive"
INTERMEDIATE = "intermediate"
WEIGHT_MODES = (INCLUSIVE, INTERMEDIATE)

# Above this size all-pairs distances come from one Dijkstra per source
# instead of the cubic dense recursion.
DENSE_LIMIT = 400


class NotRDenseError(ValueError):
    """Some node has no other node within the coverage radius."""

    def __init__(self, node_id: int, radius: float | None = None):
        within = "R" if radius is None else f"R={radius:g}"
        super().__init__(f"not R-dense: node {node_id} has no neighbor within {within}")
        self.node_id = node_id


class ShortestPathTable:
    """All-pairs distances plus canonical shortest paths on demand.

    ``path(i, j)`` is the lexicographically smallest node sequence among all
    simple shortest paths from ``i`` to ``j``.
    """

    def __init__(self, network: RoadNetwork, dist: np.ndarray):
        self.network = network
        self.dist = dist
        n = network.n
        best: list[dict[int, float]] = [{} for _ in range(n)]
        for u, v, w in network.arcs:
            if w < best[u].get(v, math.inf):
                best[u][v] = w
                best[v][u] = w
        self._adj = [sorted(nbrs.items()) for nbrs in best]
        self._paths: dict[tuple[int, int], tuple[int, ...]] = {}

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    def path(self, i: int, j: int) -> tuple[int, ...]:
        key = (i, j)
        cached = self._paths.get(key)
        if cached is None:
            cached = self._paths[key] = self._canonical_path(i, j)
        return cached

    def _canonical_path(self, i: int, j: int) -> tuple[int, ...]:
        dist = self.dist
        if not math.isfinite(dist[i, j]):
            raise RuntimeError(f"no path between internal nodes {i} and {j}")
        # Depth-first in ascending neighbor order; the first complete walk is
        # the lexicographically smallest. Backtracking only happens around
        # zero-length arcs.
        path = [i]
        on_path = {i}
        cursor = [0]
        while path[-1] != j:
            u = path[-1]
            nbrs = self._adj[u]
            k = cursor[-1]
            remaining = dist[u, j]
            while k < len(nbrs):
                v, w = nbrs[k]
                k += 1
                if v not in on_path and abs(w + dist[v, j] - remaining) <= TOL * max(1.0, remaining):
                    break
            else:
                v = None
            cursor[-1] = k
            if v is None:
                if len(path) == 1:
                    raise RuntimeError(f"path reconstruction failed for {i}->{j}")
                on_path.discard(path.pop())
                cursor.pop()
                continue
            path.append(v)
            on_path.add(v)
            cursor.append(0)
        return tuple(path)


def _dijkstra(adj, source: int, n: int) -> np.ndarray:
    dist = np.full(n, math.inf)
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        du, u = heapq.heappop(heap)
        if du > dist[u]:
            continue
        for v, w in adj[u]:
            nd = du + w
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def all_pairs_shortest_paths(network: RoadNetwork) -> ShortestPathTable:
    n = network.n
    if n <= DENSE_LIMIT:
        dist = np.full((n, n), math.inf)
        np.fill_diagonal(dist, 0.0)
        for u, v, w in network.arcs:
            if w < dist[u, v]:
                dist[u, v] = dist[v, u] = w
        for k in range(n):
            np.minimum(dist, dist[:, k, None] + dist[None, k, :], out=dist)
    else:
        adj = network.adjacency()
        dist = np.vstack([_dijkstra(adj, s, n) for s in range(n)])
    if not np.all(np.isfinite(dist)):
        raise RuntimeError("network is not connected")
    return ShortestPathTable(network, dist)


def compute_weights(table: ShortestPathTable, demand, mode: str = INCLUSIVE) -> np.ndarray:
    """Attractiveness: total demand whose canonical path passes through each node.

    ``demand`` is an iterable of ``(origin, destination, volume)`` over
    internal indices. With ``mode="intermediate"`` the two endpoints of a
    path do not collect its volume.
    """
    if mode not in WEIGHT_MODES:
        raise ValueError(f"unknown weights mode {mode!r}")
    omega = np.zeros(table.n)
    for o, d, vol in demand or ():
        if vol <= 0 or o == d:
            continue
        nodes = table.path(o, d)
        if mode == INTERMEDIATE:
            nodes = nodes[1:-1]
        omega[list(nodes)] += vol
    return omega


@dataclass(frozen=True, eq=False)
class CoverageStructure:
    b: np.ndarray
    neighbor_sets: tuple[tuple[int, ...], ...]

    @property
    def n(self) -> int:
        return self.b.shape[0]

    def uncovered_nodes(self) -> list[int]:
        return [k for k, nb in enumerate(self.neighbor_sets) if not nb]


def build_coverage(table: ShortestPathTable | np.ndarray, radius: float) -> CoverageStructure:
    if radius < 0:
        raise ValueError("radius must be >= 0")
    dist = table.dist if isinstance(table, ShortestPathTable) else np.asarray(table)
    b = dist <= radius + TOL * max(1.0, radius)
    np.fill_diagonal(b, False)
    neighbor_sets = tuple(tuple(int(l) for l in np.flatnonzero(row)) for row in b)
    return CoverageStructure(b, neighbor_sets)


def is_r_dense(cov: CoverageStructure) -> bool:
    return all(cov.neighbor_sets)


@dataclass(frozen=True, eq=False)
class Preprocessed:
    table: ShortestPathTable
    weights: np.ndarray
    coverage: CoverageStructure

    def require_r_dense(self, instance: PlanningInstance) -> None:
        missing = self.coverage.uncovered_nodes()
        if missing:
            raise NotRDenseError(instance.node_ids[missing[0]], instance.radius)


def preprocess(instance: PlanningInstance, mode: str = INCLUSIVE) -> Preprocessed:
    """Distances, weights (explicit ones win over demand) and coverage."""
    table = all_pairs_shortest_paths(instance.network)
    if instance.weights is not None:
        weights = np.asarray(instance.weights, dtype=float)
    else:
        weights = compute_weights(table, instance.demand, mode)
    return Preprocessed(table, weights, build_coverage(table, instance.radius))


def bundle_to_json(instance: PlanningInstance, pre: Preprocessed, mode: str) -> str:
    ids = list(instance.node_ids)
    doc = {
        "format_version": 1,
        "node_ids": ids,
        "weights_mode": mode,
        "radius": instance.radius,
        "dist": [[float(x) for x in row] for row in pre.table.dist],
        "weights": [float(w) for w in pre.weights],
        "neighbor_sets": {str(ids[k]): [ids[l] for l in nb]
                          for k, nb in enumerate(pre.coverage.neighbor_sets)},
        "r_dense": is_r_dense(pre.coverage),
    }
    return json.dumps(doc, indent=1) + "\n"
