"""Planning instances, station plans and their JSON documents.

Instance document::

    {
      "format_version": 1,
      "nodes":  [{"id": 1, "label": "A", "price": 1, "capacity": 5, "weight": 12,
                  "pos": [0, 0]}, ...],
      "arcs":   [{"u": 1, "v": 2, "length": 1}, ...],
      "demand": [{"o": 1, "d": 4, "volume": 10}, ...],
      "params": {"budget": 20, "radius": 1, "forced_sites": [1]}
    }

``label``, ``weight`` and ``pos`` are optional per node; ``demand`` may be
omitted when every node carries a ``weight``. Node ids are arbitrary
non-negative integers; internally nodes are renumbered ``0..n-1`` in
ascending id order.

Plan document::

    {"format_version": 1, "method": "H", "open": [2, 3], "counts": {"2": 2, "3": 2},
     "node_count": 2, "attractiveness": 60.0, "cost": 4.0}
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

import numpy as np

FORMAT_VERSION = 1
METHODS = ("CCP", "KP", "H", "E1", "E2", "ORACLE")
TOL = 1e-9


class InstanceSyntaxError(ValueError):
    """The document is not well-formed JSON or misses required structure."""


class InstanceError(ValueError):
    """The document parsed but violates an instance invariant."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class RoadNetwork:
    """Undirected road graph; arcs use internal node indices."""

    node_ids: tuple[int, ...]
    arcs: tuple[tuple[int, int, float], ...]
    labels: tuple[str | None, ...] = ()
    positions: tuple[tuple[float, float], ...] | None = None

    @property
    def n(self) -> int:
        return len(self.node_ids)

    def adjacency(self) -> list[list[tuple[int, float]]]:
        adj: list[list[tuple[int, float]]] = [[] for _ in range(self.n)]
        for u, v, w in self.arcs:
            adj[u].append((v, w))
            adj[v].append((u, w))
        return adj

    def is_connected(self) -> bool:
        if self.n == 0:
            return True
        adj = self.adjacency()
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v, _ in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == self.n


@dataclass(frozen=True)
class PlanningInstance:
    network: RoadNetwork
    prices: tuple[float, ...]
    capacities: tuple[int, ...]
    budget: float
    radius: float
    demand: tuple[tuple[int, int, float], ...] | None = None
    weights: tuple[float, ...] | None = None
    forced_sites: frozenset[int] = frozenset()

    @property
    def n(self) -> int:
        return self.network.n

    @property
    def node_ids(self) -> tuple[int, ...]:
        return self.network.node_ids

    def index_of(self, node_id: int) -> int:
        try:
            return self.node_ids.index(node_id)
        except ValueError:
            raise KeyError(f"unknown node id {node_id}") from None

    def with_changes(self, **changes) -> "PlanningInstance":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True, eq=True)
class StationPlan:
    """Selected sites (external ids) and facility counts.

    ``counts`` is empty for pure covering plans (method ``CCP``).
    """

    method: str
    open: tuple[int, ...]
    counts: Mapping[int, int] = field(default_factory=dict)
    attractiveness: float = 0.0
    cost: float = 0.0

    @property
    def node_count(self) -> int:
        return len(self.open)

    def count_vector(self, instance: PlanningInstance) -> np.ndarray:
        x = np.zeros(instance.n, dtype=int)
        for node_id, c in self.counts.items():
            x[instance.index_of(node_id)] = c
        return x

    def open_vector(self, instance: PlanningInstance) -> np.ndarray:
        y = np.zeros(instance.n, dtype=int)
        for node_id in self.open:
            y[instance.index_of(node_id)] = 1
        return y


def plan_from_counts(instance: PlanningInstance, counts, weights, method: str) -> StationPlan:
    """Build a plan from a per-node count vector; open sites are its support."""
    x = np.rint(np.asarray(counts, dtype=float)).astype(int)
    ids = instance.node_ids
    open_ids = tuple(ids[k] for k in np.flatnonzero(x > 0))
    return StationPlan(
        method=method,
        open=open_ids,
        counts={ids[k]: int(x[k]) for k in np.flatnonzero(x > 0)},
        attractiveness=float(np.dot(np.asarray(weights, dtype=float), x)),
        cost=float(np.dot(np.asarray(instance.prices), x)),
    )


def plan_from_open(instance: PlanningInstance, open_mask, method: str = "CCP") -> StationPlan:
    ids = instance.node_ids
    return StationPlan(method=method, open=tuple(ids[k] for k in np.flatnonzero(open_mask)))


# -- parsing ------------------------------------------------------------------


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InstanceError(where, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise InstanceError(where, "must be finite")
    return float(value)


def _integer(value: Any, where: str) -> int:
    x = _number(value, where)
    if x != int(x):
        raise InstanceError(where, f"expected an integer, got {value!r}")
    return int(x)


def _require(obj: Mapping, key: str, where: str):
    if key not in obj:
        raise InstanceSyntaxError(f"{where}: missing key {key!r}")
    return obj[key]


def instance_from_dict(doc: Mapping[str, Any]) -> PlanningInstance:
    if not isinstance(doc, Mapping):
        raise InstanceSyntaxError("top level must be an object")
    nodes = _require(doc, "nodes", "document")
    arcs = _require(doc, "arcs", "document")
    params = _require(doc, "params", "document")
    if not isinstance(nodes, list) or not isinstance(arcs, list) or not isinstance(params, Mapping):
        raise InstanceSyntaxError("nodes and arcs must be arrays, params an object")
    if not nodes:
        raise InstanceError("nodes", "at least one node is required")

    records = []
    for i, node in enumerate(nodes):
        if not isinstance(node, Mapping):
            raise InstanceSyntaxError(f"nodes[{i}] must be an object")
        node_id = _integer(_require(node, "id", f"nodes[{i}]"), f"nodes[{i}].id")
        if node_id < 0:
            raise InstanceError(f"nodes[{i}].id", "must be >= 0")
        records.append((node_id, i, node))
    records.sort(key=lambda r: r[0])
    ids = tuple(r[0] for r in records)
    if len(set(ids)) != len(ids):
        raise InstanceError("nodes.id", "duplicate node id")
    index = {node_id: k for k, node_id in enumerate(ids)}

    prices, caps, labels, weights, positions = [], [], [], [], []
    for node_id, i, node in records:
        where = f"nodes[{i}]"
        price = _number(_require(node, "price", where), f"{where}.price")
        if price <= 0:
            raise InstanceError(f"{where}.price", "prices must be strictly positive")
        cap = _integer(_require(node, "capacity", where), f"{where}.capacity")
        if cap < 0:
            raise InstanceError(f"{where}.capacity", "capacities must be >= 0")
        prices.append(price)
        caps.append(cap)
        label = node.get("label")
        labels.append(None if label is None else str(label))
        if "weight" in node:
            w = _number(node["weight"], f"{where}.weight")
            if w < 0:
                raise InstanceError(f"{where}.weight", "weights must be >= 0")
            weights.append(w)
        if "pos" in node:
            pos = node["pos"]
            if not (isinstance(pos, list) and len(pos) == 2):
                raise InstanceError(f"{where}.pos", "expected [x, y]")
            positions.append((_number(pos[0], f"{where}.pos"), _number(pos[1], f"{where}.pos")))
    if weights and len(weights) != len(ids):
        raise InstanceError("nodes.weight", "either every node or no node carries a weight")
    if positions and len(positions) != len(ids):
        raise InstanceError("nodes.pos", "either every node or no node carries a position")

    arc_list = []
    for i, arc in enumerate(arcs):
        where = f"arcs[{i}]"
        if not isinstance(arc, Mapping):
            raise InstanceSyntaxError(f"{where} must be an object")
        u = _integer(_require(arc, "u", where), f"{where}.u")
        v = _integer(_require(arc, "v", where), f"{where}.v")
        length = _number(_require(arc, "length", where), f"{where}.length")
        for end in (u, v):
            if end not in index:
                raise InstanceError(f"{where}", f"unknown node id {end}")
        if u == v:
            raise InstanceError(f"{where}", "self-loop arcs are not allowed")
        if length < 0:
            raise InstanceError(f"{where}.length", "arc lengths must be >= 0")
        a, b = sorted((index[u], index[v]))
        arc_list.append((a, b, length))
    arc_list.sort()
    network = RoadNetwork(ids, tuple(arc_list), tuple(labels),
                          tuple(positions) if positions else None)
    if not network.is_connected():
        raise InstanceError("arcs", "graph is disconnected")

    demand = None
    if "demand" in doc and doc["demand"] is not None:
        if not isinstance(doc["demand"], list):
            raise InstanceSyntaxError("demand must be an array")
        acc: dict[tuple[int, int], float] = {}
        for i, entry in enumerate(doc["demand"]):
            where = f"demand[{i}]"
            if not isinstance(entry, Mapping):
                raise InstanceSyntaxError(f"{where} must be an object")
            o = _integer(_require(entry, "o", where), f"{where}.o")
            d = _integer(_require(entry, "d", where), f"{where}.d")
            vol = _number(_require(entry, "volume", where), f"{where}.volume")
            for end in (o, d):
                if end not in index:
                    raise InstanceError(where, f"unknown node id {end}")
            if vol < 0:
                raise InstanceError(f"{where}.volume", "volumes must be >= 0")
            if o == d and vol != 0:
                raise InstanceError(where, "diagonal demand must be 0")
            if o != d and vol > 0:
                key = (index[o], index[d])
                acc[key] = acc.get(key, 0.0) + vol
        demand = tuple((o, d, v) for (o, d), v in sorted(acc.items()))
    if demand is None and not weights:
        raise InstanceError("demand", "either a demand matrix or per-node weights is required")

    budget = _number(_require(params, "budget", "params"), "params.budget")
    radius = _number(_require(params, "radius", "params"), "params.radius")
    if budget < 0:
        raise InstanceError("params.budget", "must be >= 0")
    if radius < 0:
        raise InstanceError("params.radius", "must be >= 0")
    forced = params.get("forced_sites") or []
    if not isinstance(forced, list):
        raise InstanceSyntaxError("params.forced_sites must be an array")
    forced_idx = set()
    for node_id in forced:
        node_id = _integer(node_id, "params.forced_sites")
        if node_id not in index:
            raise InstanceError("params.forced_sites", f"unknown node id {node_id}")
        forced_idx.add(index[node_id])

    return PlanningInstance(
        network=network,
        prices=tuple(prices),
        capacities=tuple(caps),
        budget=budget,
        radius=radius,
        demand=demand,
        weights=tuple(weights) if weights else None,
        forced_sites=frozenset(forced_idx),
    )


def parse_instance(text: str | bytes) -> PlanningInstance:
    """Parse and validate an instance document."""
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InstanceSyntaxError(f"malformed document: {exc}") from exc
    return instance_from_dict(doc)


def load_instance(path) -> PlanningInstance:
    with open(path, "rb") as fh:
        return parse_instance(fh.read())


def _num_out(x: float):
    return int(x) if float(x).is_integer() and abs(x) < 2**53 else float(x)


def instance_to_dict(inst: PlanningInstance) -> dict[str, Any]:
    ids = inst.node_ids
    nodes = []
    for k, node_id in enumerate(ids):
        rec: dict[str, Any] = {"id": node_id}
        label = inst.network.labels[k] if inst.network.labels else None
        if label is not None:
            rec["label"] = label
        rec["price"] = _num_out(inst.prices[k])
        rec["capacity"] = int(inst.capacities[k])
        if inst.weights is not None:
            rec["weight"] = _num_out(inst.weights[k])
        if inst.network.positions is not None:
            rec["pos"] = [_num_out(c) for c in inst.network.positions[k]]
        nodes.append(rec)
    doc: dict[str, Any] = {
        "format_version": FORMAT_VERSION,
        "nodes": nodes,
        "arcs": [{"u": ids[u], "v": ids[v], "length": _num_out(w)}
                 for u, v, w in inst.network.arcs],
    }
    if inst.demand is not None:
        doc["demand"] = [{"o": ids[o], "d": ids[d], "volume": _num_out(v)}
                         for o, d, v in inst.demand]
    params: dict[str, Any] = {"budget": _num_out(inst.budget), "radius": _num_out(inst.radius)}
    if inst.forced_sites:
        params["forced_sites"] = sorted(ids[k] for k in inst.forced_sites)
    doc["params"] = params
    return doc


def serialize_instance(inst: PlanningInstance) -> str:
    return json.dumps(instance_to_dict(inst), indent=1) + "\n"


# -- plans --------------------------------------------------------------------


def plan_to_dict(plan: StationPlan) -> dict[str, Any]:
    return {
        "format_version": FORMAT_VERSION,
        "method": plan.method,
        "open": list(plan.open),
        "counts": {str(k): int(v) for k, v in sorted(plan.counts.items())},
        "node_count": plan.node_count,
        "attractiveness": plan.attractiveness,
        "cost": plan.cost,
    }


def serialize_plan(plan: StationPlan) -> str:
    return json.dumps(plan_to_dict(plan), indent=1) + "\n"


def plan_from_dict(doc: Mapping[str, Any]) -> StationPlan:
    try:
        method = doc["method"]
        open_ids = tuple(int(i) for i in doc["open"])
        counts = {int(k): int(v) for k, v in doc.get("counts", {}).items()}
        plan = StationPlan(method, open_ids, counts,
                           float(doc.get("attractiveness", 0.0)), float(doc.get("cost", 0.0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceSyntaxError(f"malformed plan: {exc}") from exc
    if method not in METHODS:
        raise InstanceError("method", f"unknown method {method!r}")
    if "node_count" in doc and doc["node_count"] != plan.node_count:
        raise InstanceError("node_count", "does not match the open list")
    if any(c <= 0 for c in counts.values()):
        raise InstanceError("counts", "listed counts must be positive")
    if method != "CCP" and set(counts) != set(open_ids):
        raise InstanceError("counts", "open sites and counted sites differ")
    return plan


def parse_plan(text: str | bytes) -> StationPlan:
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InstanceSyntaxError(f"malformed document: {exc}") from exc
    return plan_from_dict(doc)


def make_instance(n: int, arcs: Iterable[tuple[int, int, float]], *, prices, capacities,
                  budget: float, radius: float, weights=None, demand=None,
                  forced_sites: Iterable[int] = (), positions=None) -> PlanningInstance:
    """Convenience constructor with node ids ``0..n-1``; validates like the parser."""
    doc: dict[str, Any] = {
        "nodes": [],
        "arcs": [{"u": int(u), "v": int(v), "length": float(w)} for u, v, w in arcs],
        "params": {"budget": float(budget), "radius": float(radius),
                   "forced_sites": [int(k) for k in forced_sites]},
    }
    for k in range(n):
        rec: dict[str, Any] = {"id": k, "price": float(prices[k]),
                               "capacity": int(capacities[k])}
        if weights is not None:
            rec["weight"] = float(weights[k])
        if positions is not None:
            rec["pos"] = [float(c) for c in positions[k]]
        doc["nodes"].append(rec)
    if demand is not None:
        doc["demand"] = [{"o": int(o), "d": int(d), "volume": float(v)}
                         for (o, d), v in dict(demand).items()]
    return instance_from_dict(doc)
