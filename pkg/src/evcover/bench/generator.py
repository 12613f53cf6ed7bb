"""Seeded random instances on perturbed grids or random planar graphs.

Regimes (integers sampled uniformly, bounds inclusive):

=======  ============  ============  ==========  ====================  ===========
regime   weight        budget P      capacity    unit price            radius R
=======  ============  ============  ==========  ====================  ===========
case     1..99         20            5           1                     1
small    1..99         20..99        1..9        1..ceil(P/4)-1        [1, 3)
large    101..999      101..999      1..19       1..ceil(P/4)-1        [1, 3)
=======  ============  ============  ==========  ====================  ===========

Radii are rounded to two decimals. ``GeneratorConfig.budget`` replaces the
sampled budget, which lets the case regime scale past 27 nodes. Arcs have unit length, so every generated
instance is R-dense.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay

from ..instance import PlanningInstance, make_instance

REGIMES = ("case", "small", "large")
TOPOLOGIES = ("grid", "random-planar")
PRESET_SIZES = {"case": 27, "extended": 57}


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int
    n: int
    regime: str = "small"
    topology: str = "grid"
    degree: float = 3.5
    budget: float | None = None  # overrides the regime's budget when set

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}")
        if self.budget is not None and not (math.isfinite(self.budget) and self.budget >= 0):
            raise ValueError("budget must be finite and nonnegative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def name(self) -> str:
        return f"{self.regime}-n{self.n}-s{self.seed}"


def _grid_arcs(n: int, degree: float, rng: np.random.Generator):
    cols = math.ceil(math.sqrt(n))
    pos = np.array([(k % cols, k // cols) for k in range(n)], dtype=float)
    arcs = set()
    for k in range(n):
        r, c = divmod(k, cols)
        if c + 1 < cols and k + 1 < n:
            arcs.add((k, k + 1))
        if k + cols < n:
            arcs.add((k, k + cols))
    diagonals = []
    for k in range(n):
        r, c = divmod(k, cols)
        if c + 1 < cols and k + cols + 1 < n:
            diagonals.append((k, k + cols + 1))
        if c >= 1 and k + cols - 1 < n:
            diagonals.append((k, k + cols - 1))
    order = rng.permutation(len(diagonals))
    target = degree * n / 2
    for i in order:
        if len(arcs) >= target:
            break
        arcs.add(diagonals[i])
    pos += rng.uniform(-0.2, 0.2, size=pos.shape)
    return sorted(arcs), pos


def _planar_arcs(n: int, degree: float, rng: np.random.Generator):
    pos = rng.uniform(0.0, math.sqrt(n), size=(n, 2))
    if n < 3:
        return [(0, 1)], pos
    tri = Delaunay(pos)
    edges = set()
    for simplex in tri.simplices:
        for a in range(3):
            u, v = sorted((int(simplex[a]), int(simplex[(a + 1) % 3])))
            edges.add((u, v))
    edges = sorted(edges)
    # drop random edges toward the degree target while staying connected
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    keep = set()
    order = [edges[i] for i in rng.permutation(len(edges))]
    for u, v in order:  # spanning tree first
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
            keep.add((u, v))
    target = degree * n / 2
    for e in order:
        if len(keep) >= target:
            break
        keep.add(e)
    return sorted(keep), pos


def generate_instance(cfg: GeneratorConfig) -> PlanningInstance:
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n
    if cfg.topology == "grid":
        arcs, pos = _grid_arcs(n, cfg.degree, rng)
    else:
        arcs, pos = _planar_arcs(n, cfg.degree, rng)
    if cfg.regime == "case":
        weights = rng.integers(1, 100, size=n)
        budget, prices, caps, radius = 20, np.ones(n), np.full(n, 5), 1.0
    else:
        lo, hi = (1, 99) if cfg.regime == "small" else (101, 999)
        weights = rng.integers(lo, hi + 1, size=n)
        budget = int(rng.integers(20, 100)) if cfg.regime == "small" else int(rng.integers(101, 1000))
        qmax = 9 if cfg.regime == "small" else 19
        caps = rng.integers(1, qmax + 1, size=n)
        pmax = math.ceil(budget / 4) - 1
        prices = rng.integers(1, pmax + 1, size=n).astype(float)
        radius = min(2.99, round(float(rng.uniform(1.0, 3.0)), 2))
    if cfg.budget is not None:
        budget = cfg.budget
    return make_instance(n, [(u, v, 1.0) for u, v in arcs], prices=prices, capacities=caps,
                         budget=budget, radius=radius, weights=weights,
                         positions=np.round(pos, 4))


def table_suite(seed: int = 0) -> list[tuple[str, PlanningInstance]]:
    """The 25 + 5 instance benchmark: 8 case, 10 small, 7 large at 27 nodes,
    then 5 large at 57 nodes. Seeds are ``seed + i``."""
    plan = [("case", 27)] * 8 + [("small", 27)] * 10 + [("large", 27)] * 7 + [("large", 57)] * 5
    out = []
    for i, (regime, n) in enumerate(plan):
        cfg = GeneratorConfig(seed=seed + i, n=n, regime=regime)
        out.append((f"{i + 1:02d}-{cfg.name}", generate_instance(cfg)))
    return out
