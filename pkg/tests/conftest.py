from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from evcover.instance import load_instance, make_instance, parse_instance
from evcover.preprocess import build_coverage, is_r_dense

DATA = Path(__file__).parent / "data"


def path4(weights=(15, 15, 15, 10), budget=4, capacity=2):
    """Path 1-2-3-4 with unit arcs, unit prices and R=1 (internal ids 0..3)."""
    return make_instance(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)], prices=[1] * 4,
                         capacities=[capacity] * 4, budget=budget, radius=1.0, weights=weights)


def p4_with(weights=None, budget=None):
    doc = json.loads((DATA / "p4.json").read_text())
    if weights is not None:
        for node, w in zip(doc["nodes"], weights):
            node["weight"] = w
    if budget is not None:
        doc["params"]["budget"] = budget
    return parse_instance(json.dumps(doc))


@pytest.fixture
def p4():
    return path4()


@pytest.fixture
def p4_file():
    return DATA / "p4.json"


@pytest.fixture
def p4_doc():
    return load_instance(DATA / "p4.json")


def random_connected_arcs(rng, n, extra=None, max_len=3):
    """Random spanning tree plus extra arcs, integer lengths in 1..max_len."""
    arcs = {}
    for k in range(1, n):
        u = int(rng.integers(0, k))
        arcs[(u, k)] = float(rng.integers(1, max_len + 1))
    extra = int(rng.integers(0, n + 1)) if extra is None else extra
    for _ in range(extra):
        u, v = sorted(int(a) for a in rng.choice(n, 2, replace=False))
        arcs.setdefault((u, v), float(rng.integers(1, max_len + 1)))
    return [(u, v, w) for (u, v), w in sorted(arcs.items())]


def random_instance(rng, n, *, dense=True, max_cap=3, max_price=3, budget=None, forced=0,
                    tries=200):
    """Seeded random instance with integer data; R-dense when ``dense``."""
    for _ in range(tries):
        arcs = random_connected_arcs(rng, n)
        radius = float(rng.integers(1, 4))
        prices = rng.integers(1, max_price + 1, size=n)
        caps = rng.integers(0 if n > 3 else 1, max_cap + 1, size=n)
        weights = rng.integers(0, 20, size=n)
        P = float(rng.integers(n // 2, 3 * n + 2)) if budget is None else budget
        forced_sites = [int(f) for f in rng.choice(n, forced, replace=False)] if forced else []
        inst = make_instance(n, arcs, prices=prices, capacities=caps, budget=P, radius=radius,
                             weights=weights, forced_sites=forced_sites)
        if not dense:
            return inst
        from evcover.preprocess import all_pairs_shortest_paths

        cov = build_coverage(all_pairs_shortest_paths(inst.network), radius)
        if is_r_dense(cov):
            return inst
    raise RuntimeError("could not draw an R-dense instance")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def report(criterion: int, passed: bool, detail: str) -> bool:
    line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
