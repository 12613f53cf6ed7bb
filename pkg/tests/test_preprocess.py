import json

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from evcover.instance import make_instance
from evcover.preprocess import (INTERMEDIATE, NotRDenseError, all_pairs_shortest_paths,
                                build_coverage, bundle_to_json, compute_weights, is_r_dense,
                                preprocess)

from conftest import random_connected_arcs


def _dense_lengths(n, arcs):
    m = np.zeros((n, n))
    for u, v, w in arcs:
        m[u, v] = m[v, u] = w
    return m


def test_single_node():
    inst = make_instance(1, [], prices=[1], capacities=[1], budget=1, radius=1, weights=[0])
    table = all_pairs_shortest_paths(inst.network)
    assert table.dist.tolist() == [[0.0]]
    assert not is_r_dense(build_coverage(table, 1.0))


def test_path_weights_both_modes():
    arcs = [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]
    demand = {(0, 3): 10.0, (1, 2): 5.0}
    inst = make_instance(4, arcs, prices=[1] * 4, capacities=[1] * 4, budget=1, radius=1,
                         demand=demand)
    table = all_pairs_shortest_paths(inst.network)
    assert compute_weights(table, inst.demand).tolist() == [10, 15, 15, 10]
    assert compute_weights(table, inst.demand, INTERMEDIATE).tolist() == [0, 10, 10, 0]


def test_tie_goes_to_smallest_sequence():
    # two shortest routes 0-1-3 and 0-2-3
    arcs = [(0, 1, 1.0), (0, 2, 1.0), (1, 3, 1.0), (2, 3, 1.0)]
    inst = make_instance(4, arcs, prices=[1] * 4, capacities=[1] * 4, budget=1, radius=1,
                         demand={(0, 3): 7.0, (3, 0): 2.0})
    table = all_pairs_shortest_paths(inst.network)
    assert table.path(0, 3) == (0, 1, 3)
    assert table.path(3, 0) == (3, 1, 0)
    assert compute_weights(table, inst.demand).tolist() == [9, 9, 0, 9]


def test_weights_override_demand():
    inst = make_instance(2, [(0, 1, 1.0)], prices=[1, 1], capacities=[1, 1], budget=1,
                         radius=1, weights=[3, 4], demand={(0, 1): 100.0})
    assert preprocess(inst).weights.tolist() == [3, 4]


def test_coverage_excludes_self_and_uses_tolerance():
    inst = make_instance(3, [(0, 1, 1.0), (1, 2, 0.5)], prices=[1] * 3, capacities=[1] * 3,
                         budget=1, radius=1.5, weights=[1] * 3)
    cov = preprocess(inst).coverage
    assert not cov.b.diagonal().any()
    assert cov.neighbor_sets == ((1, 2), (0, 2), (0, 1))
    cov = build_coverage(all_pairs_shortest_paths(inst.network), 1.5 - 1e-12)
    assert cov.neighbor_sets[0] == (1, 2)


def test_not_r_dense_message():
    inst = make_instance(3, [(0, 1, 1.0), (1, 2, 3.0)], prices=[1] * 3, capacities=[1] * 3,
                         budget=1, radius=1, weights=[1] * 3)
    pre = preprocess(inst)
    with pytest.raises(NotRDenseError, match="node 2 has no neighbor"):
        pre.require_r_dense(inst)


def test_bundle_document(p4):
    pre = preprocess(p4)
    doc = json.loads(bundle_to_json(p4, pre, "inclusive"))
    assert doc["format_version"] == 1
    assert doc["r_dense"] is True
    assert doc["neighbor_sets"]["0"] == [1]
    assert doc["dist"][0][3] == 3


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 14))
def test_distances_match_scipy(seed, n):
    rng = np.random.default_rng(seed)
    arcs = random_connected_arcs(rng, n)
    inst = make_instance(n, arcs, prices=[1] * n, capacities=[1] * n, budget=1, radius=1,
                         weights=[1] * n)
    table = all_pairs_shortest_paths(inst.network)
    ref = shortest_path(csr_matrix(_dense_lengths(n, arcs)), directed=False)
    np.testing.assert_allclose(table.dist, ref)
    assert np.allclose(table.dist, table.dist.T)
    # triangle inequality
    d = table.dist
    assert np.all(d[:, None, :] <= d[:, :, None] + d[None, :, :] + 1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 9))
def test_canonical_paths_match_enumeration(seed, n):
    rng = np.random.default_rng(seed)
    arcs = random_connected_arcs(rng, n, max_len=2)
    inst = make_instance(n, arcs, prices=[1] * n, capacities=[1] * n, budget=1, radius=1,
                         weights=[1] * n)
    table = all_pairs_shortest_paths(inst.network)
    g = nx.Graph()
    g.add_weighted_edges_from(arcs)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            expected = min(tuple(p) for p in nx.all_shortest_paths(g, i, j, weight="weight"))
            got = table.path(i, j)
            assert got == expected
            length = sum(g[a][b]["weight"] for a, b in zip(got, got[1:]))
            assert abs(length - table.dist[i, j]) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 10), radius=st.floats(0, 4))
def test_coverage_definition(seed, n, radius):
    rng = np.random.default_rng(seed)
    inst = make_instance(n, random_connected_arcs(rng, n), prices=[1] * n, capacities=[1] * n,
                         budget=1, radius=radius, weights=[1] * n)
    table = all_pairs_shortest_paths(inst.network)
    cov = build_coverage(table, radius)
    expected = (table.dist <= radius + 1e-9 * max(1, radius)) & ~np.eye(n, dtype=bool)
    assert np.array_equal(cov.b, expected)
    assert np.array_equal(cov.b, cov.b.T)
    assert is_r_dense(cov) == bool(expected.any(axis=1).all())
