import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import Bounds, LinearConstraint, milp

from evcover.bench import GeneratorConfig, generate_instance
from evcover.ccp import (CcpRequest, build_ccp_model, greedy_warm_start, is_cover,
                         min_conditional_cover, request_for, solve_ccp)
from evcover.instance import make_instance
from evcover.mip import solve_mip
from evcover.preprocess import NotRDenseError, preprocess

from conftest import random_instance


def brute_force_lex(cov, forced):
    """Smallest cover containing ``forced``; among those the lex-smallest."""
    n = cov.n
    for size in range(1, n + 1):
        for combo in itertools.combinations(range(n), size):
            if not set(forced) <= set(combo):
                continue
            y = np.zeros(n, dtype=bool)
            y[list(combo)] = True
            if is_cover(cov, y):
                return combo
    return None


def highs_lex(cov, forced):
    """Same answer via HiGHS: minimum size, then fix sites open in index order."""
    n = cov.n
    A = LinearConstraint(cov.b.astype(float), 1, np.inf)
    lb = np.zeros(n)
    lb[list(forced)] = 1
    ub = np.ones(n)
    res = milp(np.ones(n), constraints=A, integrality=np.ones(n), bounds=Bounds(lb, ub))
    size = round(res.fun)
    card = LinearConstraint(np.ones((1, n)), size, size)
    for j in range(n):
        if lb[j]:
            continue
        trial = lb.copy()
        trial[j] = 1
        r = milp(np.zeros(n), constraints=[A, card], integrality=np.ones(n),
                 bounds=Bounds(trial, ub))
        if r.status == 0:
            lb = trial
        else:
            ub[j] = 0
    return tuple(int(k) for k in np.flatnonzero(lb))


def test_path4(p4):
    pre = preprocess(p4)
    plan = solve_ccp(request_for(p4, pre.coverage))
    assert plan.open == (1, 2) and plan.node_count == 2 and plan.counts == {}
    plan = solve_ccp(request_for(p4, pre.coverage, [0]))
    assert plan.open == (0, 1, 2)


def test_two_nodes_cover_each_other():
    inst = make_instance(2, [(0, 1, 1.0)], prices=[1, 1], capacities=[1, 1], budget=1,
                         radius=1, weights=[1, 1])
    assert solve_ccp(request_for(inst, preprocess(inst).coverage)).open == (0, 1)


def test_external_ids(p4_doc):
    plan = solve_ccp(request_for(p4_doc, preprocess(p4_doc).coverage))
    assert plan.open == (2, 3)


def test_not_dense():
    inst = make_instance(3, [(0, 1, 1.0), (1, 2, 3.0)], prices=[1] * 3, capacities=[1] * 3,
                         budget=1, radius=1, weights=[1] * 3)
    with pytest.raises(NotRDenseError, match="node 2"):
        solve_ccp(request_for(inst, preprocess(inst).coverage))


def test_greedy_examples(p4):
    y = greedy_warm_start(request_for(p4, preprocess(p4).coverage))
    assert y.sum() >= 2 and is_cover(preprocess(p4).coverage, y)
    k5 = make_instance(5, [(i, j, 1.0) for i in range(5) for j in range(i + 1, 5)],
                       prices=[1] * 5, capacities=[1] * 5, budget=1, radius=1, weights=[1] * 5)
    assert greedy_warm_start(request_for(k5, preprocess(k5).coverage)).sum() <= 5


def test_unknown_method(p4):
    with pytest.raises(ValueError):
        min_conditional_cover(request_for(p4, preprocess(p4).coverage), method="magic")


@settings(max_examples=120, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 11), forced=st.integers(0, 2))
def test_matches_brute_force(seed, n, forced):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, n, forced=min(forced, n))
    cov = preprocess(inst).coverage
    res = min_conditional_cover(CcpRequest(cov, inst.forced_sites))
    assert res.open == brute_force_lex(cov, inst.forced_sites)
    assert res.proven_optimal and res.lex_smallest


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 10))
def test_greedy_is_feasible_upper_bound(seed, n):
    inst = random_instance(np.random.default_rng(seed), n, forced=1)
    cov = preprocess(inst).coverage
    req = CcpRequest(cov, inst.forced_sites)
    y = greedy_warm_start(req)
    assert is_cover(cov, y)
    assert set(inst.forced_sites) <= set(np.flatnonzero(y))
    assert y.sum() >= min_conditional_cover(req).node_count


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(3, 11), j=st.integers(0, 10))
def test_forcing_is_monotone(seed, n, j):
    inst = random_instance(np.random.default_rng(seed), n)
    cov = preprocess(inst).coverage
    base = min_conditional_cover(CcpRequest(cov))
    forced = min_conditional_cover(CcpRequest(cov, frozenset({j % n})))
    assert base.node_count <= forced.node_count
    assert j % n in forced.open
    assert is_cover(cov, np.isin(np.arange(n), forced.open))


@pytest.mark.parametrize("n, regime, seed", [(30, "small", 1), (30, "case", 2), (45, "small", 3),
                                             (45, "large", 4), (60, "case", 5)])
def test_matches_highs_lex_oracle(n, regime, seed):
    inst = generate_instance(GeneratorConfig(seed, n, regime))
    cov = preprocess(inst).coverage
    res = min_conditional_cover(CcpRequest(cov))
    assert res.lex_smallest
    assert res.open == highs_lex(cov, ())


@pytest.mark.parametrize("seed", range(6))
def test_search_and_mip_paths_agree(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 18, forced=seed % 3)
    req = request_for(inst, preprocess(inst).coverage)
    a = min_conditional_cover(req)
    b = min_conditional_cover(req, method="mip")
    assert a.open == b.open
    sol = solve_mip(build_ccp_model(req))
    assert round(sol.objective_value) == a.node_count
