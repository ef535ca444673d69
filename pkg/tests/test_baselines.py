import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from probarc.baselines import (
    EdgeNotCovered,
    InvalidOrdering,
    InvalidTree,
    SpanningTree,
    build_spanning_forest,
    estimate,
    mst_estimate,
    ordering_toward,
    sst_counts,
    sst_estimate,
    up_estimate,
    validate_tree,
)
from probarc.csp import build_instance, condition
from probarc.generator import GenSpec, generate, generate_tree

from conftest import LE, brute_force_census


def arboricity(n, edges):
    """Nash-Williams: max over vertex subsets of ceil(|E(H)| / (|V(H)| - 1))."""
    best = 0
    for k in range(2, n + 1):
        for vs in itertools.combinations(range(n), k):
            s = set(vs)
            e = sum(1 for x, y in edges if x in s and y in s)
            best = max(best, math.ceil(e / (k - 1)))
    return best


def is_acyclic(n, edges):
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    for x, y in edges:
        a, b = find(x), find(y)
        if a == b:
            return False
        parent[a] = b
    return True


def oracle_freqs(inst):
    total, usage = brute_force_census(inst)
    return [u / total for u in usage] if total else None


def sat_trees(count, start=0):
    out, k = [], start
    while len(out) < count:
        inst = generate_tree(2 + k % 7, 2 + k % 3, 0.3, 7000 + k)
        if brute_force_census(inst)[0]:
            out.append(inst)
        k += 1
    return out


def test_sst_counts_on_chain(chain_le_3):
    tree = SpanningTree(3, ((0, 1), (1, 2)))
    assert sst_counts(chain_le_3, tree) == {0: [3, 1], 1: [2, 2], 2: [1, 3]}


def test_sst_counts_multiply_other_components():
    inst = build_instance(3, 2, [(0, 1, LE)])
    tree = SpanningTree(3, ((0, 1),))
    # variable 2 is free: every count doubles
    assert sst_counts(inst, tree) == {0: [4, 2], 1: [2, 4], 2: [3, 3]}


def test_sst_counts_are_exact_integers():
    inst = generate_tree(40, 4, 0.0, 1)
    counts = sst_counts(inst, SpanningTree(40, inst.edges))
    assert all(isinstance(c, int) for c in counts[0])
    assert sum(counts[0]) == 4**40


def test_tree_estimators_are_exact():
    for inst in sat_trees(40):
        truth = oracle_freqs(inst)
        tree = SpanningTree(inst.n, inst.edges)
        for method, beliefs in (
            ("sst", sst_estimate(inst, tree).beliefs),
            ("up", estimate(inst, "up").beliefs),
            ("mst", mst_estimate(inst, [tree]).beliefs),
        ):
            for b, t in zip(beliefs, truth):
                assert np.allclose(b, t, atol=1e-12), method


def test_up_chain_matches_hand_computation(chain_le_3):
    assert np.allclose(up_estimate(chain_le_3, [0, 1, 2], 2), [0.25, 0.75])
    # directing away from the sink loses exactness
    assert np.allclose(up_estimate(chain_le_3, [2, 1, 0], 0), [0.75, 0.25])
    assert np.allclose(up_estimate(chain_le_3, [1, 2, 0], 0), [2 / 3, 1 / 3])


def test_up_ordering_validation(chain_le_3):
    with pytest.raises(InvalidOrdering):
        up_estimate(chain_le_3, [0, 1], 1)
    with pytest.raises(InvalidOrdering):
        up_estimate(chain_le_3, [0, 1, 2], 0)


def test_ordering_toward_puts_sink_last(chain_le_3):
    assert ordering_toward(chain_le_3, 0) == [2, 1, 0]
    assert ordering_toward(chain_le_3, 1)[-1] == 1


def test_validate_tree(chain_le_3):
    with pytest.raises(InvalidTree):
        validate_tree(chain_le_3, SpanningTree(3, ((0, 2),)))
    tri = build_instance(3, 2, [(0, 1, LE), (1, 2, LE), (0, 2, LE)])
    with pytest.raises(InvalidTree):
        validate_tree(tri, SpanningTree(3, tri.edges))


def test_mst_requires_cover():
    tri = build_instance(3, 2, [(0, 1, LE), (1, 2, LE), (0, 2, LE)])
    with pytest.raises(EdgeNotCovered):
        mst_estimate(tri, [SpanningTree(3, ((0, 1), (1, 2)))])


def test_max_tightness_triangle():
    loose = [(0, 0), (0, 1), (1, 0), (1, 1)]
    tight = [(0, 0)]
    mid = [(0, 0), (1, 1)]
    tri = build_instance(3, 2, [(0, 1, loose), (1, 2, tight), (0, 2, mid)])
    (tree,) = build_spanning_forest(tri, "max-tightness")
    assert tree.edges == ((0, 2), (1, 2))


def test_max_tightness_ties_prefer_low_edges():
    tri = build_instance(3, 2, [(0, 1, LE), (1, 2, LE), (0, 2, LE)])
    (tree,) = build_spanning_forest(tri, "max-tightness")
    assert tree.edges == ((0, 1), (0, 2))


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6, 7])
def test_edge_partition_of_complete_graphs(n):
    inst = build_instance(n, 2, [(x, y, LE) for x, y in itertools.combinations(range(n), 2)])
    forest = build_spanning_forest(inst, "edge-partition")
    assert len(forest) == math.ceil(n / 2)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 100_000), p1=st.sampled_from([0.3, 0.6, 0.9]))
def test_edge_partition_is_minimal_cover(seed, p1):
    inst = generate(GenSpec(7, 2, p1, 0.3, seed=seed))
    forest = build_spanning_forest(inst, "edge-partition")
    seen = [e for t in forest for e in t.edges]
    assert sorted(seen) == sorted(inst.edges)
    assert all(is_acyclic(inst.n, t.edges) for t in forest)
    if inst.edge_count:
        assert len(forest) == arboricity(inst.n, inst.edges)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_max_tightness_is_spanning_forest(seed):
    inst = generate(GenSpec(8, 3, 0.4, 0.3, seed=seed))
    (tree,) = build_spanning_forest(inst, "max-tightness")
    validate_tree(inst, tree)
    assert is_acyclic(inst.n, tree.edges)
    comps = {frozenset(c) for c in tree.components()}
    from probarc.csp import components

    assert comps == {frozenset(c) for c in components(inst)}


def test_unknown_method_and_strategy(chain_le_3):
    with pytest.raises(ValueError):
        estimate(chain_le_3, "nope")
    with pytest.raises(ValueError):
        build_spanning_forest(chain_le_3, "nope")


def test_estimators_return_distributions_on_loopy_instances():
    inst = generate(GenSpec(8, 3, 0.6, 0.2, seed=12))
    assert brute_force_census(inst)[0] > 0
    for method in ("pac", "peleg", "sst", "up", "mst"):
        rep = estimate(inst, method)
        assert rep.method == method
        for b, m in zip(rep.beliefs, inst.domain_sizes):
            assert b.shape == (m,)
            assert b.min() >= 0
            assert abs(b.sum() - 1) < 1e-9 or b.sum() == 0


def test_conditioned_sst_on_tree():
    inst = sat_trees(1, start=30)[0]
    cond = condition(inst, {0: int(np.argmax(oracle_freqs(inst)[0]))})
    truth = oracle_freqs(cond)
    for b, t in zip(sst_estimate(cond, SpanningTree(cond.n, cond.edges)).beliefs, truth):
        assert np.allclose(b, t)
