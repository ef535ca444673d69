import numpy as np
import pytest

from probarc.csp import graph_info
from probarc.generator import GenSpec, generate, generate_tree, prufer_edges


def test_complete_graph_at_p1_one():
    assert generate(GenSpec(20, 3, 1.0, 0.5, seed=0)).edge_count == 190


def test_no_edges_at_p1_zero():
    assert generate(GenSpec(20, 3, 0.0, 0.5, seed=0)).edge_count == 0


def test_p2_zero_allows_everything():
    inst = generate(GenSpec(6, 3, 1.0, 0.0, seed=4))
    assert all(mat.all() for mat in inst.matrices)
    from probarc.oracle import enumerate_solutions

    assert enumerate_solutions(inst).total == 3**6


def test_p2_one_forbids_everything():
    inst = generate(GenSpec(4, 3, 1.0, 1.0, seed=4))
    assert not any(mat.any() for mat in inst.matrices)


def test_determinism():
    a = generate(GenSpec(10, 4, 0.5, 0.3, seed=9))
    b = generate(GenSpec(10, 4, 0.5, 0.3, seed=9))
    assert a.edges == b.edges
    assert all(np.array_equal(x, y) for x, y in zip(a.matrices, b.matrices))
    c = generate(GenSpec(10, 4, 0.5, 0.3, seed=10))
    assert a.edges != c.edges or any(not np.array_equal(x, y) for x, y in zip(a.matrices, c.matrices))


def test_edge_streams_are_independent():
    # a shared edge draws the same matrix whatever else is present
    small = generate(GenSpec(10, 4, 0.3, 0.3, seed=2))
    big = generate(GenSpec(10, 4, 0.9, 0.3, seed=2))
    assert set(small.edges) <= set(big.edges)
    for e in small.edges:
        assert np.array_equal(small.matrix(*e), big.matrix(*e))


def test_edge_count_concentrates():
    counts = [generate(GenSpec(20, 2, 0.5, 0.2, seed=s)).edge_count for s in range(1000)]
    assert abs(np.mean(counts) - 95) <= 0.03 * 95


def test_forbidden_fraction_concentrates():
    zeros = total = 0
    for s in range(200):
        inst = generate(GenSpec(10, 5, 1.0, 0.2, seed=s))
        for mat in inst.matrices:
            zeros += int((~mat).sum())
            total += mat.size
    assert abs(zeros / total - 0.2) <= 0.02


@pytest.mark.parametrize("bad", [dict(n=0), dict(m=0), dict(p1=1.5), dict(p2=-0.1)])
def test_spec_validation(bad):
    args = dict(n=3, m=2, p1=0.5, p2=0.5) | bad
    with pytest.raises(ValueError):
        GenSpec(**args)


def test_prufer_decoding():
    assert sorted(prufer_edges([3, 3, 3], 5)) == [(0, 3), (1, 3), (2, 3), (3, 4)]
    assert sorted(prufer_edges([0, 1, 2], 5)) == [(0, 1), (0, 3), (1, 2), (2, 4)]


@pytest.mark.parametrize("seed", range(20))
def test_trees_are_singly_connected(seed):
    inst = generate_tree(8, 3, 0.3, seed)
    assert inst.edge_count == 7
    info = graph_info(inst)
    assert info.connected and info.singly_connected


def test_tiny_trees():
    assert generate_tree(1, 3, 0.3, 0).edge_count == 0
    assert generate_tree(2, 3, 0.3, 0).edges == ((0, 1),)
