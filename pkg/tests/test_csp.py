import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from probarc.csp import (
    DuplicateEdge,
    FormatError,
    IndexOutOfRange,
    SelfLoop,
    build_instance,
    condition,
    dumps,
    graph_info,
    loads,
    neighbors,
    relabel,
)
from probarc.generator import GenSpec, generate

from conftest import LE, brute_force_census, brute_force_solutions


def test_unconstrained_instance():
    inst = build_instance(2, 2, [])
    assert inst.edge_count == 0
    assert inst.assignment_space == 4


def test_chain_fixture_has_four_solutions(chain_le_3):
    assert brute_force_solutions(chain_le_3) == [(0, 0, 0), (0, 0, 1), (0, 1, 1), (1, 1, 1)]


@pytest.mark.parametrize(
    "cons, exc",
    [
        ([(0, 1, LE), (1, 0, LE)], DuplicateEdge),
        ([(0, 0, LE)], SelfLoop),
        ([(0, 3, LE)], IndexOutOfRange),
        ([(0, 1, [(0, 2)])], IndexOutOfRange),
    ],
)
def test_build_validation(cons, exc):
    with pytest.raises(exc):
        build_instance(3, 2, cons)


def test_matrix_input_and_reverse_view():
    mat = np.array([[1, 0, 1], [0, 1, 1]])
    inst = build_instance(2, [2, 3], [(1, 0, mat.T)])
    assert np.array_equal(inst.matrix(0, 1), mat.astype(bool))
    assert np.array_equal(inst.matrix(1, 0), mat.T.astype(bool))
    # the reverse direction is a view of the one stored matrix
    assert np.shares_memory(inst.matrix(1, 0), inst.matrices[0])


def test_matrix_rejects_non_binary_entries():
    with pytest.raises(ValueError):
        build_instance(2, 2, [(0, 1, np.array([[2, 0], [0, 1]]))])


def test_transpose_symmetry_on_random_instances():
    inst = generate(GenSpec(8, 4, 0.6, 0.4, seed=3))
    for x, y in inst.edges:
        a, b = inst.matrix(x, y), inst.matrix(y, x)
        for i, j in itertools.product(range(4), range(4)):
            assert a[i, j] == b[j, i]


def test_graph_info_chain(chain_le_3):
    info = graph_info(chain_le_3)
    assert info.singly_connected and info.connected
    assert info.diameter == 2


def test_graph_info_triangle():
    inst = build_instance(3, 2, [(0, 1, LE), (1, 2, LE), (0, 2, LE)])
    assert not graph_info(inst).singly_connected


def test_graph_info_two_loops():
    # two triangles sharing variable 2
    edges = [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (2, 4)]
    inst = build_instance(5, 2, [(x, y, LE) for x, y in edges])
    info = graph_info(inst)
    assert info.connected and not info.singly_connected


def test_graph_info_single_vertex_and_forest():
    assert graph_info(build_instance(1, 3, [])).diameter == 0
    forest = build_instance(4, 2, [(0, 1, LE)])
    info = graph_info(forest)
    assert info.component_count == 3
    assert not info.connected and not info.singly_connected


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), data=st.data())
def test_graph_info_permutation_invariant(seed, data):
    inst = generate(GenSpec(7, 2, 0.35, 0.5, seed=seed))
    perm = data.draw(st.permutations(range(7)))
    a, b = graph_info(inst), graph_info(relabel(inst, perm))
    assert (a.connected, a.singly_connected, a.diameter) == (b.connected, b.singly_connected, b.diameter)


def test_neighbors(chain_le_3):
    assert [y for y, _ in neighbors(chain_le_3, 1)] == [0, 2]
    assert neighbors(build_instance(2, 2, []), 0) == []
    k4 = build_instance(4, 2, [(x, y, LE) for x, y in itertools.combinations(range(4), 2)])
    ys = [y for y, _ in neighbors(k4, 2)]
    assert ys == [0, 1, 3]
    with pytest.raises(IndexOutOfRange):
        neighbors(k4, 4)


def test_neighbor_matrix_is_row_major_for_x(chain_le_3):
    (_, mat), = [nb for nb in neighbors(chain_le_3, 2) if nb[0] == 1]
    # rows index X2, columns index X1: allowed iff X1 <= X2
    assert mat.tolist() == [[True, False], [True, True]]


def test_condition_counts(chain_le_3):
    cond = condition(chain_le_3, {0: 0})
    assert brute_force_census(cond)[0] == 3
    assert condition(chain_le_3, {}) is chain_le_3
    twice = condition(cond, {0: 0})
    assert all(np.array_equal(a, b) for a, b in zip(cond.matrices, twice.matrices))
    assert all(np.array_equal(a, b) for a, b in zip(cond.unary, twice.unary))
    with pytest.raises(IndexOutOfRange):
        condition(chain_le_3, {0: 2})


def test_condition_isolated_variable():
    inst = build_instance(2, 3, [])
    assert brute_force_census(condition(inst, {1: 2}))[0] == 3


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), data=st.data())
def test_condition_matches_filtered_enumeration(seed, data):
    inst = generate(GenSpec(6, 3, 0.5, 0.3, seed=seed))
    xs = data.draw(st.lists(st.integers(0, 5), unique=True, max_size=3))
    partial = {x: data.draw(st.integers(0, 2)) for x in xs}
    expected = [a for a in brute_force_solutions(inst) if all(a[x] == v for x, v in partial.items())]
    assert brute_force_solutions(condition(inst, partial)) == expected


def test_text_roundtrip():
    inst = generate(GenSpec(6, 3, 0.5, 0.3, seed=11))
    back = loads(dumps(inst, ["header"]))
    assert back.edges == inst.edges
    assert all(np.array_equal(a, b) for a, b in zip(back.matrices, inst.matrices))


def test_text_nonuniform_domains_and_comments():
    text = """# comment
    csp 3 2 3 1   # trailing comment
    con 0 1 2
    0 2
    1 0
    con 2 1 1
    0 1
    """
    inst = loads(text)
    assert inst.domain_sizes == (2, 3, 1)
    assert inst.matrix(1, 2).tolist() == [[False], [True], [False]]


@pytest.mark.parametrize(
    "text",
    [
        "",
        "csp 2 * 2\nfoo 1 2\n",
        "csp 2 * 2\ncon 0 1 2\n0 0\n",
        "csp 2 2\n",
        "csp 2 * 2\ncon 0 1 1\n0 x\n",
        "csp 2 * 2\ncon 0 1 1\n0 0\ncon 1 0 1\n0 0\n",
    ],
)
def test_text_strict_parsing(text):
    with pytest.raises(ValueError):
        loads(text)
