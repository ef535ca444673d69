import itertools
import math

import numpy as np
import pytest

from probarc.csp import graph_info
from probarc.generator import GenSpec, generate_tree
from probarc.harness import (
    CorpusSpec,
    DegenerateVariance,
    SearchHeuristic,
    budget_grid,
    build_corpus,
    csv_body,
    find_oscillator,
    median_backtracks,
    metadata_block,
    pearson,
    replicate_seed,
    run_accuracy_study,
    run_search_study,
    two_loop_topologies,
    verify_period_two,
)
from probarc.pac import PropagationConfig
from probarc.search import SearchLimits, SearchResult


def test_pearson_examples():
    assert pearson([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)
    assert pearson([1, 2, 3], [-1, -2, -3]) == pytest.approx(-1.0)
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert pearson([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)


def test_pearson_errors():
    with pytest.raises(DegenerateVariance):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        pearson([1], [1])
    with pytest.raises(ValueError):
        pearson([1, 2], [1, 2, 3])


def test_budget_grid():
    assert budget_grid(100) == [0, 1, 2, 5, 10, 20, 50, 100]
    assert budget_grid(0) == [0]
    assert budget_grid(7)[-1] == 10


def test_median_counts_unsolved_as_infinite():
    ok = SearchResult("Solution", [0], 3, 4)
    bad = SearchResult("LimitReached", None, 9, 9)
    assert median_backtracks([ok, bad, bad]) == math.inf
    assert median_backtracks([ok, ok, bad]) == 3


def test_replicate_seeds_are_distinct_and_stable():
    seeds = [replicate_seed(7, r) for r in range(100)]
    assert len(set(seeds)) == 100
    assert seeds == [replicate_seed(7, r) for r in range(100)]


def test_corpus_spec_roundtrip():
    spec = CorpusSpec(((GenSpec(6, 3, 0.5, 0.3, 1), 4),), cap=1000, max_solutions=500, limit=3)
    assert CorpusSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(ValueError):
        CorpusSpec(((GenSpec(6, 3, 0.5, 0.3, 1), 0),))


def test_corpus_filters():
    spec = CorpusSpec(((GenSpec(7, 3, 0.6, 0.3, 2), 30),), cap=200, min_solutions=1, require_loopy=True)
    items, dropped = build_corpus(spec)
    assert items
    for it in items:
        assert 1 <= it.census.total <= 200
        assert not graph_info(it.instance).singly_connected
    reasons = {r for _, r in dropped}
    assert reasons <= {"oracle-truncated", "too-few-solutions", "too-many-solutions", "singly-connected"}
    assert len(items) + len(dropped) == 30


def test_corpus_round_robin_and_limit():
    spec = CorpusSpec(((GenSpec(5, 2, 0.5, 0.0, 1), 5), (GenSpec(5, 2, 0.5, 0.0, 2), 5)), cap=None, min_solutions=0, limit=4)
    items, _ = build_corpus(spec)
    assert [it.spec.seed for it in items] == [
        replicate_seed(1, 0), replicate_seed(2, 0), replicate_seed(1, 1), replicate_seed(2, 1)
    ]
    again, _ = build_corpus(spec)
    assert [it.ident for it in again] == [it.ident for it in items]


def test_tree_corpus_is_trees():
    spec = CorpusSpec(((GenSpec(8, 3, 1.0, 0.3, 5), 10),), trees=True)
    items, _ = build_corpus(spec)
    assert all(graph_info(it.instance).singly_connected for it in items)


def test_oracle_as_estimator_has_unit_correlation():
    spec = CorpusSpec(((GenSpec(7, 3, 0.6, 0.3, 3), 12),))
    study = run_accuracy_study(spec, ["oracle"])
    defined = [r.r for r in study.rows if r.r is not None]
    assert defined and all(r == pytest.approx(1.0) for r in defined)
    s = study.summary["oracle"]
    assert s.defined + s.excluded == s.problems and s.non_converged == 0


def test_pac_on_tree_corpus_is_exact():
    spec = CorpusSpec(((GenSpec(9, 3, 1.0, 0.3, 8), 15),), trees=True)
    study = run_accuracy_study(spec, ["pac"], PropagationConfig(epsilon=1e-20, max_iter=200))
    rows = [r for r in study.rows if r.r is not None]
    assert rows
    assert all(abs(r.r - 1.0) <= 1e-9 for r in rows)
    assert study.summary["pac"].non_converged == 0


def test_accuracy_study_requires_cap():
    with pytest.raises(ValueError):
        run_accuracy_study(CorpusSpec(((GenSpec(5, 2, 0.5, 0.3, 1), 1),), cap=None))


def test_accuracy_csv_layout():
    spec = CorpusSpec(((GenSpec(6, 3, 0.6, 0.3, 4), 4),))
    study = run_accuracy_study(spec, ["pac", "sst"])
    text = study.rows_csv(metadata_block("test", spec.to_dict()))
    body = csv_body(text)
    assert body.splitlines()[0] == "instance,method,r,status,iterations"
    assert all(not line.startswith("#") for line in body.splitlines())
    assert text.startswith("# probarc")
    assert study.summary_csv().splitlines()[0].startswith("method,mean_r")


def small_search_corpus(count=20):
    fams = tuple((GenSpec(10, 5, 1.0, p2, 40), 20) for p2 in (0.1, 0.15, 0.2))
    return CorpusSpec(fams, cap=None, limit=count)


def test_search_curves_monotone_and_bounded():
    study = run_search_study(small_search_corpus(), limits=SearchLimits(max_backtracks=20_000))
    for name, curve in study.curves.items():
        assert all(0.0 <= c <= 1.0 for c in curve)
        assert all(a <= b for a, b in zip(curve, curve[1:]))
        assert curve[-1] == pytest.approx(1.0)
    lines = study.curves_csv().splitlines()
    assert lines[0] == "budget,random,pac-static,pac-dynamic"
    assert lines[-1].startswith("median,")


def test_pac_static_curve_weakly_dominates_random_values():
    hs = [SearchHeuristic("random", "lex", "random", seed=1),
          SearchHeuristic("pac-static", "lex", "max-belief", belief="pac")]
    study = run_search_study(small_search_corpus(30), hs, SearchLimits(max_backtracks=20_000))
    for a, b in zip(study.curves["random"], study.curves["pac-static"]):
        assert b >= a


def test_peleg_budget_zero_column():
    hs = [SearchHeuristic("peleg", solver="peleg")]
    study = run_search_study(small_search_corpus(30), hs)
    zero = study.curves["peleg"][0]
    direct = sum(r.notes.get("decoded", False) for _, r in study.results) / len(study.results)
    assert zero >= direct
    assert zero > 0.25


def test_empty_corpus():
    empty = CorpusSpec((), cap=None)
    s = run_search_study(empty)
    assert s.results == [] and all(c == 0.0 for curve in s.curves.values() for c in curve)
    a = run_accuracy_study(CorpusSpec(()), ["pac"])
    assert a.rows == [] and a.summary["pac"].problems == 0


def test_heuristic_from_dict():
    h = SearchHeuristic.from_dict({"name": "d", "variable_rule": "max-belief", "value_rule": "max-belief",
                                   "belief": "pac", "mode": "dynamic"})
    assert h.dynamic and h.config().epsilon == 0.1 and h.config().max_iter == 50


def count_two_loop_graphs(n):
    """Connected graphs with n + 1 edges, checked with a plain union-find."""
    count = 0
    for es in itertools.combinations(itertools.combinations(range(n), 2), n + 1):
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                x = parent[x]
            return x

        for x, y in es:
            parent[find(x)] = find(y)
        count += len({find(v) for v in range(n)}) == 1
    return count


@pytest.mark.parametrize("n", [4, 5])
def test_two_loop_topologies(n):
    tops = two_loop_topologies(n)
    assert len(tops) == count_two_loop_graphs(n)
    assert len(two_loop_topologies(4)) == 6


def test_tree_scan_finds_nothing():
    report = find_oscillator(seeds=range(200), topology="tree")
    assert not report.found and report.scanned == 200


def test_trees_never_verify_as_oscillating():
    assert not verify_period_two(generate_tree(5, 3, 0.3, 1), 30)


def test_oscillator_scan_limits():
    with pytest.raises(ValueError):
        find_oscillator(n=7)
