"""Exhaustive solution enumeration: the ground truth every estimator is checked against."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .csp import CspInstance


class TruncatedCensus(ValueError):
    pass


@dataclass(frozen=True)
class SolutionCensus:
    total: int
    usage: list[list[int]]
    truncated: bool = False

    def frequencies(self) -> list[np.ndarray]:
        return frequencies(self)


def _dense(inst: CspInstance):
    n, mmax = inst.n, max(inst.max_domain, 1)
    sizes = np.array(inst.domain_sizes, dtype=np.int64)
    unary = np.zeros((n, mmax), dtype=np.bool_)
    for x in range(n):
        unary[x, : sizes[x]] = inst.unary[x]
    compat = np.zeros((n, n, mmax, mmax), dtype=np.bool_)
    has_edge = np.zeros((n, n), dtype=np.bool_)
    for (x, y), mat in zip(inst.edges, inst.matrices):
        compat[x, y, : mat.shape[0], : mat.shape[1]] = mat
        compat[y, x, : mat.shape[1], : mat.shape[0]] = mat.T
        has_edge[x, y] = has_edge[y, x] = True
    return sizes, unary, compat, has_edge


def enumerate_solutions(inst: CspInstance, cap: int | None = None) -> SolutionCensus:
    """Count every solution and per-value usage by plain depth-first search.

    Variables are assigned in ascending index order; each new value is
    checked only against already-assigned neighbours. With ``cap`` set the
    search stops as soon as the count exceeds it.
    """
    total, usage, truncated, _ = K.enumerate_kernel(*_dense(inst), -1 if cap is None else int(cap), False)
    usage_lists = [[int(c) for c in usage[x, :m]] for x, m in enumerate(inst.domain_sizes)]
    return SolutionCensus(int(total), usage_lists, bool(truncated))


def first_solution(inst: CspInstance) -> list[int] | None:
    total, _, _, first = K.enumerate_kernel(*_dense(inst), -1, True)
    return [int(v) for v in first] if total else None


def is_satisfiable(inst: CspInstance) -> bool:
    return first_solution(inst) is not None


def frequencies(census: SolutionCensus) -> list[np.ndarray]:
    """Per-variable relative usage; all-zero vectors when unsatisfiable."""
    if census.truncated:
        raise TruncatedCensus("census hit its cap; frequencies would be biased")
    if census.total == 0:
        return [np.zeros(len(u)) for u in census.usage]
    return [np.array([c / census.total for c in u]) for u in census.usage]


def brute_force(inst: CspInstance) -> SolutionCensus:
    """Check every point of the assignment space. Tiny instances only."""
    import itertools

    usage = [[0] * m for m in inst.domain_sizes]
    total = 0
    for a in itertools.product(*(range(m) for m in inst.domain_sizes)):
        if inst.is_solution(a):
            total += 1
            for x, v in enumerate(a):
                usage[x][v] += 1
    return SolutionCensus(total, usage)
