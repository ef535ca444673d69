"""Seeded random binary CSPs over the (n, m, p1, p2) model.

Every edge draws from its own PCG64 stream keyed by ``(seed, x, y)`` through
``numpy.random.SeedSequence``, so adding or dropping one edge never shifts
the random numbers any other edge sees. Both the SeedSequence hash and the
PCG64 stream are covered by numpy's stream-compatibility policy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .csp import CspInstance, build_instance

_TREE_STREAM = 0x7472_6565  # "tree"
_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class GenSpec:
    n: int
    m: int
    p1: float
    p2: float
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be at least 1")
        if not (0.0 <= self.p1 <= 1.0 and 0.0 <= self.p2 <= 1.0):
            raise ValueError("p1 and p2 must lie in [0, 1]")


def _stream(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([k & _SEED_MASK for k in key])))


def _allow_matrix(rng: np.random.Generator, m: int, p2: float) -> np.ndarray:
    # a value pair is disallowed with probability p2
    return rng.random((m, m)) >= p2


def generate(spec: GenSpec) -> CspInstance:
    cons = []
    for x in range(spec.n):
        for y in range(x + 1, spec.n):
            rng = _stream(spec.seed, x, y)
            if rng.random() < spec.p1:
                cons.append((x, y, _allow_matrix(rng, spec.m, spec.p2)))
    return build_instance(spec.n, spec.m, cons)


def prufer_edges(seq: list[int], n: int) -> list[tuple[int, int]]:
    """Decode a Prüfer sequence of length ``n - 2`` into tree edges."""
    degree = [1] * n
    for v in seq:
        degree[v] += 1
    edges = []
    for v in seq:
        leaf = next(u for u in range(n) if degree[u] == 1)
        edges.append((min(leaf, v), max(leaf, v)))
        degree[leaf] -= 1
        degree[v] -= 1
    u, w = (u for u in range(n) if degree[u] == 1)
    edges.append((u, w))
    return edges


def generate_tree(n: int, m: int, p2: float, seed: int) -> CspInstance:
    """Uniformly random labelled tree with p2-filled allow matrices."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if n == 1:
        return build_instance(1, m, [])
    if n == 2:
        edges = [(0, 1)]
    else:
        rng = _stream(seed, _TREE_STREAM, n)
        edges = prufer_edges([int(v) for v in rng.integers(0, n, size=n - 2)], n)
    cons = [(x, y, _allow_matrix(_stream(seed, x, y), m, p2)) for x, y in edges]
    return build_instance(n, m, cons)
