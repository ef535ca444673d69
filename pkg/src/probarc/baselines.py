"""Rival solution-probability estimators: single spanning tree counting (SST),
universal propagation to a sink (UP) and products over multiple spanning
trees (MST).

Counts are exact Python integers; probability vectors are float64.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .csp import CspError, CspInstance, bfs_distances


class InvalidTree(CspError):
    pass


class InvalidOrdering(CspError):
    pass


class EdgeNotCovered(CspError):
    pass


@dataclass(frozen=True)
class SpanningTree:
    """An acyclic subset of an instance's constraint edges over all its variables."""

    n: int
    edges: tuple[tuple[int, int], ...]

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for x, y in self.edges:
            adj[x].append(y)
            adj[y].append(x)
        return [sorted(a) for a in adj]

    def rooted(self, root: int) -> tuple[list[int], list[int]]:
        """``(parent, order)`` for the component of ``root``; parent[root] = -1."""
        adj = self.adjacency()
        parent = [-2] * self.n
        parent[root] = -1
        order, queue = [], deque([root])
        while queue:
            v = queue.popleft()
            order.append(v)
            for w in adj[v]:
                if parent[w] == -2:
                    parent[w] = v
                    queue.append(w)
        return parent, order

    def components(self) -> list[list[int]]:
        seen = [False] * self.n
        comps = []
        for s in range(self.n):
            if not seen[s]:
                _, order = self.rooted(s)
                for v in order:
                    seen[v] = True
                comps.append(sorted(order))
        return comps


@dataclass
class EstimateReport:
    beliefs: list[np.ndarray]
    method: str
    metadata: dict = field(default_factory=dict)


class _DisjointSet:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, x: int, y: int) -> bool:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return False
        self.parent[ry] = rx
        return True


def validate_tree(inst: CspInstance, tree: SpanningTree) -> None:
    if tree.n != inst.n:
        raise InvalidTree(f"tree spans {tree.n} variables, instance has {inst.n}")
    ds = _DisjointSet(inst.n)
    for x, y in tree.edges:
        if not inst.has_edge(x, y):
            raise InvalidTree(f"edge ({x}, {y}) is not a constraint of the instance")
        if not ds.union(x, y):
            raise InvalidTree(f"edge ({x}, {y}) closes a cycle")


def _int_matrix(inst: CspInstance, x: int, y: int) -> np.ndarray:
    return inst.matrix(x, y).astype(object)


def _leaf_counts(inst: CspInstance, x: int) -> np.ndarray:
    return inst.unary[x].astype(int).astype(object)


def subtree_counts(inst: CspInstance, tree: SpanningTree, root: int) -> np.ndarray:
    """Per-value solution counts of ``root``'s tree component.

    Bottom-up over the rooted tree: leaves count 1 per live value, an inner
    node multiplies, over its children, the summed counts of the child
    values compatible with it.
    """
    parent, order = tree.rooted(root)
    counts: dict[int, np.ndarray] = {}
    for v in reversed(order):
        c = _leaf_counts(inst, v)
        for w in tree.adjacency()[v]:
            if parent[w] == v:
                c = c * _int_matrix(inst, v, w).dot(counts[w])
        counts[v] = c
    return counts[root]


def sst_counts(inst: CspInstance, tree: SpanningTree, roots: Sequence[int] | None = None) -> dict[int, list[int]]:
    """Solution counts per value of each root, consulting only tree edges.

    The recursion is re-run with every requested root (all variables by
    default). Counts are global: a root's component counts are multiplied
    by the solution totals of the other components of the forest.
    """
    validate_tree(inst, tree)
    comps = tree.components()
    comp_of = {v: k for k, comp in enumerate(comps) for v in comp}
    comp_total = [int(sum(subtree_counts(inst, tree, comp[0]))) for comp in comps]
    out = {}
    for r in range(inst.n) if roots is None else roots:
        others = 1
        for k, t in enumerate(comp_total):
            if k != comp_of[r]:
                others *= t
        out[r] = [int(c) * others for c in subtree_counts(inst, tree, r)]
    return out


def _normalise_counts(counts: Sequence[int]) -> np.ndarray:
    total = sum(counts)
    if total == 0:
        return np.zeros(len(counts))
    return np.array([c / total for c in counts])


def _normalise(vec: np.ndarray) -> np.ndarray:
    total = vec.sum()
    return vec / total if total > 0 else np.zeros_like(vec)


def sst_estimate(inst: CspInstance, tree: SpanningTree | None = None) -> EstimateReport:
    tree = tree or build_spanning_forest(inst, "max-tightness")[0]
    counts = sst_counts(inst, tree)
    beliefs = [_normalise_counts(counts[x]) for x in range(inst.n)]
    return EstimateReport(beliefs, "sst", {"tree": list(tree.edges)})


def ordering_toward(inst: CspInstance, sink: int) -> list[int]:
    """Variables by decreasing graph distance from ``sink``, sink last.

    Directing each constraint from the farther variable to the nearer one
    makes every tree edge point at the sink, which is the orientation under
    which UP is exact on trees. Unreachable variables come first.
    """
    dist = bfs_distances(inst, sink)
    far = max(dist) + 1
    return sorted(range(inst.n), key=lambda v: (-(dist[v] if dist[v] >= 0 else far), v))


def up_estimate(inst: CspInstance, ordering: Sequence[int], sink: int) -> np.ndarray:
    """Solution probability vector of ``sink`` by universal propagation.

    Constraints are directed from earlier to later variables of
    ``ordering``. Each variable's distribution is the normalised product,
    over its parents, of the allow matrix applied to the parent's
    distribution; sources are uniform over their live values.
    """
    ordering = [int(v) for v in ordering]
    if sorted(ordering) != list(range(inst.n)):
        raise InvalidOrdering("ordering must be a permutation of the variables")
    if not ordering or ordering[-1] != sink:
        raise InvalidOrdering("sink must be the last variable of the ordering")
    pos = {v: k for k, v in enumerate(ordering)}
    dist: dict[int, np.ndarray] = {}
    for v in ordering:
        p = inst.unary[v].astype(np.float64)
        for c in inst.adjacent(v):
            if pos[c] < pos[v]:
                p = p * (inst.matrix(v, c).astype(np.float64) @ dist[c])
        dist[v] = _normalise(p)
    return dist[sink]


def up_report(inst: CspInstance) -> EstimateReport:
    """UP run once per variable, each time as sink of :func:`ordering_toward`."""
    beliefs = [up_estimate(inst, ordering_toward(inst, s), s) for s in range(inst.n)]
    return EstimateReport(beliefs, "up", {"ordering": "toward-sink"})


def mst_estimate(inst: CspInstance, forest: Sequence[SpanningTree]) -> EstimateReport:
    """Normalised product of per-tree SST distributions."""
    covered = {e for tree in forest for e in tree.edges}
    missing = [e for e in inst.edges if e not in covered]
    if missing:
        raise EdgeNotCovered(f"edges not in any tree: {missing}")
    if not forest:
        forest = [SpanningTree(inst.n, ())]
    beliefs = [np.ones(m) for m in inst.domain_sizes]
    for tree in forest:
        counts = sst_counts(inst, tree)
        for x in range(inst.n):
            beliefs[x] = beliefs[x] * _normalise_counts(counts[x])
    beliefs = [_normalise(b) for b in beliefs]
    return EstimateReport(beliefs, "mst", {"trees": [list(t.edges) for t in forest]})


def _path_in_forest(adj: list[set[int]], a: int, b: int) -> list[tuple[int, int]] | None:
    """Edges on the unique ``a``-``b`` path of a forest, or ``None``."""
    prev = {a: None}
    queue = deque([a])
    while queue:
        v = queue.popleft()
        if v == b:
            break
        for w in sorted(adj[v]):
            if w not in prev:
                prev[w] = v
                queue.append(w)
    if b not in prev:
        return None
    path = []
    v = b
    while prev[v] is not None:
        u = prev[v]
        path.append((min(u, v), max(u, v)))
        v = u
    return path


def _partition_forests(n: int, edges: Sequence[tuple[int, int]]) -> list[list[tuple[int, int]]]:
    """Partition edges into the fewest forests (matroid partition, BFS augmenting)."""
    forests: list[set[tuple[int, int]]] = []
    adjs: list[list[set[int]]] = []

    def add(k, e):
        forests[k].add(e)
        adjs[k][e[0]].add(e[1])
        adjs[k][e[1]].add(e[0])

    def remove(k, e):
        forests[k].discard(e)
        adjs[k][e[0]].discard(e[1])
        adjs[k][e[1]].discard(e[0])

    for e in edges:
        # label[f] = (previous edge, forest index f is displaced from)
        label: dict[tuple[int, int], tuple | None] = {e: None}
        queue = deque([e])
        done = False
        while queue and not done:
            f = queue.popleft()
            for k in range(len(forests)):
                if f in forests[k]:
                    continue
                path = _path_in_forest(adjs[k], *f)
                if path is None:
                    # augment: f enters forest k, each predecessor moves into
                    # the forest its successor vacated
                    target, cur = k, f
                    while cur is not None:
                        back = label[cur]
                        if back is not None:
                            remove(back[1], cur)
                        add(target, cur)
                        if back is None:
                            break
                        target = back[1]
                        cur = back[0]
                    done = True
                    break
                for g in path:
                    if g not in label:
                        label[g] = (f, k)
                        queue.append(g)
        if not done:
            forests.append(set())
            adjs.append([set() for _ in range(n)])
            add(len(forests) - 1, e)
    return [sorted(f) for f in forests]


def build_spanning_forest(inst: CspInstance, strategy: str = "max-tightness", seed: int = 0) -> list[SpanningTree]:
    """Trees for SST (``max-tightness``) or an edge cover for MST (``edge-partition``).

    ``max-tightness`` is a maximum spanning forest under the fraction of
    disallowed pairs, ties broken towards lower ``(x, y)``.
    ``edge-partition`` splits all edges into the minimum number of forests.
    Both are deterministic; ``seed`` is accepted for interface symmetry.
    """
    if strategy in ("max-tightness", "maxtightness", "MaxTightness"):
        order = sorted(inst.edges, key=lambda e: (-inst.tightness(*e), e))
        ds = _DisjointSet(inst.n)
        chosen = tuple(sorted(e for e in order if ds.union(*e)))
        return [SpanningTree(inst.n, chosen)]
    if strategy in ("edge-partition", "edgepartition", "EdgePartition"):
        parts = _partition_forests(inst.n, list(inst.edges))
        if not parts:
            return [SpanningTree(inst.n, ())]
        return [SpanningTree(inst.n, tuple(p)) for p in parts]
    raise ValueError(f"unknown forest strategy {strategy!r}")


METHODS = ("pac", "peleg", "sst", "up", "mst")


def estimate(inst: CspInstance, method: str, cfg=None, forest_strategy: str | None = None) -> EstimateReport:
    """Per-variable probability vectors from any supported estimator.

    ``cfg`` is the :class:`~probarc.pac.PropagationConfig` for ``pac`` and
    ``peleg`` (its mode is overridden accordingly).
    """
    from dataclasses import replace

    from .pac import Mode, PropagationConfig, propagate

    if method in ("pac", "peleg"):
        cfg = cfg or PropagationConfig()
        cfg = replace(cfg, mode=Mode.PELEG if method == "peleg" else Mode.STANDARD)
        res = propagate(inst, cfg)
        return EstimateReport(res.beliefs, method, {"status": res.label(), "iterations": res.iterations})
    if method == "sst":
        return sst_estimate(inst, build_spanning_forest(inst, forest_strategy or "max-tightness")[0])
    if method == "up":
        return up_report(inst)
    if method == "mst":
        return mst_estimate(inst, build_spanning_forest(inst, forest_strategy or "edge-partition"))
    raise ValueError(f"unknown estimation method {method!r}")
