"""Binary CSP data model, constraint-graph analysis and the textual instance format."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np


class CspError(ValueError):
    """Base class for malformed instances and bad references into them."""


class DuplicateEdge(CspError):
    pass


class SelfLoop(CspError):
    pass


class IndexOutOfRange(CspError, IndexError):
    pass


class NoSuchEdge(CspError, KeyError):
    pass


class FormatError(CspError):
    pass


@dataclass(frozen=True)
class GraphInfo:
    connected: bool
    singly_connected: bool
    diameter: int
    component_count: int


@dataclass(frozen=True, eq=False)
class CspInstance:
    """An immutable binary CSP.

    Values are index sets ``0..m-1``. Each undirected edge ``(x, y)`` with
    ``x < y`` stores one boolean matrix of shape ``(|D_x|, |D_y|)``; the
    ``y -> x`` direction is its transpose and is never stored separately.

    ``unary`` holds the per-variable live-value mask. It is all-true for
    freshly built instances and is narrowed by :func:`condition`.
    """

    domain_sizes: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    matrices: tuple[np.ndarray, ...]
    unary: tuple[np.ndarray, ...]
    names: tuple[str, ...] | None = None
    _edge_index: dict = field(default=None, repr=False, compare=False)
    _adjacency: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        index = {e: k for k, e in enumerate(self.edges)}
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for x, y in self.edges:
            adj[x].append(y)
            adj[y].append(x)
        object.__setattr__(self, "_edge_index", index)
        object.__setattr__(self, "_adjacency", tuple(tuple(sorted(a)) for a in adj))
        for mat in self.matrices:
            mat.setflags(write=False)
        for u in self.unary:
            u.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.domain_sizes)

    @property
    def max_domain(self) -> int:
        return max(self.domain_sizes, default=0)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def assignment_space(self) -> int:
        """Number of total assignments, ``prod |D_X|`` (arbitrary precision)."""
        total = 1
        for m in self.domain_sizes:
            total *= m
        return total

    def adjacent(self, x: int) -> tuple[int, ...]:
        self._check_var(x)
        return self._adjacency[x]

    def has_edge(self, x: int, y: int) -> bool:
        return (min(x, y), max(x, y)) in self._edge_index

    def matrix(self, x: int, y: int) -> np.ndarray:
        """Allow matrix oriented ``x``-rows by ``y``-columns."""
        self._check_var(x)
        self._check_var(y)
        key = (min(x, y), max(x, y))
        k = self._edge_index.get(key)
        if k is None:
            raise NoSuchEdge(f"no constraint between {x} and {y}")
        mat = self.matrices[k]
        return mat if x < y else mat.T

    def _check_var(self, x: int) -> None:
        if not 0 <= x < self.n:
            raise IndexOutOfRange(f"variable {x} not in [0, {self.n})")

    def is_solution(self, assignment: Sequence[int]) -> bool:
        if len(assignment) != self.n:
            return False
        for x, v in enumerate(assignment):
            if not 0 <= v < self.domain_sizes[x] or not self.unary[x][v]:
                return False
        for (x, y), mat in zip(self.edges, self.matrices):
            if not mat[assignment[x], assignment[y]]:
                return False
        return True

    def tightness(self, x: int, y: int) -> float:
        mat = self.matrix(x, y)
        return 1.0 - float(mat.sum()) / mat.size


def _as_matrix(spec, mx: int, my: int) -> np.ndarray:
    if isinstance(spec, np.ndarray):
        mat = np.asarray(spec)
        if mat.shape != (mx, my):
            raise IndexOutOfRange(f"matrix shape {mat.shape} != {(mx, my)}")
        if not np.all((mat == 0) | (mat == 1)):
            raise CspError("allow matrix entries must be 0 or 1")
        return mat.astype(bool)
    mat = np.zeros((mx, my), dtype=bool)
    for i, j in spec:
        if not (0 <= i < mx and 0 <= j < my):
            raise IndexOutOfRange(f"pair ({i}, {j}) outside {mx}x{my} domain")
        mat[i, j] = True
    return mat


def build_instance(
    n: int,
    domain_sizes: int | Sequence[int],
    constraints: Iterable[tuple] = (),
    names: Sequence[str] | None = None,
) -> CspInstance:
    """Validate and assemble a :class:`CspInstance`.

    ``constraints`` holds ``(x, y, pairs_or_matrix)`` triples where the
    third element is either an iterable of allowed ``(i, j)`` pairs or a
    0/1 array of shape ``(|D_x|, |D_y|)``.
    """
    if isinstance(domain_sizes, (int, np.integer)):
        sizes = (int(domain_sizes),) * n
    else:
        sizes = tuple(int(m) for m in domain_sizes)
    if len(sizes) != n:
        raise CspError(f"expected {n} domain sizes, got {len(sizes)}")
    if any(m < 1 for m in sizes):
        raise CspError("domain sizes must be positive")
    if names is not None and len(names) != n:
        raise CspError("names must have one entry per variable")

    collected: dict[tuple[int, int], np.ndarray] = {}
    for x, y, spec in constraints:
        x, y = int(x), int(y)
        if not (0 <= x < n and 0 <= y < n):
            raise IndexOutOfRange(f"edge ({x}, {y}) references a variable outside [0, {n})")
        if x == y:
            raise SelfLoop(f"self-constraint on variable {x}")
        key = (min(x, y), max(x, y))
        if key in collected:
            raise DuplicateEdge(f"duplicate constraint on pair {key}")
        mat = _as_matrix(spec, sizes[x], sizes[y])
        collected[key] = mat if x < y else np.ascontiguousarray(mat.T)

    edges = tuple(sorted(collected))
    return CspInstance(
        domain_sizes=sizes,
        edges=edges,
        matrices=tuple(collected[e] for e in edges),
        unary=tuple(np.ones(m, dtype=bool) for m in sizes),
        names=tuple(names) if names is not None else None,
    )


def neighbors(inst: CspInstance, x: int) -> list[tuple[int, np.ndarray]]:
    """Neighbours of ``x`` in ascending order with their ``x``-row-major matrices."""
    return [(y, inst.matrix(x, y)) for y in inst.adjacent(x)]


def condition(inst: CspInstance, assignments: Mapping[int, int]) -> CspInstance:
    """Restrict assigned variables to a single value.

    Matrix rows/columns of the removed values are zeroed and the unary
    mask narrowed, so every vector keeps its original length.
    """
    if not assignments:
        return inst
    unary = [u.copy() for u in inst.unary]
    for x, v in assignments.items():
        inst._check_var(x)
        if not 0 <= v < inst.domain_sizes[x]:
            raise IndexOutOfRange(f"value {v} outside domain of variable {x}")
        keep = np.zeros(inst.domain_sizes[x], dtype=bool)
        keep[v] = True
        unary[x] &= keep
    matrices = []
    for (x, y), mat in zip(inst.edges, inst.matrices):
        matrices.append(mat & unary[x][:, None] & unary[y][None, :])
    return CspInstance(
        domain_sizes=inst.domain_sizes,
        edges=inst.edges,
        matrices=tuple(matrices),
        unary=tuple(unary),
        names=inst.names,
    )


def relabel(inst: CspInstance, perm: Sequence[int]) -> CspInstance:
    """Rename variable ``x`` to ``perm[x]``."""
    n = inst.n
    if sorted(perm) != list(range(n)):
        raise CspError("perm must be a permutation of the variables")
    sizes = [0] * n
    unary = [None] * n
    for x in range(n):
        sizes[perm[x]] = inst.domain_sizes[x]
        unary[perm[x]] = inst.unary[x]
    cons = [(perm[x], perm[y], mat) for (x, y), mat in zip(inst.edges, inst.matrices)]
    out = build_instance(n, sizes, cons)
    return CspInstance(out.domain_sizes, out.edges, out.matrices, tuple(u.copy() for u in unary))


def components(inst: CspInstance) -> list[list[int]]:
    seen = [False] * inst.n
    comps = []
    for s in range(inst.n):
        if seen[s]:
            continue
        seen[s] = True
        comp, queue = [], deque([s])
        while queue:
            v = queue.popleft()
            comp.append(v)
            for w in inst.adjacent(v):
                if not seen[w]:
                    seen[w] = True
                    queue.append(w)
        comps.append(sorted(comp))
    return comps


def bfs_distances(inst: CspInstance, source: int) -> list[int]:
    """Edge distances from ``source``; ``-1`` marks unreachable variables."""
    dist = [-1] * inst.n
    dist[source] = 0
    queue = deque([source])
    while queue:
        v = queue.popleft()
        for w in inst.adjacent(v):
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist


def graph_info(inst: CspInstance) -> GraphInfo:
    comps = components(inst)
    acyclic = inst.edge_count == inst.n - len(comps)
    diameter = 0
    for s in range(inst.n):
        diameter = max(diameter, max(bfs_distances(inst, s)))
    return GraphInfo(
        connected=len(comps) <= 1,
        singly_connected=len(comps) <= 1 and acyclic,
        diameter=diameter,
        component_count=len(comps),
    )


def is_forest(inst: CspInstance) -> bool:
    return inst.edge_count == inst.n - len(components(inst))


# -- textual format -----------------------------------------------------------


def dumps(inst: CspInstance, header: Sequence[str] = ()) -> str:
    """Serialise to the line-based ``csp``/``con`` format.

    Unary restrictions are not representable in the format; conditioned
    instances are written with their masked matrices only.
    """
    lines = [f"# {h}" for h in header]
    sizes = inst.domain_sizes
    if sizes and all(m == sizes[0] for m in sizes):
        lines.append(f"csp {inst.n} * {sizes[0]}")
    else:
        lines.append("csp " + " ".join(str(v) for v in (inst.n, *sizes)))
    for (x, y), mat in zip(inst.edges, inst.matrices):
        pairs = np.argwhere(mat)
        lines.append(f"con {x} {y} {len(pairs)}")
        lines.extend(f"{i} {j}" for i, j in pairs)
    return "\n".join(lines) + "\n"


def loads(text: str) -> CspInstance:
    tokens: list[tuple[int, list[str]]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            tokens.append((lineno, line.split()))
    if not tokens:
        raise FormatError("empty instance text")

    lineno, head = tokens[0]
    if head[0] != "csp":
        raise FormatError(f"line {lineno}: expected 'csp' header, got {head[0]!r}")
    try:
        n = int(head[1])
        if len(head) == 4 and head[2] == "*":
            sizes: list[int] = [int(head[3])] * n
        else:
            sizes = [int(t) for t in head[2:]]
    except (IndexError, ValueError) as exc:
        raise FormatError(f"line {lineno}: malformed header") from exc
    if n < 0 or len(sizes) != n:
        raise FormatError(f"line {lineno}: header lists {len(sizes)} domain sizes for {n} variables")

    constraints = []
    pos = 1
    while pos < len(tokens):
        lineno, words = tokens[pos]
        if words[0] != "con":
            raise FormatError(f"line {lineno}: unknown directive {words[0]!r}")
        try:
            x, y, k = (int(w) for w in words[1:4])
            if len(words) != 4 or k < 0:
                raise ValueError
        except ValueError as exc:
            raise FormatError(f"line {lineno}: malformed 'con' line") from exc
        pairs = []
        for t in range(k):
            if pos + 1 + t >= len(tokens):
                raise FormatError(f"line {lineno}: constraint announces {k} pairs, file ends early")
            pl, pw = tokens[pos + 1 + t]
            if len(pw) != 2:
                raise FormatError(f"line {pl}: expected '<i> <j>'")
            try:
                pairs.append((int(pw[0]), int(pw[1])))
            except ValueError as exc:
                raise FormatError(f"line {pl}: non-integer pair") from exc
        constraints.append((x, y, pairs))
        pos += 1 + k
    return build_instance(n, sizes, constraints)


def load(path) -> CspInstance:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def dump(inst: CspInstance, path, header: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(inst, header))
