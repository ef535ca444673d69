"""AC-3 arc consistency over a separate domain overlay."""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .csp import CspInstance, NoSuchEdge


class DomainSet:
    """Per-variable boolean membership vectors."""

    def __init__(self, live: list[np.ndarray]):
        self.live = live

    @classmethod
    def full(cls, inst: CspInstance) -> "DomainSet":
        return cls([u.copy() for u in inst.unary])

    def copy(self) -> "DomainSet":
        return DomainSet([v.copy() for v in self.live])

    def values(self, x: int) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.live[x])]

    def size(self, x: int) -> int:
        return int(self.live[x].sum())

    def __eq__(self, other) -> bool:
        if not isinstance(other, DomainSet) or len(self.live) != len(other.live):
            return NotImplemented
        return all(np.array_equal(a, b) for a, b in zip(self.live, other.live))

    def __repr__(self) -> str:
        return f"DomainSet({[self.values(x) for x in range(len(self.live))]})"


@dataclass(frozen=True)
class Ac3Result:
    domains: DomainSet
    consistent: bool
    wipeout_var: int | None = None
    revisions: int = 0
    removals: int = 0

    @property
    def status(self) -> str:
        return "Consistent" if self.consistent else f"Wipeout({self.wipeout_var})"


def revise(inst: CspInstance, doms: DomainSet, i: int, j: int) -> tuple[DomainSet, bool]:
    """Drop values of ``i`` with no live supporter in ``j``. Mutates and returns ``doms``."""
    if not inst.has_edge(i, j):
        raise NoSuchEdge(f"no constraint between {i} and {j}")
    supported = (inst.matrix(i, j) & doms.live[j][None, :]).any(axis=1)
    before = doms.live[i]
    after = before & supported
    changed = bool((before != after).any())
    if changed:
        doms.live[i] = after
    return doms, changed


def _fifo(queue: deque):
    return queue.popleft()


def _lifo(queue: deque):
    return queue.pop()


def random_pick(seed: int) -> Callable[[deque], tuple[int, int]]:
    rng = random.Random(seed)

    def pick(queue: deque):
        k = rng.randrange(len(queue))
        queue.rotate(-k)
        arc = queue.popleft()
        queue.rotate(k)
        return arc

    return pick


QUEUE_DISCIPLINES = {"fifo": _fifo, "lifo": _lifo}


def ac3(inst: CspInstance, doms: DomainSet | None = None, pick=_fifo) -> Ac3Result:
    """Propagate to the arc-consistent fixpoint or the first wipeout.

    ``pick`` removes and returns one arc from the work queue; FIFO by
    default. The queue behaves as a set: an arc already waiting is not
    enqueued twice.
    """
    doms = DomainSet.full(inst) if doms is None else doms.copy()
    for x in range(inst.n):
        if not doms.live[x].any():
            return Ac3Result(doms, False, x)

    queue: deque = deque()
    for x, y in inst.edges:
        queue.append((x, y))
        queue.append((y, x))
    pending = set(queue)
    revisions = removals = 0
    while queue:
        k, m = pick(queue)
        pending.discard((k, m))
        before = doms.size(k)
        _, changed = revise(inst, doms, k, m)
        revisions += 1
        if not changed:
            continue
        removals += before - doms.size(k)
        if not doms.live[k].any():
            return Ac3Result(doms, False, k, revisions, removals)
        for i in inst.adjacent(k):
            if i != m and (i, k) not in pending:
                pending.add((i, k))
                queue.append((i, k))
    return Ac3Result(doms, True, None, revisions, removals)
