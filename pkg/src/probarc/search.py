"""Chronological backtracking with pluggable variable and value ordering.

A backtrack is counted each time a level runs out of candidate values and
the assignment one level up is retracted. Exhausting the top level ends the
search as unsatisfiable without counting a backtrack.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .ac3 import DomainSet, ac3
from .baselines import EstimateReport, estimate
from .csp import CspInstance, condition
from .pac import Mode, PackedCsp, PropagationConfig, run_packed

VARIABLE_RULES = ("lex", "first-fail", "brelaz", "max-belief", "random")
VALUE_RULES = ("lex", "max-belief", "random")

DYNAMIC_DEFAULT = PropagationConfig(epsilon=0.1, max_iter=50)


@dataclass(frozen=True)
class StaticBeliefs:
    report: EstimateReport


@dataclass(frozen=True)
class DynamicBeliefs:
    method: str = "pac"
    config: PropagationConfig = DYNAMIC_DEFAULT


@dataclass(frozen=True)
class HeuristicSpec:
    variable_rule: str = "lex"
    value_rule: str = "lex"
    belief_source: StaticBeliefs | DynamicBeliefs | None = None
    seed: int = 0
    name: str | None = None
    order: tuple[int, ...] | None = None  # variable order used by the "lex" rule

    def __post_init__(self):
        if self.variable_rule not in VARIABLE_RULES:
            raise ValueError(f"unknown variable rule {self.variable_rule!r}")
        if self.value_rule not in VALUE_RULES:
            raise ValueError(f"unknown value rule {self.value_rule!r}")
        if "max-belief" in (self.variable_rule, self.value_rule) and self.belief_source is None:
            raise ValueError("max-belief ordering needs a belief source")

    @property
    def ident(self) -> str:
        if self.name:
            return self.name
        src = self.belief_source
        if isinstance(src, StaticBeliefs):
            tag = f"static-{src.report.method}"
        elif isinstance(src, DynamicBeliefs):
            tag = f"dynamic-{src.method}"
        else:
            tag = "none"
        return f"{self.variable_rule}/{self.value_rule}/{tag}"


@dataclass(frozen=True)
class SearchLimits:
    max_backtracks: int | None = None
    max_nodes: int | None = None


@dataclass
class SearchResult:
    outcome: str  # Solution | Unsatisfiable | LimitReached
    assignment: list[int] | None
    backtracks: int
    nodes: int
    propagation_rounds: int = 0
    heuristic: str = ""
    seed: int = 0
    notes: dict = field(default_factory=dict)

    @property
    def solved(self) -> bool:
        return self.outcome == "Solution"


class _State:
    def __init__(self, inst: CspInstance, live: list[np.ndarray]):
        self.inst = inst
        self.n = inst.n
        self.assign = [-1] * inst.n
        self.live = [list(np.flatnonzero(v)) for v in live]
        self.adj = [inst.adjacent(x) for x in range(inst.n)]
        self.mats = [{y: inst.matrix(x, y).tolist() for y in self.adj[x]} for x in range(inst.n)]

    def consistent(self, x: int, v: int) -> bool:
        assign = self.assign
        row = self.mats[x]
        for y in self.adj[x]:
            w = assign[y]
            if w >= 0 and not row[y][v][w]:
                return False
        return True

    def unassigned(self) -> list[int]:
        return [x for x in range(self.n) if self.assign[x] < 0]

    def remaining(self, x: int) -> int:
        return sum(1 for v in self.live[x] if self.consistent(x, v))


def first_fail_order(state: _State) -> int:
    """Unassigned variable with fewest values consistent with the assignment."""
    return min(state.unassigned(), key=lambda x: (state.remaining(x), x))


def brelaz_order(state: _State) -> int:
    """Most assigned neighbours, then most unassigned neighbours, then lowest index."""

    def key(x):
        sat = sum(1 for y in state.adj[x] if state.assign[y] >= 0)
        free = len(state.adj[x]) - sat
        return (-sat, -free, x)

    return min(state.unassigned(), key=key)


def max_belief_order(state: _State, beliefs: list[np.ndarray]) -> int:
    """Unassigned variable whose most probable value is most probable."""
    return min(state.unassigned(), key=lambda x: (-float(np.max(beliefs[x], initial=0.0)), x))


def value_order(values: list[int], beliefs: np.ndarray) -> list[int]:
    """Nonincreasing belief, ties by ascending value; zero beliefs end up last, not dropped."""
    return sorted(values, key=lambda v: (-float(beliefs[v]), v))


class _BeliefProvider:
    def __init__(self, inst: CspInstance, source):
        self.inst = inst
        self.source = source
        self.rounds = 0
        self.calls = 0
        self.statuses: dict[str, int] = {}
        self.packed = None
        if isinstance(source, DynamicBeliefs) and source.method in ("pac", "peleg"):
            self.packed = PackedCsp(inst)
            mode = Mode.PELEG if source.method == "peleg" else Mode.STANDARD
            self.cfg = replace(source.config, mode=mode)

    def beliefs(self, assign: list[int]) -> list[np.ndarray] | None:
        src = self.source
        if src is None:
            return None
        if isinstance(src, StaticBeliefs):
            return src.report.beliefs
        self.calls += 1
        partial = {x: v for x, v in enumerate(assign) if v >= 0}
        if self.packed is not None:
            res = run_packed(self.packed, self.cfg, unary=self.packed.masked_unary(partial))
            self.rounds += res.iterations
            self.statuses[res.status] = self.statuses.get(res.status, 0) + 1
            return res.beliefs
        report = estimate(condition(self.inst, partial), src.method, src.config)
        return report.beliefs


def solve(
    inst: CspInstance,
    h: HeuristicSpec | None = None,
    limits: SearchLimits | None = None,
    domains: DomainSet | None = None,
) -> SearchResult:
    """Depth-first search for one solution.

    ``domains`` restricts the candidate values (e.g. the output of AC-3);
    values outside it are never tried. Zero-belief values are only
    demoted.
    """
    h = h or HeuristicSpec()
    limits = limits or SearchLimits()
    live = domains.live if domains is not None else [u.copy() for u in inst.unary]
    state = _State(inst, live)
    rng = random.Random(h.seed)
    provider = _BeliefProvider(inst, h.belief_source)
    lex_order = list(h.order) if h.order is not None else list(range(inst.n))

    def select() -> tuple[int, list[int]] | None:
        if all(a >= 0 for a in state.assign):
            return None
        beliefs = provider.beliefs(state.assign) if h.belief_source is not None else None
        rule = h.variable_rule
        if rule == "lex":
            x = next(v for v in lex_order if state.assign[v] < 0)
        elif rule == "first-fail":
            x = first_fail_order(state)
        elif rule == "brelaz":
            x = brelaz_order(state)
        elif rule == "max-belief":
            x = max_belief_order(state, beliefs)
        else:
            x = rng.choice(state.unassigned())
        values = list(state.live[x])
        if h.value_rule == "max-belief":
            values = value_order(values, beliefs[x])
        elif h.value_rule == "random":
            rng.shuffle(values)
        return x, values

    def result(outcome, assignment=None) -> SearchResult:
        if outcome == "Solution" and not inst.is_solution(assignment):
            raise AssertionError("search produced an assignment that violates a constraint")
        return SearchResult(
            outcome, assignment, backtracks, nodes, provider.rounds, h.ident, h.seed,
            {"belief_calls": provider.calls, "propagation_statuses": dict(provider.statuses)},
        )

    nodes = backtracks = 0
    first = select()
    if first is None:
        return result("Solution", [])
    # each frame: [variable, candidate values, next index]
    stack = [[first[0], first[1], 0]]
    while stack:
        frame = stack[-1]
        x, values, k = frame
        if k >= len(values):
            state.assign[x] = -1
            stack.pop()
            if not stack:
                break
            state.assign[stack[-1][0]] = -1
            backtracks += 1
            if limits.max_backtracks is not None and backtracks > limits.max_backtracks:
                return result("LimitReached")
            continue
        frame[2] = k + 1
        v = int(values[k])
        nodes += 1
        if limits.max_nodes is not None and nodes > limits.max_nodes:
            return result("LimitReached")
        if not state.consistent(x, v):
            continue
        state.assign[x] = v
        nxt = select()
        if nxt is None:
            return result("Solution", list(state.assign))
        stack.append([nxt[0], nxt[1], 0])
    return result("Unsatisfiable")


def solve_with_ac3(inst: CspInstance, h: HeuristicSpec | None = None, limits: SearchLimits | None = None) -> SearchResult:
    """AC-3 preprocessing, then :func:`solve` over the reduced domains."""
    pre = ac3(inst)
    if not pre.consistent:
        res = SearchResult("Unsatisfiable", None, 0, 0, heuristic=(h or HeuristicSpec()).ident)
        res.notes["ac3"] = pre.status
        return res
    return solve(inst, h, limits, pre.domains)


def root_first_order(inst: CspInstance, root: int = 0) -> list[int]:
    """BFS order from ``root``: every variable after its tree parent."""
    from .csp import components

    order, seen = [], set()
    for start in [root] + [c[0] for c in components(inst)]:
        if start in seen:
            continue
        queue = [start]
        seen.add(start)
        while queue:
            v = queue.pop(0)
            order.append(v)
            for w in inst.adjacent(v):
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
    return order


PELEG_DEFAULT = PropagationConfig(epsilon=1e-12, max_iter=1000, mode=Mode.PELEG)


def decode_indicator(beliefs: list[np.ndarray], tol: float = 1e-6) -> list[int] | None:
    """Assignment if every belief vector is within ``tol`` of an indicator."""
    out = []
    for b in beliefs:
        if len(b) == 0:
            return None
        v = int(np.argmax(b))
        target = np.zeros_like(b)
        target[v] = 1.0
        if np.max(np.abs(b - target)) > tol:
            return None
        out.append(v)
    return out


def peleg_solve(
    inst: CspInstance,
    cfg: PropagationConfig = PELEG_DEFAULT,
    limits: SearchLimits | None = None,
) -> SearchResult:
    """Peleg relaxation, decoded directly when it settles on an indicator state.

    Otherwise falls back to :func:`solve` with lexicographic variables and
    the relaxation's beliefs as a static value order. A wipeout is only
    trusted once AC-3 confirms it.
    """
    from .pac import propagate

    cfg = replace(cfg, mode=Mode.PELEG)
    res = propagate(inst, cfg)
    ident = "peleg"
    if res.status == "Wipeout":
        pre = ac3(inst)
        if not pre.consistent:
            out = SearchResult("Unsatisfiable", None, 0, 0, res.iterations, ident)
            out.notes["decoded"] = False
            return out
        beliefs = [np.ones(m) for m in inst.domain_sizes]
    else:
        beliefs = res.beliefs
        decoded = decode_indicator(beliefs)
        if decoded is not None and inst.is_solution(decoded):
            out = SearchResult("Solution", decoded, 0, 0, res.iterations, ident)
            out.notes["decoded"] = True
            return out
    report = EstimateReport(beliefs, "peleg", {"status": res.label()})
    h = HeuristicSpec("lex", "max-belief", StaticBeliefs(report), name=ident)
    out = solve(inst, h, limits)
    out.propagation_rounds += res.iterations
    out.notes["decoded"] = False
    return out
