"""Experiment driver: corpora, estimator accuracy, search cost, oscillation discovery.

All randomness is derived from explicit seeds. Study outputs are CSV text
with a ``#``-comment metadata block; only the ``# created:`` line varies
between identical runs.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .baselines import EstimateReport, estimate
from .csp import CspInstance, build_instance, graph_info
from .generator import GenSpec, generate, generate_tree
from .oracle import enumerate_solutions, frequencies, is_satisfiable
from .pac import BeliefState, Mode, PropagationConfig, pac_round, propagate, residual
from .search import (
    DynamicBeliefs,
    HeuristicSpec,
    SearchLimits,
    SearchResult,
    StaticBeliefs,
    peleg_solve,
    solve,
)

log = logging.getLogger(__name__)


class DegenerateVariance(ValueError):
    pass


class OracleTruncated(RuntimeError):
    pass


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("pearson needs two equal-length vectors of length >= 2")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateVariance("constant input vector")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


# -- corpora -------------------------------------------------------------------


@dataclass(frozen=True)
class CorpusSpec:
    """Generator families, each replicated with derived seeds, plus admission filters.

    Candidates are produced round-robin (replicate 0 of every family, then
    replicate 1, ...) and admitted until ``limit`` instances pass.
    """

    families: tuple[tuple[GenSpec, int], ...]
    cap: int | None = 10**6
    min_solutions: int = 1
    max_solutions: int | None = None
    require_loopy: bool = False
    trees: bool = False
    limit: int | None = None

    def __post_init__(self):
        for _, reps in self.families:
            if reps < 1:
                raise ValueError("replicate count must be at least 1")

    @classmethod
    def from_dict(cls, d: dict) -> "CorpusSpec":
        fams = []
        for f in d.get("families", []):
            f = dict(f)
            reps = int(f.pop("replicates", 1))
            fams.append((GenSpec(int(f["n"]), int(f["m"]), float(f.get("p1", 1.0)), float(f["p2"]), int(f.get("seed", 0))), reps))
        return cls(
            families=tuple(fams),
            cap=d.get("cap", 10**6),
            min_solutions=int(d.get("min_solutions", 1)),
            max_solutions=d.get("max_solutions"),
            require_loopy=bool(d.get("require_loopy", False)),
            trees=bool(d.get("trees", False)),
            limit=d.get("limit"),
        )

    def to_dict(self) -> dict:
        return {
            "families": [dict(asdict(g), replicates=r) for g, r in self.families],
            "cap": self.cap,
            "min_solutions": self.min_solutions,
            "max_solutions": self.max_solutions,
            "require_loopy": self.require_loopy,
            "trees": self.trees,
            "limit": self.limit,
        }


def replicate_seed(base: int, replicate: int) -> int:
    return int(np.random.SeedSequence([base & (2**64 - 1), replicate]).generate_state(1, np.uint64)[0] >> 1)


@dataclass
class CorpusItem:
    ident: str
    spec: GenSpec
    instance: CspInstance
    census: object | None = None


def instance_id(g: GenSpec, tree: bool = False) -> str:
    kind = "tree" if tree else "rand"
    return f"{kind}-n{g.n}-m{g.m}-p1_{g.p1:g}-p2_{g.p2:g}-s{g.seed}"


def build_corpus(spec: CorpusSpec) -> tuple[list[CorpusItem], list[tuple[str, str]]]:
    """Generate and filter a corpus; returns admitted items and ``(id, reason)`` drops."""
    items, dropped = [], []
    most = max((r for _, r in spec.families), default=0)
    for rep in range(most):
        for template, reps in spec.families:
            if rep >= reps:
                continue
            if spec.limit is not None and len(items) >= spec.limit:
                return items, dropped
            g = replace(template, seed=replicate_seed(template.seed, rep))
            inst = generate_tree(g.n, g.m, g.p2, g.seed) if spec.trees else generate(g)
            ident = instance_id(g, spec.trees)
            if spec.require_loopy and graph_info(inst).singly_connected:
                dropped.append((ident, "singly-connected"))
                continue
            census = None
            if spec.cap is None and spec.max_solutions is None and spec.min_solutions <= 1:
                if spec.min_solutions == 1 and not is_satisfiable(inst):
                    dropped.append((ident, "unsatisfiable"))
                    continue
            else:
                census = enumerate_solutions(inst, cap=spec.cap)
                if census.truncated:
                    log.info("dropping %s: oracle exceeded cap %s", ident, spec.cap)
                    dropped.append((ident, "oracle-truncated"))
                    continue
                if census.total < spec.min_solutions:
                    dropped.append((ident, "too-few-solutions"))
                    continue
                if spec.max_solutions is not None and census.total > spec.max_solutions:
                    dropped.append((ident, "too-many-solutions"))
                    continue
            items.append(CorpusItem(ident, g, inst, census))
    return items, dropped


# -- CSV helpers -----------------------------------------------------------------


def metadata_block(command: str, spec: dict | None = None, extra: dict | None = None) -> list[str]:
    import json

    lines = [
        f"probarc {__version__}",
        f"command: {command}",
        f"created: {datetime.now(timezone.utc).isoformat(timespec='seconds')}",
    ]
    if spec is not None:
        lines.append("spec: " + json.dumps(spec, sort_keys=True))
    for k, v in (extra or {}).items():
        lines.append(f"{k}: {v}")
    return lines


def write_csv(header: Sequence[str], rows: Iterable[Sequence], meta: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for line in meta:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def csv_body(text: str) -> str:
    """Text with the metadata comment lines removed."""
    return "".join(line for line in text.splitlines(keepends=True) if not line.startswith("#"))


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "" if math.isnan(x) else repr(x)
    return str(x)


# -- accuracy study --------------------------------------------------------------


@dataclass
class AccuracyRow:
    instance: str
    method: str
    r: float | None
    status: str
    iterations: int | None


@dataclass
class AccuracySummary:
    method: str
    mean_r: float
    defined: int
    excluded: int
    non_converged: int
    problems: int
    pooled_r: float

    @property
    def non_convergence_rate(self) -> float:
        return self.non_converged / self.problems if self.problems else 0.0


@dataclass
class AccuracyStudy:
    rows: list[AccuracyRow]
    summary: dict[str, AccuracySummary]
    dropped: list[tuple[str, str]] = field(default_factory=list)

    def rows_csv(self, meta: Sequence[str] = ()) -> str:
        return write_csv(
            ["instance", "method", "r", "status", "iterations"],
            ([r.instance, r.method, _fmt(r.r), r.status, _fmt(r.iterations)] for r in self.rows),
            meta,
        )

    def summary_csv(self, meta: Sequence[str] = ()) -> str:
        return write_csv(
            ["method", "mean_r", "defined", "excluded", "non_converged", "problems", "non_convergence_rate", "pooled_r"],
            (
                [s.method, _fmt(s.mean_r), s.defined, s.excluded, s.non_converged, s.problems,
                 _fmt(s.non_convergence_rate), _fmt(s.pooled_r)]
                for s in self.summary.values()
            ),
            meta,
        )


def run_accuracy_study(
    corpus: CorpusSpec | list[CorpusItem],
    methods: Sequence[str] = ("pac", "sst", "up", "mst"),
    cfg: PropagationConfig | None = None,
) -> AccuracyStudy:
    """Per-problem Pearson r between exact and estimated probabilities.

    Each problem pools all its (variable, value) pairs. For propagation
    methods only converged runs enter the mean; other runs count as
    non-converged. Problems where either vector is constant are excluded
    from the mean and counted.
    """
    cfg = cfg or PropagationConfig()
    if isinstance(corpus, CorpusSpec):
        if corpus.cap is None:
            raise ValueError("accuracy studies need an oracle cap")
        items, dropped = build_corpus(corpus)
    else:
        items, dropped = corpus, []
    items = sorted(items, key=lambda it: it.ident)
    rows: list[AccuracyRow] = []
    pooled: dict[str, tuple[list, list]] = {m: ([], []) for m in methods}
    for it in items:
        census = it.census or enumerate_solutions(it.instance, cap=corpus.cap if isinstance(corpus, CorpusSpec) else None)
        if census.truncated:
            raise OracleTruncated(it.ident)
        exact = np.concatenate(frequencies(census)) if it.instance.n else np.zeros(0)
        for m in methods:
            if m == "oracle":
                rep = EstimateReport(frequencies(census), "oracle", {"status": "exact", "iterations": None})
            else:
                rep = estimate(it.instance, m, cfg)
            status = rep.metadata.get("status", "n/a")
            iters = rep.metadata.get("iterations")
            est = np.concatenate(rep.beliefs) if rep.beliefs else np.zeros(0)
            ok = m not in ("pac", "peleg") or str(status).startswith("Converged")
            r = None
            if ok:
                try:
                    r = pearson(exact, est)
                except (DegenerateVariance, ValueError):
                    r = None
                pooled[m][0].extend(exact)
                pooled[m][1].extend(est)
            rows.append(AccuracyRow(it.ident, m, r, str(status), iters))

    summary = {}
    for m in methods:
        mine = [row for row in rows if row.method == m]
        converged = [row for row in mine if m not in ("pac", "peleg") or row.status.startswith("Converged")]
        defined = [row.r for row in converged if row.r is not None]
        try:
            pr = pearson(*pooled[m])
        except (DegenerateVariance, ValueError):
            pr = float("nan")
        summary[m] = AccuracySummary(
            method=m,
            mean_r=float(np.mean(defined)) if defined else float("nan"),
            defined=len(defined),
            excluded=len(converged) - len(defined),
            non_converged=len(mine) - len(converged),
            problems=len(mine),
            pooled_r=pr,
        )
    return AccuracyStudy(rows, summary, dropped)


# -- search study ----------------------------------------------------------------


@dataclass(frozen=True)
class SearchHeuristic:
    """One heuristic of a search study; ``solver='peleg'`` uses :func:`peleg_solve`."""

    name: str
    variable_rule: str = "lex"
    value_rule: str = "lex"
    belief: str | None = None
    dynamic: bool = False
    epsilon: float | None = None
    max_iter: int | None = None
    seed: int = 0
    solver: str = "solve"

    @classmethod
    def from_dict(cls, d: dict) -> "SearchHeuristic":
        d = dict(d)
        mode = d.pop("mode", None)
        if mode is not None:
            d["dynamic"] = mode == "dynamic"
        return cls(**d)

    def config(self) -> PropagationConfig:
        if self.dynamic:
            eps, it = 0.1, 50
        else:
            eps, it = 1e-5, 1000
        return PropagationConfig(epsilon=self.epsilon or eps, max_iter=self.max_iter or it)

    def run(self, inst: CspInstance, limits: SearchLimits) -> SearchResult:
        if self.solver == "peleg":
            cfg = PropagationConfig(epsilon=self.epsilon or 1e-12, max_iter=self.max_iter or 1000, mode=Mode.PELEG)
            res = peleg_solve(inst, cfg, limits)
            res.heuristic = self.name
            return res
        source = None
        if self.belief is not None:
            cfg = self.config()
            if self.dynamic:
                source = DynamicBeliefs(self.belief, cfg)
            else:
                source = StaticBeliefs(estimate(inst, self.belief, cfg))
        h = HeuristicSpec(self.variable_rule, self.value_rule, source, self.seed, self.name)
        return solve(inst, h, limits)


DEFAULT_HEURISTICS = (
    SearchHeuristic("random", "lex", "random", seed=1),
    SearchHeuristic("pac-static", "lex", "max-belief", belief="pac"),
    SearchHeuristic("pac-dynamic", "max-belief", "max-belief", belief="pac", dynamic=True),
)


def budget_grid(top: int) -> list[int]:
    """0, 1, 2, 5, 10, 20, 50, ... up to the first value >= ``top``."""
    grid = [0]
    decade = 1
    while grid[-1] < top:
        for f in (1, 2, 5):
            grid.append(f * decade)
            if grid[-1] >= top:
                break
        decade *= 10
    return grid


def median_backtracks(results: Sequence[SearchResult]) -> float:
    """Median backtracks; unsolved runs count as infinitely many."""
    vals = [r.backtracks if r.solved else math.inf for r in results]
    return float(np.median(vals)) if vals else float("nan")


@dataclass
class SearchStudy:
    results: list[tuple[str, SearchResult]]
    heuristics: list[str]
    grid: list[int]
    curves: dict[str, list[float]]
    medians: dict[str, float]
    dropped: list[tuple[str, str]] = field(default_factory=list)

    def results_csv(self, meta: Sequence[str] = ()) -> str:
        return write_csv(
            ["instance", "heuristic", "outcome", "backtracks", "nodes", "propagation_rounds"],
            ([i, r.heuristic, r.outcome, r.backtracks, r.nodes, r.propagation_rounds] for i, r in self.results),
            meta,
        )

    def curves_csv(self, meta: Sequence[str] = ()) -> str:
        rows = [[b] + [_fmt(self.curves[h][k]) for h in self.heuristics] for k, b in enumerate(self.grid)]
        rows.append(["median"] + [_fmt(self.medians[h]) for h in self.heuristics])
        return write_csv(["budget"] + list(self.heuristics), rows, meta)


def run_search_study(
    corpus: CorpusSpec | list[CorpusItem],
    heuristics: Sequence[SearchHeuristic] = DEFAULT_HEURISTICS,
    limits: SearchLimits | None = None,
) -> SearchStudy:
    limits = limits or SearchLimits(max_backtracks=100_000)
    if isinstance(corpus, CorpusSpec):
        items, dropped = build_corpus(corpus)
    else:
        items, dropped = corpus, []
    items = sorted(items, key=lambda it: it.ident)
    results = []
    per: dict[str, list[SearchResult]] = {h.name: [] for h in heuristics}
    for it in items:
        for h in heuristics:
            res = h.run(it.instance, limits)
            results.append((it.ident, res))
            per[h.name].append(res)
    top = limits.max_backtracks if limits.max_backtracks is not None else max(
        (r.backtracks for _, r in results), default=0)
    grid = budget_grid(top)
    curves = {}
    for h in heuristics:
        rs = per[h.name]
        curves[h.name] = [
            (sum(1 for r in rs if r.solved and r.backtracks <= b) / len(rs)) if rs else 0.0 for b in grid
        ]
    medians = {h.name: median_backtracks(per[h.name]) for h in heuristics}
    return SearchStudy(results, [h.name for h in heuristics], grid, curves, medians, dropped)


# -- oscillation discovery -------------------------------------------------------


def two_loop_topologies(n: int) -> list[tuple[tuple[int, int], ...]]:
    """Connected labelled graphs on ``n`` vertices with exactly two independent cycles."""
    pairs = list(itertools.combinations(range(n), 2))
    out = []
    for es in itertools.combinations(pairs, n + 1):
        inst = build_instance(n, 1, [(x, y, [(0, 0)]) for x, y in es])
        if graph_info(inst).connected:
            out.append(es)
    return out


@dataclass
class OscillatorReport:
    found: bool
    instance: CspInstance | None = None
    seed: int | None = None
    iterations: int | None = None
    residual_history: list[float] | None = None
    poles: tuple[list[np.ndarray], list[np.ndarray]] | None = None
    scanned: int = 0


def verify_period_two(inst: CspInstance, rounds: int, window: int = 10, tight: float = 1e-10,
                      loose: float = 1e-3) -> bool:
    """Replay ``rounds`` synchronous rounds step by step and check the last
    ``window`` rounds alternate between two poles."""
    state = BeliefState.initial(inst)
    history = []
    for _ in range(rounds + 1):
        state, wiped = pac_round(state)
        if wiped is not None:
            return False
        history.append(state.beliefs())
    if len(history) < window + 2:
        return False
    for k in range(len(history) - window, len(history)):
        _, back2 = residual(history[k], history[k - 2])
        _, back1 = residual(history[k], history[k - 1])
        if not (back2 <= tight and back1 > loose):
            return False
    return True


def _random_instance(n: int, topologies, m_choices: Sequence[int], seed: int) -> CspInstance:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x6F7363])))
    es = topologies[int(rng.integers(len(topologies)))]
    m = int(m_choices[int(rng.integers(len(m_choices)))])
    p2 = float(rng.uniform(0.2, 0.7))
    return build_instance(n, m, [(x, y, rng.random((m, m)) >= p2) for x, y in es])


def find_oscillator(
    n: int = 5,
    m_choices: Sequence[int] = (2, 3),
    seeds: Iterable[int] = range(10_000),
    topology: str = "two-loop",
    max_iter: int = 2000,
    window: int = 10,
) -> OscillatorReport:
    """Scan small instances for a verified period-2 pAC oscillation.

    ``topology`` is ``"two-loop"`` (every connected graph with ``n + 1``
    edges) or ``"tree"`` (random labelled trees).
    """
    if n > 6 or max(m_choices) > 3:
        raise ValueError("oscillator scans are limited to n <= 6 and m <= 3")
    tops = two_loop_topologies(n) if topology == "two-loop" else None
    cfg = PropagationConfig(epsilon=1e-10, max_iter=max_iter, oscillation_window=window, record_history=True)
    scanned = 0
    for seed in seeds:
        scanned += 1
        if topology == "tree":
            m = int(m_choices[seed % len(m_choices)])
            inst = generate_tree(n, m, 0.2 + 0.5 * ((seed * 0.618034) % 1.0), seed)
        else:
            inst = _random_instance(n, tops, m_choices, seed)
        res = propagate(inst, cfg)
        if res.status != "Oscillating":
            continue
        if not verify_period_two(inst, res.iterations, window):
            continue
        a = propagate(inst, replace(cfg, max_iter=res.iterations - 1, oscillation_window=0)).beliefs
        return OscillatorReport(True, inst, seed, res.iterations, res.residual_history, (a, res.beliefs), scanned)
    return OscillatorReport(False, scanned=scanned)
