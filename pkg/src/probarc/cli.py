"""Command-line interface.

Exit codes: 0 success, 2 bad input or spec, 3 numeric failure during propagation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .ac3 import ac3
from .baselines import METHODS, build_spanning_forest, estimate, mst_estimate, ordering_toward, up_estimate
from .csp import CspError, dumps, load
from .generator import GenSpec, generate, generate_tree
from .harness import (
    CorpusSpec,
    SearchHeuristic,
    find_oscillator,
    metadata_block,
    run_accuracy_study,
    run_search_study,
    write_csv,
)
from .oracle import enumerate_solutions, frequencies
from .pac import Mode, NonFiniteState, PropagationConfig, propagate
from .search import DynamicBeliefs, HeuristicSpec, SearchLimits, StaticBeliefs, peleg_solve, solve

EXIT_SPEC = 2
EXIT_NUMERIC = 3


class SpecError(Exception):
    pass


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _belief_rows(beliefs):
    for x, vec in enumerate(beliefs):
        for i, p in enumerate(vec):
            yield [x, i, repr(float(p))]


def cmd_gen(args) -> int:
    if args.tree:
        inst = generate_tree(args.n, args.m, args.p2, args.seed)
    else:
        inst = generate(GenSpec(args.n, args.m, args.p1, args.p2, args.seed))
    header = [
        f"probarc {__version__} gen",
        f"n={args.n} m={args.m} p1={args.p1} p2={args.p2} seed={args.seed} tree={args.tree}",
        "prng=PCG64 via SeedSequence([seed, x, y]) per edge; instances are not filtered for connectivity",
    ]
    _emit(dumps(inst, header), args.out)
    return 0


def cmd_ac3(args) -> int:
    inst = load(args.instance)
    res = ac3(inst)
    lines = [f"status: {res.status}"]
    for x in range(inst.n):
        lines.append(f"{x}: " + " ".join(str(v) for v in res.domains.values(x)))
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _config(args, mode="standard") -> PropagationConfig:
    return PropagationConfig(epsilon=args.epsilon, max_iter=args.max_iter, mode=Mode(mode),
                             record_history=getattr(args, "history", False))


def cmd_pac(args) -> int:
    inst = load(args.instance)
    cfg = _config(args, args.mode)
    res = propagate(inst, cfg)
    meta = metadata_block("pac", extra={"instance": args.instance, "epsilon": cfg.epsilon,
                                        "max_iter": cfg.max_iter, "mode": cfg.mode.value})
    meta.append(f"status: {res.label()}")
    meta.append(f"iterations: {res.iterations}")
    if res.residual_history is not None:
        meta.append("history: " + " ".join(repr(r) for r in res.residual_history))
    _emit(write_csv(["var", "value", "prob"], _belief_rows(res.beliefs), meta), args.out)
    return 0


def cmd_count(args) -> int:
    inst = load(args.instance)
    census = enumerate_solutions(inst, cap=args.cap)
    meta = metadata_block("count", extra={"instance": args.instance, "cap": args.cap})
    meta.append(f"total: {census.total}")
    meta.append(f"truncated: {census.truncated}")
    if args.frequencies and not census.truncated:
        text = write_csv(["var", "value", "prob"], _belief_rows(frequencies(census)), meta)
    else:
        text = "".join(f"# {m}\n" for m in meta) + f"{census.total}\n"
    _emit(text, args.out)
    return 0


def cmd_estimate(args) -> int:
    inst = load(args.instance)
    cfg = _config(args)
    if args.method == "up" and args.sink is not None:
        order = [int(v) for v in args.ordering.split(",")] if args.ordering else ordering_toward(inst, args.sink)
        vec = up_estimate(inst, order, args.sink)
        rows = ([args.sink, i, repr(float(p))] for i, p in enumerate(vec))
        meta = metadata_block("estimate", extra={"method": "up", "sink": args.sink, "ordering": order})
        _emit(write_csv(["var", "value", "prob"], rows, meta), args.out)
        return 0
    if args.method == "mst" and args.forest_strategy:
        rep = mst_estimate(inst, build_spanning_forest(inst, args.forest_strategy, args.seed))
    else:
        rep = estimate(inst, args.method, cfg, args.forest_strategy)
    meta = metadata_block("estimate", extra={"method": args.method, "seed": args.seed})
    meta.extend(f"{k}: {v}" for k, v in rep.metadata.items())
    _emit(write_csv(["var", "value", "prob"], _belief_rows(rep.beliefs), meta), args.out)
    return 0


def cmd_solve(args) -> int:
    inst = load(args.instance)
    limits = SearchLimits(max_backtracks=args.max_backtracks)
    cfg = _config(args)
    if args.peleg_decode:
        res = peleg_solve(inst, PropagationConfig(epsilon=args.epsilon, max_iter=args.max_iter, mode=Mode.PELEG), limits)
    else:
        source = None
        if args.belief != "none":
            source = DynamicBeliefs(args.belief, cfg) if args.dynamic else StaticBeliefs(estimate(inst, args.belief, cfg))
        res = solve(inst, HeuristicSpec(args.var_rule, args.val_rule, source, args.seed), limits)
    meta = metadata_block("solve", extra={"seed": args.seed})
    if res.assignment is not None:
        meta.append("assignment: " + " ".join(str(v) for v in res.assignment))
    row = [Path(args.instance).stem, res.heuristic, res.outcome, res.backtracks, res.nodes, res.propagation_rounds]
    _emit(write_csv(["instance", "heuristic", "outcome", "backtracks", "nodes", "propagation_rounds"], [row], meta),
          args.out)
    return 0


def _read_spec(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read study spec {path}: {exc}") from exc


def _out_paths(out: str | None, suffixes) -> list[Path | None]:
    if not out:
        return [None] * len(suffixes)
    base = Path(out)
    return [base.with_name(base.stem + s + base.suffix) if s else base for s in suffixes]


def cmd_study_accuracy(args) -> int:
    spec = _read_spec(args.spec)
    try:
        corpus = CorpusSpec.from_dict(spec["corpus"])
        cfg = PropagationConfig(**spec.get("propagation", {}))
        methods = spec.get("methods", ["pac", "sst", "up", "mst"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(f"bad accuracy spec: {exc}") from exc
    study = run_accuracy_study(corpus, methods, cfg)
    meta = metadata_block("study-accuracy", spec, {"admitted": len({r.instance for r in study.rows}),
                                                   "dropped": len(study.dropped)})
    rows_path, summary_path = _out_paths(args.out, ["", "_summary"])
    for text, path in ((study.rows_csv(meta), rows_path), (study.summary_csv(meta), summary_path)):
        _emit(text, str(path) if path else None)
    return 0


def cmd_study_search(args) -> int:
    spec = _read_spec(args.spec)
    try:
        corpus = CorpusSpec.from_dict(spec["corpus"])
        heuristics = [SearchHeuristic.from_dict(h) for h in spec.get("heuristics", [])] or None
        limits = SearchLimits(**spec.get("limits", {"max_backtracks": 100_000}))
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(f"bad search spec: {exc}") from exc
    study = run_search_study(corpus, heuristics, limits) if heuristics else run_search_study(corpus, limits=limits)
    meta = metadata_block("study-search", spec, {"admitted": len({i for i, _ in study.results}),
                                                 "dropped": len(study.dropped)})
    rows_path, curve_path = _out_paths(args.out, ["", "_curves"])
    for text, path in ((study.results_csv(meta), rows_path), (study.curves_csv(meta), curve_path)):
        _emit(text, str(path) if path else None)
    return 0


def cmd_find_oscillator(args) -> int:
    report = find_oscillator(n=args.n, m_choices=tuple(args.m), seeds=range(args.seed_start, args.seed_start + args.seeds),
                             topology=args.topology)
    meta = metadata_block("find-oscillator", extra={"n": args.n, "m": args.m, "seeds": args.seeds,
                                                    "topology": args.topology, "scanned": report.scanned})
    if not report.found:
        _emit("".join(f"# {m}\n" for m in meta) + "NotFound\n", args.out)
        return 0
    meta.append(f"seed: {report.seed}")
    meta.append(f"status: Oscillating(2) after {report.iterations} rounds")
    body = dumps(report.instance, meta)
    trace = write_csv(["round", "residual"], ([k + 1, repr(r)] for k, r in enumerate(report.residual_history)))
    _emit(body + "\n# trace\n" + "".join("# " + line + "\n" for line in trace.splitlines()), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="probarc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"probarc {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def prop_opts(sp, eps=1e-5, it=1000):
        sp.add_argument("--epsilon", type=float, default=eps)
        sp.add_argument("--max-iter", type=int, default=it)

    sp = sub.add_parser("gen", help="generate a random instance")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--p1", type=float, default=1.0)
    sp.add_argument("--p2", type=float, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--tree", action="store_true")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("ac3", help="arc consistency")
    sp.add_argument("instance")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_ac3)

    sp = sub.add_parser("pac", help="probabilistic arc consistency")
    sp.add_argument("instance")
    prop_opts(sp)
    sp.add_argument("--mode", choices=[m.value for m in Mode], default="standard")
    sp.add_argument("--history", action="store_true")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_pac)

    sp = sub.add_parser("count", help="exact solution count")
    sp.add_argument("instance")
    sp.add_argument("--cap", type=int)
    sp.add_argument("--frequencies", action="store_true")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_count)

    sp = sub.add_parser("estimate", help="solution probabilities by any estimator")
    sp.add_argument("instance")
    sp.add_argument("--method", choices=METHODS, default="pac")
    sp.add_argument("--sink", "--root", dest="sink", type=int)
    sp.add_argument("--ordering", help="comma-separated variable order for up (sink last)")
    sp.add_argument("--forest-strategy", choices=["max-tightness", "edge-partition"])
    sp.add_argument("--seed", type=int, default=0)
    prop_opts(sp)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("solve", help="backtracking search")
    sp.add_argument("instance")
    sp.add_argument("--var-rule", choices=["lex", "first-fail", "brelaz", "max-belief", "random"], default="lex")
    sp.add_argument("--val-rule", choices=["lex", "max-belief", "random"], default="lex")
    sp.add_argument("--belief", choices=["none", *METHODS], default="none")
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--static", dest="dynamic", action="store_false")
    g.add_argument("--dynamic", dest="dynamic", action="store_true")
    prop_opts(sp)
    sp.add_argument("--max-backtracks", type=int)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--peleg-decode", action="store_true",
                    help="try decoding a Peleg relaxation directly before searching")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_solve, dynamic=False)

    sp = sub.add_parser("study-accuracy", help="estimator accuracy against the exact oracle")
    sp.add_argument("spec")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_study_accuracy)

    sp = sub.add_parser("study-search", help="search cost per heuristic")
    sp.add_argument("spec")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_study_search)

    sp = sub.add_parser("find-oscillator", help="scan small loopy instances for period-2 oscillation")
    sp.add_argument("--n", type=int, default=5)
    sp.add_argument("--m", type=int, nargs="+", default=[2, 3])
    sp.add_argument("--seeds", type=int, default=10_000)
    sp.add_argument("--seed-start", type=int, default=0)
    sp.add_argument("--topology", choices=["two-loop", "tree"], default="two-loop")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_find_oscillator)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (SpecError, CspError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except (NonFiniteState, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
