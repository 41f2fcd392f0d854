"""The ft command line: single runs, the lower-bound experiment, grids.

Exit codes: 0 all referee checks passed, 1 referee violation, 2 usage or
config error (argparse's own convention for bad flags).
"""
from __future__ import annotations

import argparse
import json
import sys

from .adversaries import make_adversary
from .baselines import make_strategy
from .experiments import (
    ExperimentGrid,
    parse_generator,
    generate_tree,
    lower_bound_experiment,
    parse_config,
    parse_int_list,
    parse_name_list,
    run_grid,
)
from .harness import Engine, RefereeError


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ft",
        description="Forgiving Tree self-healing simulator")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="one simulation to extinction")
    run.add_argument("--config", help="key=value file; flags override it")
    run.add_argument("--tree", help="path | star | balanced_kary[:k] | "
                                    "random_recursive | from_file")
    run.add_argument("--n", type=int, help="tree size")
    run.add_argument("--delta", type=int,
                     help="star shorthand: size delta + 1")
    run.add_argument("--adversary",
                     help="random | max_degree | heir_hunter | "
                          "diameter_greedy | scripted")
    run.add_argument("--strategy",
                     help="ft | surrogate | line | binary_tree")
    run.add_argument("--seed", type=int)
    run.add_argument("--rounds", type=int, help="max deletions (default all)")
    run.add_argument("--out", help="write per-round metrics CSV here")
    run.add_argument("--trace", help="write the event trace here")
    run.add_argument("--referee", choices=["full", "sampled", "off"])
    run.set_defaults(func=cmd_run)

    lb = sub.add_parser("lowerbound", help="star center-deletion experiment")
    lb.add_argument("--delta", type=int, required=True)
    lb.add_argument("--strategy", required=True)
    lb.set_defaults(func=cmd_lowerbound)

    grid = sub.add_parser("grid", help="batch cross-product of runs")
    grid.add_argument("--config", required=True)
    grid.set_defaults(func=cmd_grid)
    return p


def _setting(args, cfg: dict, key: str, default=None):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    return cfg.get(key, default)


def cmd_run(args) -> int:
    cfg = parse_config(args.config) if args.config else {}
    tree_spec = _setting(args, cfg, "tree", "star")
    kind, params = parse_generator(tree_spec)
    seed = int(_setting(args, cfg, "seed", 0))
    delta = _setting(args, cfg, "delta")
    n = _setting(args, cfg, "n")
    if n is None and delta is not None:
        n = int(delta) + 1
    if kind == "from_file":
        params["path"] = cfg["tree_file"]
    else:
        if n is None:
            raise ValueError("tree size required: --n or --delta")
        params["n"] = int(n)
    rounds = _setting(args, cfg, "rounds")
    tree = generate_tree(kind, params, seed=seed)
    strategy = make_strategy(_setting(args, cfg, "strategy", "ft"))
    adversary = make_adversary(_setting(args, cfg, "adversary", "random"),
                               seed=seed, script=cfg.get("script"))
    trace_path = _setting(args, cfg, "trace")
    eng = Engine(tree, strategy, seed=seed,
                 referee=_setting(args, cfg, "referee", "full"),
                 trace=bool(trace_path))
    code = 0
    try:
        eng.run(adversary, rounds=int(rounds) if rounds is not None else None)
    except RefereeError as e:
        code = 1
        print(f"referee violation at round {eng.round_no}:", file=sys.stderr)
        for v in e.violations:
            print(f"  {v}", file=sys.stderr)
        _dump_states(eng, e.violations)
    res = eng.result
    out = _setting(args, cfg, "out")
    if out:
        res.write_metrics(out)
    if trace_path:
        res.write_trace(trace_path)
    summary = {
        "rounds": len(res.records),
        "survivors": len(eng.graph.vertices()),
        "max_degree_increase": res.max_degree_increase,
        "max_diameter": max((r.diameter for r in res.records), default=0),
        "max_messages_per_node": res.max_messages_per_node,
        "max_recovery_latency": res.max_latency,
        "violations": len(res.violations),
    }
    if trace_path:
        summary["trace_hash"] = res.trace_hash()
    print(json.dumps(summary))
    return code


def _dump_states(eng, violations) -> None:
    states = getattr(eng.strategy, "states", {})
    seen = set()
    for v in violations:
        actor = getattr(v, "actor", None)
        if actor is None or actor in seen:
            continue
        seen.add(actor)
        st = states.get(actor)
        if st is None:
            continue
        print(f"  state of {actor}: parent={st.parent},{st.parent_kind} "
              f"children={st.children} ishelper={st.ishelper} "
              f"hparent={st.hparent},{st.hparent_kind} "
              f"hchildren={st.hchildren}", file=sys.stderr)


def cmd_lowerbound(args) -> int:
    try:
        report = lower_bound_experiment(args.delta, args.strategy)
    except RefereeError as e:
        print(f"referee violation: {e}", file=sys.stderr)
        return 1
    print(json.dumps(report.as_dict()))
    return 0


def cmd_grid(args) -> int:
    cfg = parse_config(args.config)
    grid = ExperimentGrid(
        generators=parse_name_list(cfg.get("generators", "star")),
        sizes=parse_int_list(cfg.get("sizes", "64")),
        adversaries=parse_name_list(cfg.get("adversaries", "random")),
        strategies=parse_name_list(cfg.get("strategies", "ft")),
        seeds=(list(range(int(cfg["seed_count"]))) if "seed_count" in cfg
               else parse_int_list(cfg.get("seeds", "0"))),
        referee=cfg.get("referee", "full"),
        rounds=int(cfg["rounds"]) if "rounds" in cfg else None,
    )
    out_dir = cfg.get("out", "ft_grid")
    rows = run_grid(grid, out_dir)
    bad = [r for r in rows if r["status"] != "ok" or r["violations"]]
    print(json.dumps({
        "cells": len(rows),
        "failed": len(bad),
        "out_dir": out_dir,
    }))
    for r in bad:
        print(f"violation: {r['generator']} n={r['n']} {r['adversary']} "
              f"{r['strategy']} s{r['seed']}", file=sys.stderr)
    return 1 if bad else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
