"""Tree generators, the star lower-bound experiment, and grid orchestration.

Everything here is deterministic given (config, seed): generators derive
their randomness from an explicit seed, grid cells are independent, and
output files are written atomically so a crashed cell never leaves a
half-written CSV behind.
"""
from __future__ import annotations

import math
import os
import random
from dataclasses import dataclass, field
from itertools import product

from .adversaries import make_adversary
from .baselines import make_strategy
from .graph import Graph, RootedTree, bfs_spanning_tree, diameter, tree_diameter
from .harness import METRICS_HEADER, Engine, RefereeError

TREE_KINDS = ("path", "star", "balanced_kary", "random_recursive", "from_file")


# ---------------------------------------------------------------- generators

def generate_tree(kind: str, params=None, seed: int = 0) -> RootedTree:
    """Build a rooted tree.

    kind: path | star | balanced_kary | random_recursive | from_file.
    params: mapping with n (all but from_file), k (balanced_kary, >= 2),
    path (from_file: edge list, one "a b" pair per line, # comments ok).
    """
    params = dict(params or {})
    if kind == "from_file":
        return _tree_from_file(params["path"])
    n = int(params.get("n", 0))
    if n < 1:
        raise ValueError(f"tree size must be >= 1, got {n}")
    if kind == "path":
        parent = {0: None, **{i: i - 1 for i in range(1, n)}}
    elif kind == "star":
        parent = {0: None, **{i: 0 for i in range(1, n)}}
    elif kind == "balanced_kary":
        k = int(params.get("k", 2))
        if k < 2:
            raise ValueError(f"arity must be >= 2, got {k}")
        parent = {0: None, **{i: (i - 1) // k for i in range(1, n)}}
    elif kind == "random_recursive":
        rng = random.Random(seed)
        parent = {0: None, **{i: rng.randrange(i) for i in range(1, n)}}
    else:
        raise ValueError(f"unknown tree kind {kind!r}")
    return RootedTree.from_parent(parent)


def _tree_from_file(path) -> RootedTree:
    g = Graph()
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            try:
                ids = [int(x) for x in fields]
            except ValueError as e:
                raise ValueError(f"{path}:{lineno}: {e}") from None
            if len(ids) == 1:
                g.add_vertex(ids[0])
            elif len(ids) == 2:
                g.add_edge(ids[0], ids[1])
            else:
                raise ValueError(
                    f"{path}:{lineno}: expected 'a b' or a lone vertex id")
    if not g.vertices():
        raise ValueError(f"{path}: no vertices")
    return bfs_spanning_tree(g, min(g.vertices()))


# ------------------------------------------------------------- lower bound

@dataclass
class LowerBoundReport:
    """One star experiment: delete the center, measure the price paid.

    alpha is the degree-increase cap the run certifies: the largest
    increase any survivor suffered, raised to the theorem's domain floor
    of 3 (the inequality's derivation needs alpha >= 3). beta is the
    diameter stretch against the pre-deletion graph. Any algorithm that
    keeps the graph connected must satisfy alpha^(2 beta + 1) >= Delta;
    the Forgiving Tree additionally promises beta <= 2 log_alpha(Delta) + 2.
    """

    Delta: int
    alpha: int
    beta: float
    lhs: float
    satisfied: bool
    ft_bound_ok: bool

    def as_dict(self) -> dict:
        return {
            "Delta": self.Delta, "alpha": self.alpha, "beta": self.beta,
            "lhs": self.lhs, "satisfied": self.satisfied,
            "ft_bound_ok": self.ft_bound_ok,
        }


def lower_bound_experiment(delta: int, strategy) -> LowerBoundReport:
    """Star on delta+1 vertices, center deleted, one repair round."""
    if delta < 3:
        raise ValueError(f"delta must be >= 3, got {delta}")
    if isinstance(strategy, str):
        strategy = make_strategy(strategy)
    tree = generate_tree("star", {"n": delta + 1})
    d0 = diameter(tree.to_graph())
    eng = Engine(tree, strategy, seed=0, referee="full")
    degrees0 = dict(eng.degrees0)
    eng.delete(0)
    measured = max(
        (eng.graph.degree(v) - degrees0[v] for v in eng.graph.vertices()),
        default=0)
    alpha = max(3, measured)
    beta = diameter(eng.graph) / d0
    exponent = 2 * beta + 1
    if exponent == int(exponent):
        lhs = alpha ** int(exponent)  # exact; these get astronomically big
        satisfied = lhs >= delta
    else:
        log_lhs = exponent * math.log(alpha)
        satisfied = log_lhs >= math.log(delta) - 1e-9
        lhs = math.exp(min(log_lhs, 500))
    bound = 2 * math.log(delta, alpha) + 2
    return LowerBoundReport(
        Delta=delta, alpha=alpha, beta=beta, lhs=lhs,
        satisfied=satisfied, ft_bound_ok=beta <= bound,
    )


# --------------------------------------------------------------- grid runs

@dataclass
class ExperimentGrid:
    """Cross product of generators x sizes x adversaries x strategies x
    seeds; one independent simulation per cell.

    A generator entry is a kind name, optionally with an arity suffix:
    "balanced_kary:3" is the ternary tree.
    """

    generators: list = field(default_factory=lambda: ["star"])
    sizes: list = field(default_factory=lambda: [64])
    adversaries: list = field(default_factory=lambda: ["random"])
    strategies: list = field(default_factory=lambda: ["ft"])
    seeds: list = field(default_factory=lambda: [0])
    referee: str = "full"
    rounds: int | None = None

    def cells(self):
        yield from product(self.generators, self.sizes, self.adversaries,
                           self.strategies, self.seeds)


def parse_generator(spec: str):
    kind, _, arg = spec.partition(":")
    params = {}
    if arg:
        params["k"] = int(arg)
    if kind not in TREE_KINDS:
        raise ValueError(f"unknown tree kind {kind!r}")
    return kind, params


def _cell_name(gen: str, n: int, adv: str, strat: str, seed: int) -> str:
    return f"{gen.replace(':', '')}_n{n}_{adv}_{strat}_s{seed}"


AGGREGATE_HEADER = (
    "generator,n,adversary,strategy,seed,rounds,survivors,status,violations,"
    "max_degree_increase,max_diameter,max_messages_per_node,"
    "max_bits_per_node,max_recovery_latency,max_edges_added,"
    "max_edges_dropped,diameter_ratio_tree,diameter_ratio_graph,"
    "diameter_bound,diameter_bound_ok,trace_hash"
)


def diameter_bound(tree: RootedTree) -> int:
    """Worst diameter the Forgiving Tree tolerates from this start tree:
    every original edge stretches into at most h0 levels of replacement
    trees of depth ceil(log2 Delta) + 1 each, in both directions."""
    g = tree.to_graph()
    delta = max((g.degree(v) for v in g.vertices()), default=0)
    h0 = tree.height()
    return 2 * h0 * (math.ceil(math.log2(delta)) + 1) if delta else 0


def run_cell(gen: str, n: int, adv: str, strat: str, seed: int,
             referee: str = "full", rounds: int | None = None):
    """One grid cell: build, run to extinction (or the round cap), and
    summarize. Returns (engine, aggregate row dict). A referee violation
    ends the run and flags the row; it is never swallowed."""
    kind, params = parse_generator(gen)
    tree = generate_tree(kind, {"n": n, **params}, seed=seed)
    g0 = tree.to_graph()
    tree_d0 = max(1, tree_diameter(g0))
    graph_d0 = max(1, diameter(g0))
    bound = diameter_bound(tree)
    eng = Engine(tree, make_strategy(strat), seed=seed, referee=referee)
    status = "ok"
    try:
        eng.run(make_adversary(adv, seed=seed), rounds=rounds)
    except RefereeError:
        status = "violation"
    res = eng.result
    max_diam = max((r.diameter for r in res.records), default=0)
    row = {
        "generator": gen.replace(":", ""), "n": n, "adversary": adv,
        "strategy": strat, "seed": seed, "rounds": len(res.records),
        "survivors": len(eng.graph.vertices()), "status": status,
        "violations": len(res.violations),
        "max_degree_increase": res.max_degree_increase,
        "max_diameter": max_diam,
        "max_messages_per_node": res.max_messages_per_node,
        "max_bits_per_node": res.max_bits_per_node,
        "max_recovery_latency": res.max_latency,
        "max_edges_added": max((r.edges_added for r in res.records), default=0),
        "max_edges_dropped": max((r.edges_dropped for r in res.records), default=0),
        "diameter_ratio_tree": round(max_diam / tree_d0, 4),
        "diameter_ratio_graph": round(max_diam / graph_d0, 4),
        "diameter_bound": bound,
        "diameter_bound_ok": max_diam <= bound,
        "trace_hash": res.trace_hash(),
    }
    return eng, row


def _write_atomic(path, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as f:
        f.write(text)
    os.replace(tmp, path)


def run_grid(grid: ExperimentGrid, out_dir) -> list[dict]:
    """Run every cell, write one metrics CSV per cell plus aggregate.csv,
    and return the aggregate rows."""
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for gen, n, adv, strat, seed in grid.cells():
        eng, row = run_cell(gen, n, adv, strat, seed,
                            referee=grid.referee, rounds=grid.rounds)
        name = _cell_name(gen, n, adv, strat, seed)
        lines = [r.csv_row() for r in eng.result.records]
        _write_atomic(os.path.join(out_dir, f"{name}.csv"),
                      "\n".join([METRICS_HEADER] + lines) + "\n")
        rows.append(row)
    header_keys = AGGREGATE_HEADER.split(",")
    body = "\n".join(",".join(str(r[k]) for k in header_keys) for r in rows)
    _write_atomic(os.path.join(out_dir, "aggregate.csv"),
                  AGGREGATE_HEADER + "\n" + body + ("\n" if body else ""))
    return rows


# ------------------------------------------------------------------ config

def parse_config(path) -> dict:
    """key=value lines; blank lines and # comments ignored."""
    cfg = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            cfg[key.strip()] = value.strip()
    return cfg


def parse_int_list(text: str) -> list[int]:
    return [int(x) for x in text.replace(",", " ").split()]


def parse_name_list(text: str) -> list[str]:
    return [x for x in text.replace(",", " ").split() if x]
