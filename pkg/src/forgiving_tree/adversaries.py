"""Omniscient deletion strategies.

An adversary sees the whole engine (graph, node states, history) but never
mutates it; each call returns the next victim. All tie-breaking is by lowest
node id so runs are reproducible.
"""
from __future__ import annotations

import random

from .graph import diameter


class DeletionStrategy:
    """Base: pick a live node, or None when the graph is empty."""

    name = "abstract"

    def choose(self, engine) -> int | None:
        raise NotImplementedError


class RandomAdversary(DeletionStrategy):
    name = "random"

    def __init__(self, seed: int = 0):
        self.rng = random.Random(seed)

    def choose(self, engine) -> int | None:
        alive = sorted(engine.graph.vertices())
        if not alive:
            return None
        return self.rng.choice(alive)


class MaxDegreeAdversary(DeletionStrategy):
    name = "max_degree"

    def choose(self, engine) -> int | None:
        alive = sorted(engine.graph.vertices())
        if not alive:
            return None
        return max(alive, key=lambda v: (engine.graph.degree(v), -v))


class HeirHunterAdversary(DeletionStrategy):
    """Chases the heir machinery. Killing heirs only ever creates ready
    heirs (the chain hands the one-child position down); the promotion to
    a full helper needs the node *above* the ready heir to die. So: if any
    live will names a currently-ready heir, kill that owner, else kill the
    heir of the deepest will. Random among survivors when the strategy
    keeps no wills (baselines)."""

    name = "heir_hunter"

    def __init__(self, seed: int = 0):
        self.rng = random.Random(seed)

    def choose(self, engine) -> int | None:
        alive = sorted(engine.graph.vertices())
        if not alive:
            return None
        states = getattr(engine.strategy, "states", {})
        promote = None
        deepest = None
        for v in alive:
            st = states.get(v)
            will = getattr(st, "will", None)
            if will is None or will.root is None or will.heir is None:
                continue
            h = states.get(will.heir)
            if h is not None and h.isreadyheir and (promote is None or v < promote):
                promote = v
            key = (will.depth(), -will.heir)
            if deepest is None or key > deepest[0]:
                deepest = (key, will.heir)
        if promote is not None:
            return promote
        if deepest is not None:
            return deepest[1]
        return self.rng.choice(alive)


class DiameterGreedyAdversary(DeletionStrategy):
    """One-ply exact lookahead: simulates every candidate deletion on a
    throwaway clone and keeps the one maximizing the next diameter.
    Quadratic work per round; meant for small n."""

    name = "diameter_greedy"

    def choose(self, engine) -> int | None:
        alive = sorted(engine.graph.vertices())
        if not alive:
            return None
        if len(alive) == 1:
            return alive[0]
        best_v, best_d = None, -1
        for v in alive:
            twin = engine.clone()
            try:
                twin.delete(v)
            except Exception:
                continue  # a candidate that wedges the clone is skipped
            d = diameter(twin.graph) if twin.graph.vertices() else 0
            if d > best_d:
                best_v, best_d = v, d
        return best_v if best_v is not None else alive[0]


class ScriptedAdversary(DeletionStrategy):
    """Replays an explicit deletion order."""

    name = "scripted"

    def __init__(self, order):
        self.order = list(order)
        self.at = 0

    @staticmethod
    def from_file(path) -> "ScriptedAdversary":
        order = []
        with open(path) as f:
            for line in f:
                line = line.strip()
                if line and not line.startswith("#"):
                    order.append(int(line))
        return ScriptedAdversary(order)

    def choose(self, engine) -> int | None:
        if self.at >= len(self.order):
            return None
        v = self.order[self.at]
        self.at += 1
        if v not in engine.graph:
            raise ValueError(f"scripted victim {v} is not alive")
        return v


def make_adversary(name: str, seed: int = 0, script=None) -> DeletionStrategy:
    if name == "random":
        return RandomAdversary(seed)
    if name == "max_degree":
        return MaxDegreeAdversary()
    if name == "heir_hunter":
        return HeirHunterAdversary(seed)
    if name == "diameter_greedy":
        return DiameterGreedyAdversary()
    if name == "scripted":
        if script is None:
            raise ValueError("scripted adversary needs a victim list file")
        if isinstance(script, (str, bytes)) or hasattr(script, "__fspath__"):
            return ScriptedAdversary.from_file(script)
        return ScriptedAdversary(script)
    raise ValueError(f"unknown adversary {name!r}")
