"""The three naive repair strategies the Forgiving Tree is measured against.

Each keeps one integer-set per node (its current neighbors) and repairs a
deletion from the victim's neighbor list alone, carried by the deletion
notice. They demonstrate the blowups a smarter structure avoids: surrogate
concentrates degree, line stretches the diameter, binary-tree repair keeps
single rounds cheap but still decays over adversarial sequences.
"""
from __future__ import annotations

from collections import Counter

from .graph import RootedTree
from .harness import Msg


class _NeighborListStrategy:
    """Shared plumbing: per-node neighbor sets, notice/hello messages."""

    name = "abstract"
    referee_profile = "baseline"

    def __init__(self):
        self.states: dict[int, set[int]] = {}
        self.counters: Counter = Counter()
        self.engine = None

    def bind(self, engine) -> None:
        self.engine = engine

    def init(self, tree: RootedTree) -> None:
        g = tree.to_graph()
        self.states = {v: set(g.neighbors(v)) for v in g.vertices()}

    def clone(self):
        twin = type(self)()
        twin.states = {v: set(s) for v, s in self.states.items()}
        twin.counters = Counter(self.counters)
        return twin

    def on_delete(self, dead: int, neighbors: list[int]) -> list[Msg]:
        self.states.pop(dead, None)
        order = sorted(neighbors)
        return [
            Msg("deletion_notice", None, v, {"dead": dead, "ring": order})
            for v in order
        ]

    def handle(self, msg: Msg) -> list[Msg]:
        me = msg.recipient
        mine = self.states[me]
        out: list[Msg] = []
        if msg.kind == "deletion_notice":
            mine.discard(msg.payload["dead"])
            ring = msg.payload["ring"]
            for peer in self._repairs(me, ring):
                if peer not in mine:
                    self.engine.edge_op(me, peer, add=True)
                    mine.add(peer)
                    self.counters["repair_edges"] += 1
                    out.append(Msg("hello", me, peer, {}))
        elif msg.kind == "hello":
            mine.add(msg.sender)
        return out

    def _repairs(self, me: int, ring: list[int]) -> list[int]:
        raise NotImplementedError


class SurrogateStrategy(_NeighborListStrategy):
    """Lowest-id neighbor absorbs every edge the victim held."""

    name = "surrogate"

    def _repairs(self, me, ring):
        if ring and me == ring[0]:
            return [v for v in ring if v != me]
        return []


class LineStrategy(_NeighborListStrategy):
    """Victim's neighbors are chained in ascending id order; each edge is
    made by its lower endpoint."""

    name = "line"

    def _repairs(self, me, ring):
        i = ring.index(me)
        return [ring[i + 1]] if i + 1 < len(ring) else []


class BinaryTreeStrategy(_NeighborListStrategy):
    """Victim's neighbors form a complete binary tree in id order (heap
    indexing); each edge is made by the child end."""

    name = "binary_tree"

    def _repairs(self, me, ring):
        i = ring.index(me)
        return [ring[(i - 1) // 2]] if i > 0 else []


def make_strategy(name: str):
    from .protocol import ForgivingTree

    if name == "ft":
        return ForgivingTree()
    if name == "surrogate":
        return SurrogateStrategy()
    if name == "line":
        return LineStrategy()
    if name == "binary_tree":
        return BinaryTreeStrategy()
    raise ValueError(f"unknown strategy {name!r}")
