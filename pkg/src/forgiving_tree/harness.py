"""Deterministic simulation engine.

One adversarial deletion per round. The engine removes the victim, hands
system deletion notices to the repair strategy's surviving neighbors, then
drains the message queue in seeded-random delivery order until quiescence.
Handlers see one message at a time and may emit more; edge changes are not
queued but applied synchronously through Engine.edge_op, which enforces the
knowledge rule (edges only toward ids a node has actually learned) and
bills the initiator. Per-round accounts: messages and bits per sender,
causal depth (recovery latency), and edge churn. Identical seeds give
byte-identical traces.
"""

from __future__ import annotations

import copy
import hashlib
import json
import random
from collections import Counter
from dataclasses import dataclass, field

from .graph import Graph, RootedTree, diameter, is_tree, tree_diameter

METRICS_HEADER = (
    "round,deleted,max_degree_increase,diameter,max_messages_per_node,"
    "max_bits_per_node,recovery_latency,edges_added,edges_dropped"
)

# Quiescence budget: a round may deliver at most
# BUDGET_COEFF * (initial degree of the victim + BUDGET_CONST) messages.
# Generous on purpose; the tight per-node O(1) claim is asserted by tests
# against recorded constants, not enforced here.
BUDGET_COEFF = 64
BUDGET_CONST = 32


class SimulationError(RuntimeError):
    pass


class RefereeError(SimulationError):
    """Raised (optionally) when the referee finds an invariant violation."""

    def __init__(self, violations):
        super().__init__("; ".join(str(v) for v in violations[:4]))
        self.violations = violations


@dataclass
class Msg:
    kind: str
    sender: int | None  # None: generated by the deletion event itself
    recipient: int
    payload: dict
    depth: int = 1

    def id_fields(self):
        """Every node id mentioned in the payload (knowledge tracking)."""
        ids = []

        def walk(v):
            if isinstance(v, bool) or v is None:
                return
            if isinstance(v, int):
                ids.append(v)
            elif isinstance(v, (list, tuple)):
                for x in v:
                    walk(x)
            elif isinstance(v, dict):
                for x in v.values():
                    walk(x)

        walk(self.payload)
        return ids


def msg_bits(msg: Msg, id_bits: int) -> int:
    """Cost model: ids are id_bits wide, kind strings 2 bits, bools and
    Nones 1 bit, plus a 3-bit message tag."""
    bits = 3

    def walk(v):
        nonlocal bits
        if isinstance(v, bool) or v is None:
            bits += 1
        elif isinstance(v, int):
            bits += id_bits
        elif isinstance(v, str):
            bits += 2
        elif isinstance(v, (list, tuple)):
            for x in v:
                walk(x)
        elif isinstance(v, dict):
            for x in v.values():
                walk(x)

    walk(msg.payload)
    return bits


@dataclass
class RoundRecord:
    round: int
    deleted: int
    max_degree_increase: int
    diameter: int
    max_messages_per_node: int
    max_bits_per_node: int
    recovery_latency: int
    edges_added: int
    edges_dropped: int

    def csv_row(self) -> str:
        return (
            f"{self.round},{self.deleted},{self.max_degree_increase},"
            f"{self.diameter},{self.max_messages_per_node},"
            f"{self.max_bits_per_node},{self.recovery_latency},"
            f"{self.edges_added},{self.edges_dropped}"
        )


@dataclass
class RunResult:
    records: list[RoundRecord] = field(default_factory=list)
    violations: list = field(default_factory=list)
    counters: Counter = field(default_factory=Counter)
    trace_lines: list[str] = field(default_factory=list)
    survivors: int = 0

    @property
    def max_degree_increase(self) -> int:
        return max((r.max_degree_increase for r in self.records), default=0)

    @property
    def max_messages_per_node(self) -> int:
        return max((r.max_messages_per_node for r in self.records), default=0)

    @property
    def max_bits_per_node(self) -> int:
        return max((r.max_bits_per_node for r in self.records), default=0)

    @property
    def max_latency(self) -> int:
        return max((r.recovery_latency for r in self.records), default=0)

    def trace_hash(self) -> str:
        h = hashlib.sha256()
        for line in self.trace_lines:
            h.update(line.encode())
            h.update(b"\n")
        return h.hexdigest()

    def write_metrics(self, path) -> None:
        with open(path, "w") as f:
            f.write(METRICS_HEADER + "\n")
            for r in self.records:
                f.write(r.csv_row() + "\n")

    def write_trace(self, path) -> None:
        with open(path, "w") as f:
            for line in self.trace_lines:
                f.write(line + "\n")


class Engine:
    """Owns the actual graph, the strategy's node states, and the books."""

    def __init__(
        self,
        tree: RootedTree,
        strategy,
        seed: int = 0,
        referee: str = "full",
        trace: bool = False,
        halt_on_violation: bool = True,
    ):
        if referee not in ("full", "sampled", "off"):
            raise ValueError(f"unknown referee level {referee!r}")
        self.graph = tree.to_graph()
        self.initial_tree = tree
        self.degrees0 = self.graph.degrees()
        self.n0 = len(self.degrees0)
        self.id_bits = max(1, (self.n0 - 1).bit_length())
        self.rng = random.Random(seed)
        self.seed = seed
        self.referee_level = referee
        self.trace_enabled = trace
        self.halt_on_violation = halt_on_violation
        self.round_no = 0
        self.result = RunResult()
        self.known: dict[int, set[int]] = {
            v: set(self.graph.neighbors(v)) | {v} for v in self.graph.vertices()
        }
        self._reset_round_accounts()
        self.strategy = strategy
        strategy.bind(self)
        strategy.init(tree)
        self._check_referee(initial=True)

    def _reset_round_accounts(self) -> None:
        self._sent: Counter = Counter()
        self._bits: Counter = Counter()
        self._added = 0
        self._dropped = 0
        self._cur_depth = 0
        self._max_depth = 0
        self._delivered = 0
        self._handler_dropped: set[int] = set()

    # ---- tracing ----

    def trace(self, kind: str, actor, details: dict) -> None:
        if not self.trace_enabled:
            return
        line = json.dumps(
            {"round": self.round_no, "kind": kind, "actor": actor,
             "details": details},
            sort_keys=True, separators=(",", ":"),
        )
        self.result.trace_lines.append(line)

    # ---- referee plumbing ----

    def _check_referee(self, initial: bool = False, final: bool = False) -> None:
        if self.referee_level == "off":
            return
        from . import referee

        # Sampled level: cheap degree and connectivity checks every round,
        # the full battery every 8th plus first and last.
        full = self.referee_level == "full" or initial or final \
            or self.round_no % 8 == 0
        violations = referee.check(self) if full else referee.check_light(self)
        self._record_violations(violations)

    def _record_violations(self, violations) -> None:
        if not violations:
            return
        for v in violations:
            self.trace("state_change", getattr(v, "actor", None),
                       {"event": "violation", "detail": str(v)})
        self.result.violations.extend(violations)
        if self.halt_on_violation:
            raise RefereeError(violations)

    # ---- the round ----

    def delete(self, dead: int) -> RoundRecord:
        if dead not in self.graph:
            raise SimulationError(f"cannot delete missing vertex {dead}")
        self.round_no += 1
        survivors_touched = self.graph.neighbors(dead)
        dropped = self.graph.degree(dead)
        edges_before = len(self.graph.edges())
        self.graph.remove_vertex(dead)
        self.known.pop(dead, None)
        self.trace("delete", dead, {"neighbors": survivors_touched})

        self._reset_round_accounts()
        budget = BUDGET_COEFF * (self.degrees0.get(dead, 0) + BUDGET_CONST)
        queue = self.strategy.on_delete(dead, survivors_touched)

        while queue:
            msg = queue.pop(self.rng.randrange(len(queue)))
            self._max_depth = max(self._max_depth, msg.depth)
            if msg.recipient not in self.graph:
                # Sends can legitimately race the sender learning of a
                # death (e.g. a plan update to a child not yet renamed).
                self.trace("state_change", msg.sender,
                           {"event": "undeliverable", "kind": msg.kind,
                            "to": msg.recipient})
                continue
            self._delivered += 1
            if self._delivered > budget:
                self._flag(self._quiescence_violation(dead))
                break
            self.trace("send", msg.sender,
                       {"kind": msg.kind, "to": msg.recipient,
                        "depth": msg.depth})
            self._cur_depth = msg.depth
            self.known.setdefault(msg.recipient, set()).update(msg.id_fields())
            if msg.sender is not None:
                self.known[msg.recipient].add(msg.sender)

            self._handler_dropped = set()
            out = self.strategy.handle(msg)
            for m in out:
                m.depth = msg.depth + 1
                if m.sender is not None:
                    self._bill(m.sender, msg_bits(m, self.id_bits))
                    self._check_neighbor_rule(m)
                queue.append(m)

        # Edge-count conservation, reconciled against this round's ledger.
        expect = edges_before - dropped + self._added - self._dropped
        if len(self.graph.edges()) != expect:
            raise SimulationError(
                f"edge conservation broke in round {self.round_no}: "
                f"have {len(self.graph.edges())}, ledger says {expect}"
            )

        record = RoundRecord(
            round=self.round_no,
            deleted=dead,
            max_degree_increase=self._max_degree_increase(),
            diameter=self._diameter(),
            max_messages_per_node=max(self._sent.values(), default=0),
            max_bits_per_node=max(self._bits.values(), default=0),
            recovery_latency=self._max_depth,
            edges_added=self._added,
            edges_dropped=dropped + self._dropped,
        )
        self.result.records.append(record)
        self.trace("state_change", None, {
            "event": "round_end",
            "diameter": record.diameter,
            "max_degree_increase": record.max_degree_increase,
            "latency": record.recovery_latency,
        })
        self._check_referee()
        return record

    def _quiescence_violation(self, dead: int):
        from .referee import Violation

        return Violation(
            "quiescence",
            f"round {self.round_no} exceeded its message budget", dead)

    def _check_neighbor_rule(self, m: Msg) -> None:
        """Sends must target current neighbors; an edge dropped by the very
        handler that emits the message still counts (goodbye messages)."""
        if m.recipient == m.sender or m.recipient not in self.graph:
            return
        if m.recipient in self.graph.neighbors(m.sender):
            return
        if m.recipient in self._handler_dropped:
            return
        from .referee import Violation

        self._flag(Violation(
            "neighbor",
            f"message {m.kind} to non-neighbor {m.recipient}", m.sender))

    def _flag(self, violation) -> None:
        self._record_violations([violation])

    def _bill(self, sender: int, bits: int) -> None:
        self._sent[sender] += 1
        self._bits[sender] += bits

    def edge_op(self, a: int, b: int, add: bool) -> None:
        """Synchronous port action by node a: make or drop the edge to b.

        Billed like a one-id message. Skipped silently when b is gone (a
        may hold a reference it has not yet been retargeted away from) or
        the edge is already in the requested state.
        """
        if a == b or a not in self.graph or b not in self.graph:
            return
        self._bill(a, 3 + self.id_bits + 1)
        self._max_depth = max(self._max_depth, self._cur_depth + 1)
        if add:
            if b not in self.known.get(a, set()):
                self._knowledge_violation(a, b)
            if not self.graph.has_edge(a, b):
                self.graph.add_edge(a, b)
                self.known[b].add(a)
                self._added += 1
                self.trace("edge_make", a, {"peer": b})
        else:
            if self.graph.has_edge(a, b):
                self.graph.remove_edge(a, b)
                self._dropped += 1
                self._handler_dropped.add(b)
                self.trace("edge_drop", a, {"peer": b})

    def _knowledge_violation(self, a: int, b: int) -> None:
        from .referee import Violation

        self._flag(Violation(
            "knowledge", f"made an edge to an id never received: {b}", a))

    def _max_degree_increase(self) -> int:
        worst = 0
        for v in self.graph.vertices():
            worst = max(worst, self.graph.degree(v) - self.degrees0[v])
        return worst

    def _diameter(self) -> int:
        g = self.graph
        if len(g.vertices()) <= 1:
            return 0
        # Tree fast path; the referee separately certifies tree-ness.
        if is_tree(g):
            return tree_diameter(g)
        return diameter(g)

    # ---- whole runs ----

    def run(self, adversary, rounds: int | None = None) -> RunResult:
        while self.graph.vertices():
            if rounds is not None and self.round_no >= rounds:
                break
            target = adversary.choose(self)
            if target is None:
                break
            self.delete(target)
        self._check_referee(final=True)
        self.result.counters.update(self.strategy.counters)
        self.result.survivors = len(self.graph.vertices())
        return self.result

    def clone(self, seed: int = 0) -> "Engine":
        """Independent deep copy for look-ahead adversaries; referee and
        tracing disabled in the copy."""
        twin = object.__new__(Engine)
        twin.graph = self.graph.copy()
        twin.initial_tree = self.initial_tree
        twin.degrees0 = dict(self.degrees0)
        twin.n0 = self.n0
        twin.id_bits = self.id_bits
        twin.rng = random.Random(seed)
        twin.seed = seed
        twin.referee_level = "off"
        twin.trace_enabled = False
        twin.halt_on_violation = False
        twin.round_no = self.round_no
        twin.result = RunResult()
        twin.known = {v: set(k) for v, k in self.known.items()}
        twin._reset_round_accounts()
        twin.strategy = self.strategy.clone()
        twin.strategy.bind(twin)
        return twin
