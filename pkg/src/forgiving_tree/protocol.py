"""Forgiving Tree repair protocol.

Each node runs a local state machine over the fields parent/children,
hparent/hchildren (its helper position, if it simulates one), the will for
its own children, the stored will portion from the node whose children
list it currently sits on, and pending leaf wills from childless helper
neighbors. The actual graph is the homomorphic image of a virtual tree:
real vertices (one per live node) plus helper vertices (at most one per
live node), with edges realized between simulators and self-loops
suppressed.

Every field that names a peer carries the peer's vertex kind (real vertex
or helper vertex), so a single generic retarget message — "replace entry
(old, kind) by (new, kind)" — serves heir substitution, bypass splices, and
takeover notifications without ambiguity even when one node id appears in
two distinct tree positions.

Repairs are strictly local: a deletion notice fans out only to the dead
node's graph neighbors, each survivor reacts with O(1) messages, and wills
are maintained by incremental surgery (never rebuilt after init).
"""

from __future__ import annotations

import copy
from collections import Counter
from dataclasses import dataclass, field

from .graph import RootedTree
from .harness import Msg
from .wills import (
    HELPER,
    REAL,
    ROOT,
    OwnerContext,
    Will,
    WillPortion,
    diff_portions,
    generate_sub_rt,
)

WAIT = "wait"
READY = "ready"
DEPLOYED = "deployed"


@dataclass(frozen=True)
class LeafWill:
    """What a childless helper's parent must do when the helper dies.

    takeover: parent relinquishes its own helper slot (bypass) and assumes
    the dead node's (nexthparent/payload). splice: the dead node's helper
    sat directly above its own leaf under the parent's slot; the parent
    absorbs the surviving branch in place. vanish: the helper covered only
    the dead node's own leaf and disappears with it.
    """

    kind: str
    nexthparent: int | None = None
    nexthparent_kind: str = ROOT
    payload: tuple[tuple[int, str], ...] = ()


@dataclass
class NodeState:
    node: int
    parent: int | None = None
    parent_kind: str = ROOT
    children: dict[int, str] = field(default_factory=dict)
    will: Will | None = None
    ishelper: bool = False
    hparent: int | None = None
    hparent_kind: str = ROOT
    hchildren: dict[int, str] = field(default_factory=dict)
    portion: WillPortion | None = None
    portion_seq: int = -1
    pending: dict[int, LeafWill] = field(default_factory=dict)
    pending_seq: dict[int, int] = field(default_factory=dict)
    # sender-side bookkeeping for incremental redistribution
    last_portions: dict[int, WillPortion] = field(default_factory=dict)
    send_seq: int = 0
    last_leaf_will: tuple[LeafWill, int] | None = None  # (will, recipient)

    @property
    def isreadyheir(self) -> bool:
        return self.ishelper and len(self.hchildren) == 1

    @property
    def heir_state(self) -> str:
        if not self.ishelper:
            return WAIT
        return READY if len(self.hchildren) == 1 else DEPLOYED

    def referenced(self) -> set[int]:
        refs = set(self.children) | set(self.hchildren)
        if self.parent is not None:
            refs.add(self.parent)
        if self.hparent is not None:
            refs.add(self.hparent)
        refs.discard(self.node)
        return refs

    def owner_context(self) -> OwnerContext:
        return OwnerContext(
            parent=self.parent,
            parent_kind=self.parent_kind if self.parent is not None else ROOT,
            ishelper=self.ishelper,
            hparent=self.hparent,
            hparent_kind=self.hparent_kind if self.hparent is not None else ROOT,
            hchildren=tuple(sorted(self.hchildren.items())),
            child_kinds=dict(self.children),
        )


def portion_to_payload(p: WillPortion) -> dict:
    return {
        "owner": p.owner, "child": p.child,
        "nextparent": p.nextparent, "nextparent_kind": p.nextparent_kind,
        "is_heir": p.is_heir, "assigns_helper": p.assigns_helper,
        "nexthparent": p.nexthparent, "nexthparent_kind": p.nexthparent_kind,
        "nexthchildren": [list(e) for e in p.nexthchildren],
        "owner_was_helper": p.owner_was_helper,
        "announces_top": p.announces_top, "top_kind": p.top_kind,
    }


def portion_from_payload(d: dict) -> WillPortion:
    return WillPortion(
        owner=d["owner"], child=d["child"],
        nextparent=d["nextparent"], nextparent_kind=d["nextparent_kind"],
        is_heir=d["is_heir"], assigns_helper=d["assigns_helper"],
        nexthparent=d["nexthparent"], nexthparent_kind=d["nexthparent_kind"],
        nexthchildren=tuple((e[0], e[1]) for e in d["nexthchildren"]),
        owner_was_helper=d["owner_was_helper"],
        announces_top=d["announces_top"], top_kind=d["top_kind"],
    )


class ForgivingTree:
    """Message-driven implementation bound to a simulation engine."""

    name = "ft"
    referee_profile = "ft"

    def __init__(self):
        self.states: dict[int, NodeState] = {}
        self.counters: Counter = Counter()
        self.engine = None

    def bind(self, engine) -> None:
        self.engine = engine

    def clone(self) -> "ForgivingTree":
        twin = ForgivingTree()
        twin.states = copy.deepcopy(self.states)
        twin.counters = Counter(self.counters)
        return twin

    # ---- initialization ----

    def init(self, tree: RootedTree) -> None:
        for v in tree.nodes():
            kids = tree.children[v]
            st = NodeState(node=v)
            p = tree.parent[v]
            st.parent = p
            st.parent_kind = REAL if p is not None else ROOT
            st.children = {c: REAL for c in kids}
            if kids:
                st.will = generate_sub_rt(kids, owner=v, d0=len(kids))
            self.states[v] = st
        for v, st in self.states.items():
            if st.will is None:
                continue
            portions = st.will.derive_portions(st.owner_context())
            st.last_portions = dict(portions)
            for c, p in portions.items():
                self.states[c].portion = p
                self.states[c].portion_seq = 0
                self.engine.known[c].update(self._portion_ids(p))

    @staticmethod
    def _portion_ids(p: WillPortion):
        ids = [p.owner, p.child]
        if p.nextparent is not None:
            ids.append(p.nextparent)
        if p.nexthparent is not None:
            ids.append(p.nexthparent)
        ids.extend(cid for cid, _ in p.nexthchildren)
        return ids

    # ---- round entry ----

    def on_delete(self, dead: int, neighbors: list[int]) -> list[Msg]:
        st = self.states.pop(dead)
        was_leaf = not st.children
        self.counters["deletions"] += 1
        return [
            Msg("deletion_notice", None, nb,
                {"dead": dead, "was_leaf": was_leaf})
            for nb in neighbors
        ]

    # ---- message dispatch ----

    def handle(self, msg: Msg) -> list[Msg]:
        out: list[Msg] = []
        me = self.states.get(msg.recipient)
        if me is None:
            return out
        dirty: dict[int, NodeState] = {}

        def mark(st: NodeState) -> None:
            dirty[st.node] = st

        kind = msg.kind
        if kind == "deletion_notice":
            self._on_notice(me, msg.payload["dead"], msg.payload["was_leaf"],
                            out, mark)
        elif kind == "will_portion":
            self._on_portion(me, msg)
        elif kind == "leaf_will":
            self._on_leaf_will(me, msg)
        elif kind == "retarget":
            self._on_retarget(me, msg.payload, out, mark)
        elif kind == "drop_ref":
            self._on_drop_ref(me, msg.payload["old"], msg.payload["old_kind"],
                              out, mark)
        else:
            raise ValueError(f"unknown message kind {kind!r}")

        for st in dirty.values():
            self._after_mutation(st, out)
        return out

    # ---- handlers ----

    def _on_portion(self, me: NodeState, msg: Msg) -> None:
        seq = msg.payload["seq"]
        p = portion_from_payload(msg.payload["portion"])
        if (me.portion is not None and me.portion.owner == p.owner
                and seq < me.portion_seq):
            return  # stale update overtaken in delivery order
        me.portion = p
        me.portion_seq = seq

    def _on_leaf_will(self, me: NodeState, msg: Msg) -> None:
        sender = msg.sender
        seq = msg.payload["seq"]
        if seq < me.pending_seq.get(sender, -1):
            return
        me.pending_seq[sender] = seq
        if msg.payload["kind"] == "retract":
            me.pending.pop(sender, None)
            return
        me.pending[sender] = LeafWill(
            kind=msg.payload["kind"],
            nexthparent=msg.payload["nexthparent"],
            nexthparent_kind=msg.payload["nexthparent_kind"],
            payload=tuple((e[0], e[1]) for e in msg.payload["payload"]),
        )

    def _on_notice(self, me, dead: int, was_leaf: bool, out, mark) -> None:
        if me.portion is not None and me.portion.owner == dead:
            self._execute_portion(me, out, mark)

        if dead in me.children:
            kind = me.children[dead]
            lw = me.pending.get(dead)
            if was_leaf and kind == REAL:
                # Ordinary leaf child: shrink the will in place.
                del me.children[dead]
                self._will_leaf_removal(me, dead)
                mark(me)
            elif (was_leaf and kind == HELPER and lw is not None
                  and lw.kind == "vanish"):
                # The child's one-child helper covered only its own leaf.
                del me.children[dead]
                self._will_leaf_removal(me, dead)
                self.counters["vanish"] += 1
                mark(me)
            # Otherwise the dead child had children of its own (or a live
            # parent elsewhere); its heir renames this entry via retarget.

        if dead in me.hchildren:
            lw = me.pending.get(dead)
            if lw is not None:
                if lw.kind == "takeover":
                    self._apply_takeover(me, dead, lw, out, mark)
                elif lw.kind == "splice":
                    self._apply_splice(me, dead, lw, out, mark)
                elif lw.kind == "vanish":
                    self._discard_hchild(me, dead, out)
                    self.counters["vanish"] += 1
                    mark(me)
            # No pending: the dead node had children; its heir inherits the
            # helper position and retargets us.

        me.pending.pop(dead, None)
        me.pending_seq.pop(dead, None)

    # ---- will execution (makeRT member) ----

    def _execute_portion(self, me: NodeState, out, mark) -> None:
        p = me.portion
        me.portion = None
        me.portion_seq = -1
        owner = p.owner
        before = me.heir_state
        hkids = dict(p.nexthchildren)
        # When the announced top is the heir's own relinquished helper, the
        # announce and the relinquish rename address the same entry at the
        # same holder; fusing them into one message avoids an order race.
        fuse = (p.announces_top and p.is_heir and p.owner_was_helper
                and p.top_kind == HELPER)
        surv: tuple[int, str] | None = None

        if me.ishelper and me.hparent == owner and me.hparent_kind == REAL:
            # Our entry in the owner's list was our one-child helper (a
            # ready heir's top; it hangs under the owner's real vertex, a
            # helper simulated elsewhere leaves our leaf as the entry).
            # Relinquish it: the content takes over the
            # leaf position assigned to us, and we take the new role.
            assert len(me.hchildren) == 1, "deployed helper in a children list"
            (c_id, c_kind), = me.hchildren.items()
            self.counters["relinquish"] += 1
            surv = (c_id, c_kind) if c_id != me.node else (me.node, REAL)
            if c_id == me.node:
                # The helper covered only our own leaf; the leaf moves.
                me.parent = p.nextparent
                me.parent_kind = (p.nextparent_kind
                                  if p.nextparent is not None else ROOT)
                if (p.nextparent is not None and p.nextparent != me.node
                        and not fuse):
                    m = self._retarget(
                        me.node, p.nextparent, me.node, HELPER, me.node, REAL)
                    m.payload["down_only"] = True
                    out.append(m)
            elif p.nextparent is None:
                out.append(self._drop_ref(me.node, c_id, me.node, HELPER))
            elif p.nextparent == me.node:
                # The position hangs under our own new helper, which keeps
                # the old helper's name; the content's pointer and edge
                # both carry over untouched.
                pass
            else:
                # The position holder is no neighbor of ours; the content
                # relays the rename once its own edge to the holder exists.
                # Under fuse the relayed rename must rewrite the owner's
                # entry instead of ours, so the old key rides along.
                m = self._retarget(me.node, c_id, me.node, HELPER,
                                   p.nextparent, p.nextparent_kind)
                m.payload["forward"] = True
                if fuse:
                    m.payload["forward_old"] = [owner, REAL]
                out.append(m)
            if p.nextparent == me.node and hkids.get(me.node) == HELPER:
                # Fix the pre-agreed entry locally before installing it.
                del hkids[me.node]
                hkids[surv[0]] = surv[1]
            if (c_id != me.node and c_id not in hkids
                    and c_id not in me.children):
                me.pending.pop(c_id, None)
            me.ishelper = False
            me.hparent = None
            me.hparent_kind = ROOT
            me.hchildren = {}
        else:
            me.parent = p.nextparent
            me.parent_kind = (p.nextparent_kind
                              if p.nextparent is not None else ROOT)

        if p.assigns_helper:
            self._make_helper(me, p.nexthparent, p.nexthparent_kind,
                              hkids, before)
            if p.is_heir and p.owner_was_helper:
                # Inherit the owner's helper vertex: its old neighbors
                # still name the owner.
                if p.nexthparent is not None and p.nexthparent != me.node:
                    out.append(self._retarget(
                        me.node, p.nexthparent, owner, HELPER,
                        me.node, HELPER))
                for cid, _ in p.nexthchildren:
                    if cid != me.node:
                        out.append(self._retarget(
                            me.node, cid, owner, HELPER, me.node, HELPER))
                self.counters["takeover"] += 1
            if p.announces_top:
                # Tell the owner's old parent side who replaces the owner's
                # real vertex. When a handed-off content carries the fused
                # announce, the relay above already covers it.
                target = (p.nextparent if p.is_heir and p.owner_was_helper
                          else p.nexthparent)
                new_id, new_kind = me.node, p.top_kind
                relayed = False
                if fuse and surv is not None:
                    new_id, new_kind = surv
                    relayed = surv[0] != me.node
                if not relayed and target is not None and target != me.node:
                    m = self._retarget(
                        me.node, target, owner, REAL, new_id, new_kind)
                    m.payload["down_only"] = True
                    out.append(m)
        if me.parent == me.node:
            # Our leaf sits under our own helper; the parent field names
            # the nearest vertex simulated by somebody else.
            me.parent = me.hparent
            me.parent_kind = me.hparent_kind if me.hparent is not None else ROOT
        mark(me)

    def _make_helper(self, me: NodeState, hp, hp_kind, hkids: dict,
                     before: str | None = None) -> None:
        if before is None:
            before = me.heir_state
        for cid in list(me.pending):
            # A leaf will from a node whose entry leaves our lists is inert;
            # its author names a new holder and cannot always reach us to
            # retract.
            if (cid in me.hchildren and cid not in hkids
                    and cid not in me.children):
                del me.pending[cid]
        me.ishelper = True
        me.hparent = hp
        me.hparent_kind = hp_kind if hp is not None else ROOT
        me.hchildren = hkids
        self.counters[f"{before}_to_{me.heir_state}"] += 1

    # ---- leaf-will execution ----

    def _apply_takeover(self, me, dead: int, lw: LeafWill, out, mark) -> None:
        if me.hchildren.get(dead) != REAL or not me.ishelper:
            return  # inconsistent; the referee reports the stuck state
        before = me.heir_state
        del me.hchildren[dead]
        surv = None
        if me.hchildren:
            (s_id, s_kind), = me.hchildren.items()
            surv = (s_id, s_kind)
        payload = dict(lw.payload)
        quiet: set[int] = set()
        if payload.get(me.node) == HELPER:
            # The dead helper stood directly above our own. The old helper
            # dissolves into the inherited position: its content, if any,
            # stands where it stood, under a helper of the same name whose
            # pointers need no update.
            del payload[me.node]
            if surv is not None:
                payload[surv[0]] = surv[1]
                quiet.add(surv[0])
            self.counters["bypass"] += 1
        elif surv is not None:
            # Bypass: our helper drops to one child and is spliced out.
            s_id, s_kind = surv
            if me.hparent is not None:
                m = self._retarget(
                    me.node, me.hparent, me.node, HELPER, s_id, s_kind)
                m.payload["down_only"] = True
                out.append(m)
                if s_id == me.node:
                    me.parent = me.hparent
                    me.parent_kind = me.hparent_kind
                else:
                    out.append(self._retarget(
                        me.node, s_id, me.node, HELPER,
                        me.hparent, me.hparent_kind))
            else:
                if s_id == me.node:
                    me.parent = None
                    me.parent_kind = ROOT
                else:
                    out.append(self._drop_ref(me.node, s_id, me.node, HELPER))
            self.counters["bypass"] += 1
        else:
            # Our helper lost its only child and vanishes outright.
            if me.hparent is not None:
                out.append(self._drop_ref(
                    me.node, me.hparent, me.node, HELPER))
                if me.portion is not None and me.portion.owner == me.hparent:
                    me.portion = None
                    me.portion_seq = -1
        if not payload:
            # The whole covered branch died with the dead node; walk away
            # from the helper role and tell the position's holder over a
            # one-shot edge.
            me.ishelper = False
            me.hparent = None
            me.hparent_kind = ROOT
            me.hchildren = {}
            self.counters[f"{before}_to_{me.heir_state}"] += 1
            self.counters["takeover"] += 1
            if lw.nexthparent is not None:
                self.engine.edge_op(me.node, lw.nexthparent, add=True)
                out.append(self._drop_ref(
                    me.node, lw.nexthparent, dead, HELPER))
            mark(me)
            return
        self._make_helper(me, lw.nexthparent, lw.nexthparent_kind,
                          payload, before)
        if me.hchildren.get(me.node) == REAL:
            # Our own leaf rode along into the inherited position.
            me.parent = me.hparent
            me.parent_kind = (me.hparent_kind
                              if me.hparent is not None else ROOT)
        if me.hparent is not None and me.hparent != me.node:
            out.append(self._retarget(
                me.node, me.hparent, dead, HELPER, me.node, HELPER))
        for cid in payload:
            if cid != me.node and cid not in quiet:
                out.append(self._retarget(
                    me.node, cid, dead, HELPER, me.node, HELPER))
        self.counters["takeover"] += 1
        mark(me)

    def _apply_splice(self, me, dead: int, lw: LeafWill, out, mark) -> None:
        if me.hchildren.get(dead) != HELPER:
            return
        del me.hchildren[dead]
        for cid, ck in lw.payload:
            me.hchildren[cid] = ck
            if cid == me.node:
                # Our own leaf now hangs directly under our helper; the
                # parent field skips self-simulated vertices upward.
                me.parent = me.hparent
                me.parent_kind = (me.hparent_kind
                                  if me.hparent is not None else ROOT)
            else:
                out.append(self._retarget(
                    me.node, cid, dead, HELPER, me.node, HELPER))
        self.counters["splice"] += 1
        mark(me)

    def _discard_hchild(self, me, dead: int, out) -> None:
        me.hchildren.pop(dead, None)
        if me.ishelper and not me.hchildren:
            # Cascading collapse: our helper lost its last child.
            if me.hparent is not None:
                out.append(self._drop_ref(
                    me.node, me.hparent, me.node, HELPER))
                if me.portion is not None and me.portion.owner == me.hparent:
                    me.portion = None
                    me.portion_seq = -1
            me.ishelper = False
            me.hparent = None
            me.hparent_kind = ROOT

    # ---- reference rewiring ----

    def _on_retarget(self, me: NodeState, pl: dict, out, mark) -> None:
        old, old_kind = pl["old"], pl["old_kind"]
        new, new_kind = pl["new"], pl["new_kind"]
        # A rename of a dissolved helper top must not touch upward fields:
        # the same (node, helper) name may be reborn as a live internal
        # vertex that upward references legitimately point at.
        down_only = bool(pl.get("down_only"))
        hit = False
        upward = None
        if not down_only:
            if me.parent == old and me.parent_kind == old_kind:
                me.parent, me.parent_kind = new, new_kind
                hit = True
                upward = REAL
            if me.hparent == old and me.hparent_kind == old_kind:
                me.hparent, me.hparent_kind = new, new_kind
                hit = True
                upward = HELPER
        if pl.get("forward") and upward is not None and new != me.node:
            # A relinquishing heir cannot reach our new parent itself; we
            # hold (or are about to get) the edge, so we pass the rename on.
            # forward_old substitutes the entry key the relay rewrites.
            fo = pl.get("forward_old")
            f_old, f_kind = (fo[0], fo[1]) if fo is not None else (old, old_kind)
            m = self._retarget(me.node, new, f_old, f_kind, me.node, upward)
            m.payload["down_only"] = True
            out.append(m)
        if me.parent == me.node and me.portion is None:
            # Relocated under our own helper; skip to its parent.
            me.parent = me.hparent
            me.parent_kind = (me.hparent_kind
                              if me.hparent is not None else ROOT)
            hit = True
        if me.children.get(old) == old_kind:
            del me.children[old]
            me.children[new] = new_kind
            if me.will is not None and old in me.will.leaf_slot:
                me.will.substitute(old, new)
                self.counters["substitution"] += 1
                self.engine.trace("state_change", me.node,
                                  {"event": "substitution",
                                   "old": old, "new": new})
            hit = True
        if me.hchildren.get(old) == old_kind:
            del me.hchildren[old]
            me.hchildren[new] = new_kind
            hit = True
        if self._rewrite_mirrors(me, old, old_kind, new, new_kind, down_only):
            hit = True
        if hit:
            mark(me)

    def _rewrite_mirrors(self, me, old, old_kind, new, new_kind,
                         down_only=False) -> bool:
        """Keep stored plans consistent when their referents get renamed."""
        hit = False
        p = me.portion
        if p is not None:
            changes = {}
            if (not down_only and p.nextparent == old
                    and p.nextparent_kind == old_kind):
                changes["nextparent"], changes["nextparent_kind"] = new, new_kind
            if (not down_only and p.nexthparent == old
                    and p.nexthparent_kind == old_kind):
                changes["nexthparent"], changes["nexthparent_kind"] = new, new_kind
            if (old, old_kind) in p.nexthchildren:
                changes["nexthchildren"] = tuple(
                    (new, new_kind) if e == (old, old_kind) else e
                    for e in p.nexthchildren
                )
            if changes:
                from dataclasses import replace

                me.portion = replace(p, **changes)
                hit = True
        for sender, lw in list(me.pending.items()):
            changes = {}
            if (not down_only and lw.nexthparent == old
                    and lw.nexthparent_kind == old_kind):
                changes["nexthparent"], changes["nexthparent_kind"] = new, new_kind
            if (old, old_kind) in lw.payload:
                changes["payload"] = tuple(
                    (new, new_kind) if e == (old, old_kind) else e
                    for e in lw.payload
                )
            if changes:
                from dataclasses import replace

                me.pending[sender] = replace(lw, **changes)
                hit = True
        return hit

    def _on_drop_ref(self, me: NodeState, old, old_kind, out, mark) -> None:
        hit = False
        gone = False
        if me.children.get(old) == old_kind:
            del me.children[old]
            self._will_leaf_removal(me, old)
            hit = gone = True
        if me.hchildren.get(old) == old_kind:
            self._discard_hchild(me, old, out)
            hit = gone = True
        if me.parent == old and me.parent_kind == old_kind:
            me.parent = None
            me.parent_kind = ROOT
            hit = True
        if me.hparent == old and me.hparent_kind == old_kind:
            me.hparent = None
            me.hparent_kind = ROOT
            hit = True
        if gone and old not in me.children and old not in me.hchildren:
            me.pending.pop(old, None)
        if hit:
            mark(me)

    # ---- owner-side will maintenance ----

    def _will_leaf_removal(self, me: NodeState, dead: int) -> None:
        if me.will is None or dead not in me.will.leaf_slot:
            return
        new_heir = me.will.remove_leaf(dead)
        if new_heir is not None:
            self.counters["heir_redesignation"] += 1
            self.engine.trace("state_change", me.node,
                              {"event": "heir_redesignation",
                               "heir": new_heir})

    def _leaf_will_of(self, me: NodeState) -> LeafWill | None:
        if me.children or not me.ishelper:
            return None
        self_kind = me.hchildren.get(me.node)
        if self_kind is not None and len(me.hchildren) == 1:
            return LeafWill("vanish")
        if self_kind is not None:
            payload = tuple(sorted(
                (c, k) for c, k in me.hchildren.items() if c != me.node))
            return LeafWill("splice", payload=payload)
        return LeafWill(
            "takeover",
            nexthparent=me.hparent,
            nexthparent_kind=me.hparent_kind if me.hparent is not None else ROOT,
            payload=tuple(sorted(me.hchildren.items())),
        )

    # ---- post-mutation sweep ----

    def _after_mutation(self, me: NodeState, out) -> None:
        # Edge reconciliation against the actual graph.
        refs = me.referenced()
        current = set(self.engine.graph.neighbors(me.node))
        for peer in sorted(refs - current):
            self.engine.edge_op(me.node, peer, add=True)
        for peer in sorted(current - refs):
            self.engine.edge_op(me.node, peer, add=False)

        # Redistribute only the will portions that changed.
        if me.will is not None and me.will.root is not None:
            fresh = me.will.derive_portions(me.owner_context())
            changed = diff_portions(me.last_portions, fresh)
            for child, portion in sorted(changed.items()):
                me.send_seq += 1
                out.append(Msg(
                    "will_portion", me.node, child,
                    {"portion": portion_to_payload(portion),
                     "seq": me.send_seq},
                ))
            me.last_portions = dict(fresh)
        elif me.will is not None:
            me.last_portions = {}

        # Childless helpers keep a current leaf will at their parent;
        # retract when it lapses or the parent changes.
        lw = self._leaf_will_of(me)
        cur = ((lw, me.parent)
               if lw is not None and me.parent is not None else None)
        if cur != me.last_leaf_will:
            old = me.last_leaf_will
            if (old is not None and (cur is None or old[1] != cur[1])
                    and self.engine.graph.has_edge(me.node, old[1])):
                # An unreachable former holder has already disowned our
                # entry and prunes the will with it.
                me.send_seq += 1
                out.append(Msg(
                    "leaf_will", me.node, old[1],
                    {"kind": "retract", "nexthparent": None,
                     "nexthparent_kind": ROOT, "payload": [],
                     "seq": me.send_seq},
                ))
            if cur is not None:
                me.send_seq += 1
                out.append(Msg(
                    "leaf_will", me.node, cur[1],
                    {"kind": lw.kind, "nexthparent": lw.nexthparent,
                     "nexthparent_kind": lw.nexthparent_kind,
                     "payload": [list(e) for e in lw.payload],
                     "seq": me.send_seq},
                ))
                self.engine.trace("state_change", me.node,
                                  {"event": "leaf_will", "kind": lw.kind})
            me.last_leaf_will = cur

    # ---- message constructors ----

    @staticmethod
    def _retarget(frm: int, to: int, old: int, old_kind: str, new: int,
                  new_kind: str) -> Msg:
        return Msg("retarget", frm, to,
                   {"old": old, "old_kind": old_kind,
                    "new": new, "new_kind": new_kind})

    @staticmethod
    def _drop_ref(frm: int, to: int, old: int, old_kind: str) -> Msg:
        return Msg("drop_ref", frm, to, {"old": old, "old_kind": old_kind})
