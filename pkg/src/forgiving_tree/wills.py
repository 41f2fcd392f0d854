"""Wills: per-node reconstruction plans.

A node with children keeps a *will*: a full binary tree of slots whose
leaves stand for its children and whose internal slots are each simulated
by one non-heir child. If the owner is deleted, the children realize the
will's shape among themselves, so the owner's neighborhood reconnects with
every pairwise distance at most twice the slot depth.

Construction puts the leaves in ascending id order and makes the slot tree
a balanced binary search tree on ids: recursive midpoint split, where the
internal slot created at a split is simulated by the maximum-id leaf of the
left half. The in-order walk is then l1 h1 l2 h2 ... l(d-1) h(d-1) ld with
sim(hk) == sim(lk), the highest-id child (the heir) owning no internal slot.

After construction the will is maintained only by two local surgeries
(leaf removal and substitution). Both preserve the full-binary shape, the
one-internal-slot-per-non-heir-child rule, and the in-order pairing, and
never increase depth, so every repair retransmits O(1) portions.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

REAL = "real"
HELPER = "helper"
ROOT = "root"


class WillError(ValueError):
    """Structurally invalid will operation."""


@dataclass
class Slot:
    sim: int
    is_leaf: bool
    left: "Slot | None" = None
    right: "Slot | None" = None
    parent: "Slot | None" = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class WillPortion:
    """One child's share of a will, exactly what it needs on owner death.

    `nextparent` is the peer of the child's replacement parent edge.
    When `assigns_helper`, the child must additionally take up a helper
    position whose parent is `nexthparent` (None meaning the virtual root)
    and whose children are `nexthchildren`. Entries are (node id, vertex
    kind) pairs; kinds distinguish a real vertex from a helper vertex
    simulated by that node.

    Exactly one child per will announces the structure's new top to the
    owner's old parent side (`announces_top`): the heir when the owner was
    an ordinary node (its fresh one-child helper is the top), or the root
    slot's simulator when the owner was itself a helper (the slot tree
    slides into the owner's place). `top_kind` is the vertex kind the
    parent-side entry must be renamed to.
    """

    owner: int
    child: int
    nextparent: int | None
    nextparent_kind: str
    is_heir: bool
    assigns_helper: bool
    nexthparent: int | None = None
    nexthparent_kind: str = ROOT
    nexthchildren: tuple[tuple[int, str], ...] = ()
    owner_was_helper: bool = False
    announces_top: bool = False
    top_kind: str = HELPER


@dataclass(frozen=True)
class OwnerContext:
    """The owner-local fields a portion derivation depends on."""

    parent: int | None
    parent_kind: str
    ishelper: bool
    hparent: int | None = None
    hparent_kind: str = ROOT
    hchildren: tuple[tuple[int, str], ...] = ()
    child_kinds: dict[int, str] | None = None  # children-list entry kinds


class Will:
    """Slot tree plus heir designation for one owner."""

    def __init__(self, owner: int, root: Slot | None, heir: int | None, d0: int):
        self.owner = owner
        self.root = root
        self.heir = heir
        self.d0 = max(d0, 1)
        self.version = 0
        self._index()

    # ---- structure access ----

    def _index(self) -> None:
        self.leaf_slot: dict[int, Slot] = {}
        self.internal_slot: dict[int, Slot] = {}
        if self.root is None:
            return
        stack = [self.root]
        while stack:
            s = stack.pop()
            if s.is_leaf:
                if s.sim in self.leaf_slot:
                    raise WillError(f"duplicate leaf sim {s.sim}")
                self.leaf_slot[s.sim] = s
            else:
                if s.sim in self.internal_slot:
                    raise WillError(f"duplicate internal sim {s.sim}")
                self.internal_slot[s.sim] = s
                stack.append(s.left)  # type: ignore[arg-type]
                stack.append(s.right)  # type: ignore[arg-type]

    def children(self) -> list[int]:
        return sorted(self.leaf_slot)

    def in_order(self) -> list[tuple[str, int]]:
        out: list[tuple[str, int]] = []

        def walk(s: Slot | None) -> None:
            if s is None:
                return
            if s.is_leaf:
                out.append(("leaf", s.sim))
                return
            walk(s.left)
            out.append(("int", s.sim))
            walk(s.right)

        walk(self.root)
        return out

    def depth(self) -> int:
        if self.root is None:
            return 0
        best = 0
        stack = [(self.root, 0)]
        while stack:
            s, d = stack.pop()
            if s.is_leaf:
                best = max(best, d)
            else:
                stack.append((s.left, d + 1))  # type: ignore[arg-type]
                stack.append((s.right, d + 1))  # type: ignore[arg-type]
        return best

    def _root_sim(self) -> int:
        assert self.root is not None
        return self.root.sim

    # ---- portions ----

    def derive_portions(self, ctx: OwnerContext) -> dict[int, WillPortion]:
        """Compute every child's portion under the owner's current fields."""
        if self.root is None:
            return {}
        kinds = ctx.child_kinds or {}
        out: dict[int, WillPortion] = {}
        for child in self.children():
            out[child] = self._portion_for(child, ctx, kinds)
        return out

    def _slot_vertex(self, s: Slot, kinds: dict[int, str]) -> tuple[int, str]:
        if s.is_leaf:
            return (s.sim, kinds.get(s.sim, REAL))
        return (s.sim, HELPER)

    def _self_covering(self, ctx: OwnerContext) -> bool:
        """Owner's helper covers the owner's own leaf (entry in own list).

        Then the will's top slides in under that helper, which the heir
        inherits, rather than under the owner's parent.
        """
        return ctx.ishelper and (self.owner, REAL) in ctx.hchildren

    def _up_sim(self, s: Slot, ctx: OwnerContext) -> tuple[int | None, str]:
        """Simulator of the slot's parent, resolving the top attachment."""
        if s.parent is not None:
            return (s.parent.sim, HELPER)
        # s is the will root. A helper owner's structure slides in where
        # its real vertex was; otherwise it hangs under the heir's helper
        # (freshly raised, or inherited in the self-covering case).
        if ctx.ishelper and not self._self_covering(ctx):
            return (ctx.parent, ctx.parent_kind)
        return (self.heir, HELPER)

    def _portion_for(
        self, child: int, ctx: OwnerContext, kinds: dict[int, str]
    ) -> WillPortion:
        l = self.leaf_slot[child]
        h = self.internal_slot.get(child)

        # Parent edge peer. A real top directly under the child's own
        # internal slot attaches one level up (a vertex cannot edge to its
        # own simulator); a helper top (ready heir) stays put, since its
        # relinquished content, not the child itself, fills that position.
        # For the heir of a single-child will the root case still names the
        # heir's own helper; the executor resolves that upward after
        # installing it.
        if h is not None and l.parent is h and kinds.get(child, REAL) == REAL:
            up, up_kind = self._up_sim(h, ctx)
        else:
            up, up_kind = self._up_sim(l, ctx)

        if child != self.heir:
            assert h is not None, f"non-heir {child} lacks an internal slot"
            hp, hp_kind = self._up_sim(h, ctx)
            hkids = (
                self._slot_vertex(h.left, kinds),  # type: ignore[arg-type]
                self._slot_vertex(h.right, kinds),  # type: ignore[arg-type]
            )
            return WillPortion(
                owner=self.owner,
                child=child,
                nextparent=up,
                nextparent_kind=up_kind,
                is_heir=False,
                assigns_helper=True,
                nexthparent=hp,
                nexthparent_kind=hp_kind if hp is not None else ROOT,
                nexthchildren=hkids,
                owner_was_helper=ctx.ishelper,
                announces_top=(ctx.ishelper and h is self.root
                               and not self._self_covering(ctx)),
                top_kind=HELPER,
            )

        # Heir portion: inherit the owner's helper position outright, or
        # raise a new one-child helper above the will root.
        if ctx.ishelper:
            # The owner's own leaf dies with it; in its place the inherited
            # helper receives the will's top.
            hkids = tuple(
                self._slot_vertex(self.root, kinds)
                if e == (self.owner, REAL) else e
                for e in ctx.hchildren
            )
            return WillPortion(
                owner=self.owner,
                child=child,
                nextparent=up,
                nextparent_kind=up_kind,
                is_heir=True,
                assigns_helper=True,
                nexthparent=ctx.hparent,
                nexthparent_kind=ctx.hparent_kind if ctx.hparent is not None else ROOT,
                nexthchildren=hkids,
                owner_was_helper=True,
                announces_top=(self.root.is_leaf
                               and not self._self_covering(ctx)),
                # Announced only when the will is a single leaf: the heir's
                # own top slides into the owner's old real position, so the
                # kind is whatever the heir's entry in the owner's list was.
                top_kind=kinds.get(child, REAL),
            )
        return WillPortion(
            owner=self.owner,
            child=child,
            nextparent=up,
            nextparent_kind=up_kind,
            is_heir=True,
            assigns_helper=True,
            nexthparent=ctx.parent,
            nexthparent_kind=ctx.parent_kind if ctx.parent is not None else ROOT,
            nexthchildren=(self._slot_vertex(self.root, kinds),),
            owner_was_helper=False,
            announces_top=True,
            top_kind=HELPER,
        )

    # ---- surgeries ----

    def remove_leaf(self, dead: int) -> int | None:
        """Excise a dead child. Returns the newly designated heir, if any.

        The dead child's leaf slot goes away with its parent slot (spliced
        out); the dead child's internal slot, if distinct, is re-simulated
        by the child that owned the spliced slot. If the dead child was the
        heir, that child becomes the heir instead: it is exactly the
        survivor whose planned helper just dropped from degree 3 to 2.
        """
        if dead not in self.leaf_slot:
            raise WillError(f"{dead} is not a leaf of will {self.owner}")
        self.version += 1
        l = self.leaf_slot.pop(dead)
        p = l.parent
        if p is None:
            # Last child; the will empties.
            self.root = None
            self.heir = None
            return None
        sibling = p.right if p.left is l else p.left
        assert sibling is not None
        grand = p.parent
        sibling.parent = grand
        if grand is None:
            self.root = sibling
        elif grand.left is p:
            grand.left = sibling
        else:
            grand.right = sibling
        survivor = p.sim
        del self.internal_slot[survivor]

        new_heir: int | None = None
        if dead == self.heir:
            # survivor != dead: the heir never simulates an internal slot.
            self.heir = new_heir = survivor
        elif p.sim != dead:
            # Hand the dead child's internal slot to the freed survivor.
            h = self.internal_slot.pop(dead)
            h.sim = survivor
            self.internal_slot[survivor] = h
        else:
            # p was the dead child's own internal slot; both gone at once.
            pass
        return new_heir

    def substitute(self, dead: int, successor: int) -> None:
        """Rename every slot the dead child simulated to its successor."""
        if dead not in self.leaf_slot:
            raise WillError(f"{dead} is not a leaf of will {self.owner}")
        if successor in self.leaf_slot:
            raise WillError(f"{successor} already present in will {self.owner}")
        self.version += 1
        l = self.leaf_slot.pop(dead)
        l.sim = successor
        self.leaf_slot[successor] = l
        h = self.internal_slot.pop(dead, None)
        if h is not None:
            h.sim = successor
            self.internal_slot[successor] = h
        if self.heir == dead:
            self.heir = successor

    # ---- validation (referee side) ----

    def check_structure(self) -> list[str]:
        """Invariant scan; returns human-readable problems, empty if sound."""
        problems = []
        if self.root is None:
            if self.leaf_slot or self.internal_slot:
                problems.append("empty will with indexed slots")
            return problems
        seq = self.in_order()
        leaves = [s for k, s in seq if k == "leaf"]
        ints = [s for k, s in seq if k == "int"]
        if len(ints) != len(leaves) - 1:
            problems.append(
                f"slot counts off: {len(leaves)} leaves, {len(ints)} internals"
            )
        for i, (kind, _) in enumerate(seq):
            want = "leaf" if i % 2 == 0 else "int"
            if kind != want:
                problems.append(f"in-order position {i} is {kind}, wanted {want}")
                break
        # Pairing: each internal is simulated by the leaf just before it.
        for i in range(1, len(seq), 2):
            if seq[i][1] != seq[i - 1][1]:
                problems.append(
                    f"internal at in-order {i} simmed by {seq[i][1]}, "
                    f"leaf before it by {seq[i - 1][1]}"
                )
        if self.heir is not None:
            if self.heir not in self.leaf_slot:
                problems.append(f"heir {self.heir} is not a child")
            if self.heir in self.internal_slot:
                problems.append(f"heir {self.heir} holds an internal slot")
        elif self.leaf_slot:
            problems.append("non-empty will without an heir")
        import math

        if self.leaf_slot and self.depth() > max(1, math.ceil(math.log2(self.d0))):
            if len(self.leaf_slot) > 1:
                problems.append(
                    f"depth {self.depth()} exceeds ceil(log2 {self.d0})"
                )
        return problems


def generate_sub_rt(children: list[int], owner: int, d0: int | None = None) -> Will:
    """Build the balanced reconstruction plan over `children`.

    Leaves ascending by id; heir = highest id; internal slot at each
    midpoint split simulated by the maximum-id leaf of the left half.
    Leaf depth is exactly ceil(log2 d) for d >= 2.
    """
    if len(set(children)) != len(children):
        raise WillError("duplicate children")
    leaves = sorted(children)
    if not leaves:
        return Will(owner, None, None, d0 or 1)

    def build(lo: int, hi: int) -> Slot:
        if lo == hi:
            return Slot(sim=leaves[lo], is_leaf=True)
        mid = lo + (hi - lo + 1 + 1) // 2 - 1  # left half takes ceil(c/2)
        node = Slot(sim=leaves[mid], is_leaf=False)
        node.left = build(lo, mid)
        node.right = build(mid + 1, hi)
        node.left.parent = node
        node.right.parent = node
        return node

    root = build(0, len(leaves) - 1)
    return Will(owner, root, leaves[-1], d0 if d0 is not None else len(leaves))


def diff_portions(
    old: dict[int, WillPortion], new: dict[int, WillPortion]
) -> dict[int, WillPortion]:
    """Portions in `new` that differ from what was previously sent."""
    return {c: p for c, p in new.items() if old.get(c) != p}
