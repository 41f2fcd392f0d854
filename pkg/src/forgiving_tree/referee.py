"""Invariant checking.

The Forgiving Tree checks reconstruct the virtual tree purely from node
fields: each live node contributes its real vertex and, if it simulates a
helper, that helper vertex. Upward claims (parent/hparent fields) must
agree exactly with downward claims (children/hchildren entries), the
result must be a single rooted tree, and projecting it onto node ids
(dropping self-loops) must reproduce the actual graph edge for edge.
Stored plans are cross-checked against what their owners would currently
derive, so a lost or stale message cannot hide until the next death.

Baseline strategies only promise a connected tree; their profile checks
just that.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graph import is_tree
from .wills import HELPER, REAL


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    actor: int | None = None

    def __str__(self) -> str:
        at = f" @{self.actor}" if self.actor is not None else ""
        return f"[{self.code}]{at} {self.message}"


def check(engine) -> list:
    profile = getattr(engine.strategy, "referee_profile", "baseline")
    if profile == "ft":
        return _check_ft(engine)
    return _check_baseline(engine)


def check_light(engine) -> list:
    """Cheap every-round subset for the sampled referee level."""
    profile = getattr(engine.strategy, "referee_profile", "baseline")
    if profile != "ft":
        return _check_baseline(engine)
    out = []
    g = engine.graph
    for v in g.vertices():
        inc = g.degree(v) - engine.degrees0.get(v, 0)
        if inc > 3:
            out.append(Violation("degree_cap", f"degree increased by {inc}", v))
    if len(g.vertices()) > 1 and not g.is_connected():
        out.append(Violation("connectivity", "graph is disconnected"))
    return out


def _check_baseline(engine) -> list:
    out = []
    g = engine.graph
    n = len(g.vertices())
    if n > 1 and not g.is_connected():
        out.append(Violation("connectivity", "graph is disconnected"))
    if n >= 1 and not is_tree(g):
        out.append(Violation("acyclic", "graph is not a tree"))
    return out


def _check_ft(engine) -> list:
    out = []
    g = engine.graph
    live = set(g.vertices())
    states = engine.strategy.states
    if set(states) != live:
        out.append(Violation(
            "state_sync",
            f"state table holds {sorted(set(states) ^ live)} out of sync"))
        return out
    if not live:
        return out

    verts = {(v, REAL) for v in live}
    verts |= {(v, HELPER) for v in live if states[v].ishelper}

    # Upward claims, with self-simulated vertices unskipped.
    up: dict = {}
    for v, st in states.items():
        if st.ishelper:
            if not 1 <= len(st.hchildren) <= 2:
                out.append(Violation(
                    "helper_degree",
                    f"helper has {len(st.hchildren)} children", v))
            up[(v, HELPER)] = ((st.hparent, st.hparent_kind)
                               if st.hparent is not None else None)
        elif st.hchildren or st.hparent is not None:
            out.append(Violation(
                "helper_residue", "non-helper with helper fields set", v))
        if st.hchildren.get(v) == REAL:
            if (st.parent, st.parent_kind) != (st.hparent, st.hparent_kind):
                out.append(Violation(
                    "self_skip",
                    "own leaf under own helper but parent != hparent", v))
            up[(v, REAL)] = (v, HELPER)
        else:
            up[(v, REAL)] = ((st.parent, st.parent_kind)
                             if st.parent is not None else None)

    # Downward claims.
    down: dict = {}

    def claim(cv, pv, holder):
        if cv not in verts:
            out.append(Violation(
                "dangling_entry", f"entry {cv} names no live vertex", holder))
        elif cv in down:
            out.append(Violation(
                "double_parent", f"{cv} claimed by two parents", holder))
        else:
            down[cv] = pv

    for v, st in states.items():
        for c, k in st.children.items():
            claim((c, k), (v, REAL), v)
        if st.ishelper:
            for c, k in st.hchildren.items():
                claim((c, k), (v, HELPER), v)

    for x in sorted(verts):
        if up.get(x) != down.get(x):
            out.append(Violation(
                "updown_mismatch",
                f"{x}: points up at {up.get(x)}, held by {down.get(x)}",
                x[0]))

    roots = sorted(x for x in verts if up.get(x) is None)
    if len(roots) != 1:
        out.append(Violation("root_count", f"virtual roots: {roots}"))
    elif not out:
        kids: dict = {}
        for cv, pv in down.items():
            kids.setdefault(pv, []).append(cv)
        seen = set()
        stack = [roots[0]]
        while stack:
            x = stack.pop()
            if x in seen:
                out.append(Violation("virtual_cycle", f"revisited {x}"))
                break
            seen.add(x)
            stack.extend(kids.get(x, []))
        if len(seen) != len(verts):
            out.append(Violation(
                "virtual_disconnected",
                f"{len(verts) - len(seen)} vertices unreachable from root"))

    # Children-list entries are tops: a helper entry must be a ready heir
    # (one-child helper), a real entry must not be simulating a helper
    # somewhere else, or the next execution would need two helper roles.
    for v, st in states.items():
        for c, k in st.children.items():
            sc = states.get(c)
            if sc is None:
                continue  # flagged as dangling_entry above
            if k == HELPER and not sc.isreadyheir:
                out.append(Violation(
                    "deployed_in_children",
                    f"children entry ({c}, helper) is not a ready heir", v))
            if k == REAL and sc.ishelper:
                out.append(Violation(
                    "busy_child",
                    f"children entry ({c}, real) already simulates a helper",
                    v))

    # Homomorphic image must be the actual graph, exactly.
    image = set()
    for cv, pv in down.items():
        if cv[0] != pv[0]:
            image.add((min(cv[0], pv[0]), max(cv[0], pv[0])))
    actual = {(min(a, b), max(a, b)) for a, b in g.edges()}
    if image != actual:
        ghost = sorted(image - actual)[:3]
        missing = sorted(actual - image)[:3]
        out.append(Violation(
            "homomorphism",
            f"virtual-only edges {ghost}, graph-only edges {missing}"))

    for v in sorted(live):
        inc = g.degree(v) - engine.degrees0.get(v, 0)
        if inc > 3:
            out.append(Violation(
                "degree_cap", f"degree increased by {inc}", v))

    # The actual graph is only the image of the virtual tree; collapsing
    # self-simulated vertices legitimately creates cycles, so tree-ness is
    # certified on the virtual side alone. Connectivity must still hold.
    if len(live) > 1 and not g.is_connected():
        out.append(Violation("connectivity", "graph is disconnected"))

    # Plans: wills cover exactly the current children; every delivered
    # portion and pending leaf will matches a fresh derivation. Every input
    # read below is covered by the fingerprint (wills mutate in place and
    # bump .version on each change), so an owner whose fingerprint matches
    # its last clean verdict is skipped.
    pcache = getattr(engine, "_plans_cache", None) or {}
    pfresh = {}
    for v, st in sorted(states.items()):
        if st.children:
            if st.will is None or st.will.root is None:
                out.append(Violation("will_missing", "children but no will", v))
            else:
                fp = (st.will.version,
                      tuple(sorted(st.children.items())),
                      st.parent, st.parent_kind, st.hparent, st.hparent_kind,
                      st.ishelper, tuple(sorted(st.hchildren.items())),
                      tuple((c, getattr(states.get(c), "portion", None))
                            for c in sorted(st.children)))
                if pcache.get(v) == fp:
                    pfresh[v] = fp
                else:
                    mark = len(out)
                    for problem in st.will.check_structure():
                        out.append(Violation("will_structure", problem, v))
                    if set(st.will.children()) != set(st.children):
                        out.append(Violation(
                            "will_leaves",
                            f"will covers {st.will.children()}, "
                            f"children are {sorted(st.children)}", v))
                    elif st.will.heir not in st.children:
                        out.append(Violation(
                            "will_heir", f"heir {st.will.heir} not a child", v))
                    else:
                        derived = st.will.derive_portions(st.owner_context())
                        for c, p in derived.items():
                            sc = states.get(c)
                            if sc is not None and sc.portion != p:
                                out.append(Violation(
                                    "portion_stale",
                                    f"portion from {v} out of date", c))
                    if len(out) == mark:
                        pfresh[v] = fp
        if st.portion is not None:
            o = st.portion.owner
            if o not in states or v not in states[o].children:
                out.append(Violation(
                    "portion_orphan", f"holds portion from {o}", v))
    engine._plans_cache = pfresh

    for v, st in sorted(states.items()):
        lw = engine.strategy._leaf_will_of(st)
        if lw is not None and st.parent is not None:
            peer = states.get(st.parent)
            if peer is None or peer.pending.get(v) != lw:
                out.append(Violation(
                    "leaf_will_stale",
                    f"parent {st.parent} lacks current leaf will", v))
        for sender, plw in st.pending.items():
            sst = states.get(sender)
            if (sst is None or sst.parent != v
                    or engine.strategy._leaf_will_of(sst) != plw):
                out.append(Violation(
                    "pending_stale", f"stale leaf will from {sender}", v))

    for v, st in sorted(states.items()):
        for r in sorted(st.referenced()):
            if r not in live:
                out.append(Violation(
                    "dead_reference", f"references dead node {r}", v))

    _sandbox_wills(engine, states, out)
    return out


def _sandbox_wills(engine, states, out) -> None:
    """Execute every live will from the copies its children actually hold.

    The assembly below never touches the owner's slot tree: it pieces the
    replacement structure together from the distributed portions alone and
    checks that a legal reconstruction would come out. A stale or corrupted
    copy that happens to look plausible in isolation surfaces here as an
    incoherent plan before any deletion relies on it.

    Assembly is pure in (owner fields, held portions, initial tree), so an
    owner whose inputs are unchanged since its last clean check is skipped;
    repair is local, which keeps this near O(1) owners per round.
    """
    cache = getattr(engine, "_sandbox_cache", None) or {}
    fresh = {}
    for v, st in sorted(states.items()):
        if not st.children:
            continue
        ports = {}
        for c in st.children:
            sc = states.get(c)
            pc = sc.portion if sc is not None else None
            if pc is None or pc.owner != v:
                ports = None  # reported as portion_stale/portion_orphan
                break
            ports[c] = pc
        if ports is None:
            continue
        fp = (tuple(sorted(st.children.items())),
              st.parent, st.parent_kind, st.hparent, st.hparent_kind,
              st.ishelper, tuple(sorted(st.hchildren.items())),
              tuple(sorted(ports.items())))
        if cache.get(v) == fp:
            fresh[v] = fp
            continue
        msgs = _assemble(engine, v, st, ports)
        for msg in msgs:
            out.append(Violation("will_sandbox", msg, v))
        if not msgs:
            fresh[v] = fp
    engine._sandbox_cache = fresh


def _assemble(engine, v, st, ports) -> list[str]:
    import math

    heirs = [c for c, p in ports.items() if p.is_heir]
    if len(heirs) != 1:
        return [f"portions name {len(heirs)} heirs"]
    heir = heirs[0]
    if any(not p.assigns_helper for p in ports.values()):
        return ["a portion assigns no helper position"]
    if {p.owner_was_helper for p in ports.values()} != {st.ishelper}:
        return ["portions disagree with the owner's helper status"]

    problems: list[str] = []
    tops = {c: (c, k) for c, k in st.children.items()}
    parent_point = ((st.parent, st.parent_kind)
                    if st.parent is not None else None)
    hparent_point = ((st.hparent, st.hparent_kind)
                     if st.hparent is not None else None)

    # Upward claims per planned vertex: the child's top and its assigned
    # helper. References to a family member's helper resolve inward;
    # everything else must be one of the owner's own attachment points.
    def up_ref(ref, kind):
        if ref is not None and kind == HELPER and ref in ports:
            return ("h", ref)
        return ("outside", (ref, kind) if ref is not None else None)

    up = {}
    for c, p in ports.items():
        if tops[c] == (c, REAL) and (c, REAL) in p.nexthchildren:
            # Self-covering plan: the real top hangs under the child's own
            # helper. nextparent then carries the physical edge peer: the
            # helper's own attachment point, either named outright or as a
            # self-reference the executor resolves after installing.
            up[("top", c)] = ("h", c)
            pre_skipped = (p.nextparent, p.nextparent_kind) == (
                p.nexthparent, p.nexthparent_kind)
            if not pre_skipped and (p.nextparent, p.nextparent_kind) != (
                    c, HELPER):
                problems.append(
                    f"{c} covers its own leaf but plans an edge to "
                    f"{p.nextparent} for it")
        else:
            up[("top", c)] = up_ref(p.nextparent, p.nextparent_kind)
        up[("h", c)] = up_ref(p.nexthparent, p.nexthparent_kind)

    # Downward claims from the pre-agreed helper children, matched against
    # the upward claims by name.
    names: dict = {}
    for c in ports:
        names.setdefault(tops[c], []).append(("top", c))
        names.setdefault((c, HELPER), []).append(("h", c))
    claimed: dict = {}
    foreign: list = []
    for c, p in ports.items():
        if len(set(p.nexthchildren)) != len(p.nexthchildren):
            problems.append(f"duplicate planned entries at {c}")
        for e in p.nexthchildren:
            cands = [y for y in names.get(e, ())
                     if up.get(y) == ("h", c)]
            if len(cands) > 1:
                problems.append(f"planned entry {e} at {c} is ambiguous")
            elif not cands:
                if c == heir and st.ishelper:
                    foreign.append(e)
                else:
                    problems.append(
                        f"planned entry {e} at {c} matches no portion")
            elif cands[0] in claimed:
                problems.append(f"{cands[0]} is claimed twice")
            else:
                claimed[cands[0]] = ("h", c)

    # Arity of each planned helper.
    for c, p in ports.items():
        n = len(p.nexthchildren)
        if c != heir and n != 2:
            problems.append(f"non-heir {c} plans {n} helper children")
    n_heir = len(ports[heir].nexthchildren)
    if st.ishelper:
        if n_heir != len(st.hchildren):
            problems.append(
                f"heir inherits {n_heir} children, owner's helper has "
                f"{len(st.hchildren)}")
        cur = set(st.hchildren.items()) - {(v, REAL)}
        for e in foreign:
            if e not in cur:
                problems.append(f"inherited entry {e} is not under the "
                                f"owner's helper")
        if (v, REAL) in ports[heir].nexthchildren:
            problems.append("the owner's own leaf survives in the plan")
    else:
        if n_heir != 1:
            problems.append(f"heir plans {n_heir} children for the new top")
        if foreign:
            problems.append(f"foreign entries {foreign} without inheritance")

    # Attachment points: the heir's helper hangs where the owner hung; a
    # non-helper owner's structure has exactly that one outward link, a
    # helper owner's additionally re-attaches the slot tree at the owner's
    # real position unless it slides under the inherited helper.
    expected_heir_up = ("outside",
                        hparent_point if st.ishelper else parent_point)
    if up[("h", heir)] != expected_heir_up:
        problems.append(
            f"heir's helper attaches at {up[('h', heir)]}, "
            f"owner hung at {expected_heir_up}")
    outs = {y for y, r in up.items() if r[0] == "outside"}
    extra = outs - {("h", heir)}
    self_covering = st.ishelper and st.hchildren.get(v) == REAL
    if st.ishelper and not self_covering:
        if len(extra) != 1:
            problems.append(f"outward links {sorted(outs)}, wanted the "
                            f"slot root plus the inherited position")
        else:
            (root_vertex,) = extra
            if up[root_vertex] != ("outside", parent_point):
                problems.append(
                    f"slot root attaches at {up[root_vertex]}, the owner's "
                    f"real position is {parent_point}")
    elif extra:
        problems.append(f"unexpected outward links {sorted(extra)}")

    # One announcer renames the owner's old entry, naming the new top; a
    # self-covering owner's family keeps the handover internal.
    announcers = [c for c, p in ports.items() if p.announces_top]
    if self_covering:
        if announcers:
            problems.append(f"{announcers} announce a top nobody watches")
    elif len(announcers) != 1:
        problems.append(f"announcers {announcers}, wanted exactly one")
    else:
        a = announcers[0]
        p = ports[a]
        announced = (("top", a) if p.is_heir and p.owner_was_helper
                     else ("h", a))
        want_kind = tops[a][1] if announced[0] == "top" else HELPER
        if p.top_kind != want_kind:
            problems.append(
                f"announced kind {p.top_kind}, top is {want_kind}")
        if up.get(announced, (None,))[0] != "outside":
            problems.append(f"announcer {a} does not hold the top")

    if problems:
        return problems

    # Every planned vertex is either claimed by exactly one helper or
    # carries an outward link; the result is one forest, cycle-free, with
    # leaf depth bounded by the balanced construction.
    kids: dict = {}
    for y, holder in claimed.items():
        kids.setdefault(holder, []).append(y)
    seen = set()
    depth_ok = True
    d0 = max(2, len(engine.initial_tree.children.get(v, [])))
    bound = max(1, math.ceil(math.log2(d0))) + 1
    stack = [(y, 0) for y in outs]
    while stack:
        y, d = stack.pop()
        if y in seen:
            return [f"plan cycles through {y}"]
        seen.add(y)
        if y[0] == "top" and d > bound:
            depth_ok = False
        stack.extend((z, d + 1) for z in kids.get(y, ()))
    if len(seen) != len(up):
        return [f"{len(up) - len(seen)} planned vertices unreachable"]
    if not depth_ok:
        return [f"plan exceeds depth {bound}"]
    return []
