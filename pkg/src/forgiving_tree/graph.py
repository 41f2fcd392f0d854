"""Undirected graphs, rooted trees, and the deterministic primitives the
simulator is built on.

Node identifiers are plain non-negative ints with the usual total order.
Every operation that could depend on iteration order breaks ties by
ascending node id, so identical inputs always produce identical outputs.
"""

from __future__ import annotations

from bisect import insort
from collections import deque
from dataclasses import dataclass, field


class GraphError(ValueError):
    """Malformed graph input or an operation on missing vertices."""


class DisconnectedGraphError(GraphError):
    """Raised where a connected graph is required; names an unreachable vertex."""


class Graph:
    """Simple undirected graph: no self-loops, no parallel edges.

    Degree counts distinct neighbors. Vertices may be isolated.
    """

    def __init__(self, vertices=(), edges=()):
        # Adjacency lists kept sorted ascending; reads never re-sort.
        self._adj: dict[int, list[int]] = {}
        for v in vertices:
            self.add_vertex(v)
        for u, v in edges:
            self.add_edge(u, v)

    # ---- construction ----

    def add_vertex(self, v: int) -> None:
        if v < 0:
            raise GraphError(f"node ids must be non-negative, got {v}")
        self._adj.setdefault(v, [])

    def add_edge(self, u: int, v: int) -> None:
        if u == v:
            raise GraphError(f"self-loop at {u} rejected")
        self.add_vertex(u)
        self.add_vertex(v)
        if v not in self._adj[u]:
            insort(self._adj[u], v)
            insort(self._adj[v], u)

    def remove_edge(self, u: int, v: int) -> None:
        if v not in self._adj.get(u, ()):
            raise GraphError(f"edge ({u}, {v}) not present")
        self._adj[u].remove(v)
        self._adj[v].remove(u)

    def remove_vertex(self, v: int) -> None:
        if v not in self._adj:
            raise GraphError(f"vertex {v} not present")
        for u in self._adj[v]:
            self._adj[u].remove(v)
        del self._adj[v]

    # ---- queries ----

    def __contains__(self, v: int) -> bool:
        return v in self._adj

    def __len__(self) -> int:
        return len(self._adj)

    def vertices(self) -> list[int]:
        return sorted(self._adj)

    def neighbors(self, v: int) -> list[int]:
        if v not in self._adj:
            raise GraphError(f"vertex {v} not present")
        return list(self._adj[v])

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._adj.get(u, ())

    def degree(self, v: int) -> int:
        if v not in self._adj:
            raise GraphError(f"vertex {v} not present")
        return len(self._adj[v])

    def max_degree(self) -> int:
        return max((len(s) for s in self._adj.values()), default=0)

    def edge_count(self) -> int:
        return sum(len(s) for s in self._adj.values()) // 2

    def edges(self) -> list[tuple[int, int]]:
        return sorted(
            (u, v) for u, s in self._adj.items() for v in s if u < v
        )

    def copy(self) -> "Graph":
        g = Graph()
        g._adj = {v: list(s) for v, s in self._adj.items()}
        return g

    def degrees(self) -> dict[int, int]:
        return {v: len(s) for v, s in self._adj.items()}

    def is_connected(self) -> bool:
        if len(self._adj) <= 1:
            return True
        start = min(self._adj)
        return len(self._bfs_order(start)) == len(self._adj)

    def _bfs_order(self, start: int) -> list[int]:
        seen = {start}
        order = [start]
        q = deque([start])
        while q:
            u = q.popleft()
            for w in self._adj[u]:
                if w not in seen:
                    seen.add(w)
                    order.append(w)
                    q.append(w)
        return order


@dataclass
class RootedTree:
    """Rooted spanning tree: parent map plus child lists sorted ascending."""

    root: int
    parent: dict[int, int | None]
    children: dict[int, list[int]]

    @staticmethod
    def from_parent(parent: dict[int, int | None]) -> "RootedTree":
        roots = [v for v, p in parent.items() if p is None]
        if len(roots) != 1:
            raise GraphError(f"need exactly one root, got {sorted(roots)}")
        children: dict[int, list[int]] = {v: [] for v in parent}
        for v, p in parent.items():
            if p is not None:
                children[p].append(v)
        for v in children:
            children[v].sort()
        t = RootedTree(root=roots[0], parent=dict(parent), children=children)
        t.validate()
        return t

    def validate(self) -> None:
        if self.parent.get(self.root, 0) is not None:
            raise GraphError("root must have parent None")
        for v, p in self.parent.items():
            if v == self.root:
                continue
            if p is None or p not in self.parent:
                raise GraphError(f"non-root {v} has no valid parent")
            if v not in self.children[p]:
                raise GraphError(f"child list of {p} missing {v}")
        for v, kids in self.children.items():
            if kids != sorted(kids):
                raise GraphError(f"children of {v} not ascending")

    def height(self) -> int:
        # Longest root-to-leaf hop count; 0 for a single vertex.
        best = 0
        stack = [(self.root, 0)]
        while stack:
            v, d = stack.pop()
            best = max(best, d)
            for c in self.children[v]:
                stack.append((c, d + 1))
        return best

    def depth_of(self, v: int) -> int:
        d = 0
        while self.parent[v] is not None:
            v = self.parent[v]  # type: ignore[assignment]
            d += 1
        return d

    def nodes(self) -> list[int]:
        return sorted(self.parent)

    def to_graph(self) -> Graph:
        g = Graph(vertices=self.parent)
        for v, p in self.parent.items():
            if p is not None:
                g.add_edge(v, p)
        return g


@dataclass
class TreeStats:
    """Shape summary used by bound checks: 2*h0*(ceil(log2 delta)+1) etc."""

    n: int
    diameter: int
    height: int
    max_degree: int


def bfs_spanning_tree(graph: Graph, root: int) -> RootedTree:
    """Breadth-first spanning tree rooted at `root`.

    Vertices at equal distance are visited in ascending id order, so the
    parent assignment is unique and reproducible.
    """
    if root not in graph:
        raise GraphError(f"root {root} not in graph")
    parent: dict[int, int | None] = {root: None}
    children: dict[int, list[int]] = {root: []}
    q = deque([root])
    while q:
        u = q.popleft()
        for w in graph.neighbors(u):
            if w not in parent:
                parent[w] = u
                children[w] = []
                children[u].append(w)
                q.append(w)
    if len(parent) != len(graph):
        missing = min(v for v in graph.vertices() if v not in parent)
        raise DisconnectedGraphError(
            f"vertex {missing} unreachable from root {root}"
        )
    for v in children:
        children[v].sort()
    return RootedTree(root=root, parent=parent, children=children)


def bfs_distances(graph: Graph, source: int) -> dict[int, int]:
    if source not in graph:
        raise GraphError(f"vertex {source} not present")
    adj = graph._adj
    dist = {source: 0}
    q = deque([source])
    while q:
        u = q.popleft()
        du1 = dist[u] + 1
        for w in adj[u]:
            if w not in dist:
                dist[w] = du1
                q.append(w)
    return dist


def eccentricity(graph: Graph, source: int) -> int:
    dist = bfs_distances(graph, source)
    if len(dist) != len(graph):
        missing = min(v for v in graph.vertices() if v not in dist)
        raise DisconnectedGraphError(
            f"vertex {missing} unreachable from {source}"
        )
    return max(dist.values(), default=0)


def diameter_all_sources(graph: Graph) -> int:
    """Exact diameter via BFS from every vertex. Empty/singleton graphs: 0.

    The definitional implementation; `diameter` returns the same value
    while skipping sources whose eccentricity provably cannot raise the
    maximum. Kept as the reference the fast path is tested against.
    """
    if len(graph) <= 1:
        return 0
    return max(eccentricity(graph, v) for v in graph.vertices())


def _bfs_parents(graph: Graph, source: int):
    adj = graph._adj
    dist = {source: 0}
    parent = {source: source}
    q = deque([source])
    while q:
        u = q.popleft()
        du1 = dist[u] + 1
        for w in adj[u]:
            if w not in dist:
                dist[w] = du1
                parent[w] = u
                q.append(w)
    return dist, parent


def _farthest(dist: dict[int, int]) -> tuple[int, int]:
    ecc = max(dist.values())
    return min(v for v, d in dist.items() if d == ecc), ecc


def diameter(graph: Graph) -> int:
    """Exact maximum eccentricity without sweeping every vertex.

    Double sweep finds a longest-path midpoint r; rooting there, any two
    vertices at depth <= i are within 2i of each other, so after taking
    exact eccentricities of the fringe levels the remaining pairs cannot
    beat the running maximum and the scan stops (usually after a handful
    of sweeps on the near-tree graphs the simulator produces; never more
    than one sweep per vertex). Empty/singleton graphs: 0.
    """
    n = len(graph)
    if n <= 1:
        return 0
    start = max(graph._adj, key=lambda x: (len(graph._adj[x]), -x))
    d0 = bfs_distances(graph, start)
    if len(d0) != n:
        missing = min(x for x in graph._adj if x not in d0)
        raise DisconnectedGraphError(
            f"vertex {missing} unreachable from {start}"
        )
    a, _ = _farthest(d0)
    da, pa = _bfs_parents(graph, a)
    b, lb = _farthest(da)
    r = b
    for _ in range(lb // 2):
        r = pa[r]
    dr = bfs_distances(graph, r)
    levels: dict[int, list[int]] = {}
    for v, d in dr.items():
        levels.setdefault(d, []).append(v)
    best = max(lb, max(dr.values()))
    for i in range(max(levels), 0, -1):
        if 2 * i <= best:
            break
        for v in sorted(levels.get(i, ())):
            ecc = max(bfs_distances(graph, v).values())
            if ecc > best:
                best = ecc
            if 2 * i <= best:
                break
    return best


def tree_diameter(graph: Graph) -> int:
    """Exact diameter of a connected acyclic graph via two BFS sweeps.

    The caller is responsible for tree-ness; the two-sweep identity only
    holds on trees (cross-checked against `diameter` in the test suite).
    """
    if len(graph) <= 1:
        return 0
    start = min(graph.vertices())
    d0 = bfs_distances(graph, start)
    if len(d0) != len(graph):
        missing = min(v for v in graph.vertices() if v not in d0)
        raise DisconnectedGraphError(
            f"vertex {missing} unreachable from {start}"
        )
    # Farthest vertex from an arbitrary start is a diameter endpoint.
    far = min(v for v, d in d0.items() if d == max(d0.values()))
    d1 = bfs_distances(graph, far)
    return max(d1.values())


def is_tree(graph: Graph) -> bool:
    return (
        len(graph) > 0
        and graph.edge_count() == len(graph) - 1
        and graph.is_connected()
    )


def degree_increase(before: Graph | dict[int, int], after: Graph) -> dict[int, int]:
    """Per-vertex degree increase of `after` relative to `before`.

    Vertices absent from `after` (deleted) are skipped; a vertex never seen
    in `before` counts from degree 0. Negative increases clamp to 0: losing
    edges is never a violation.
    """
    base = before.degrees() if isinstance(before, Graph) else before
    out = {}
    for v in after.vertices():
        out[v] = max(0, after.degree(v) - base.get(v, 0))
    return out


def tree_stats(tree: RootedTree) -> TreeStats:
    g = tree.to_graph()
    return TreeStats(
        n=len(g),
        diameter=tree_diameter(g),
        height=tree.height(),
        max_degree=g.max_degree(),
    )


# ---- graph file format ----
# One edge per line "u v"; lines starting with '#' are comments; a single
# id on a line declares an isolated vertex.


def parse_graph_text(text: str) -> Graph:
    g = Graph()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            ids = [int(p) for p in parts]
        except ValueError:
            raise GraphError(f"line {lineno}: expected integer ids, got {raw!r}")
        if len(ids) == 1:
            g.add_vertex(ids[0])
        elif len(ids) == 2:
            if ids[0] == ids[1]:
                raise GraphError(f"line {lineno}: self-loop {ids[0]}")
            g.add_edge(ids[0], ids[1])
        else:
            raise GraphError(f"line {lineno}: expected 1 or 2 ids, got {len(ids)}")
    return g


def load_graph(path: str) -> Graph:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_graph_text(fh.read())


def dump_graph(graph: Graph) -> str:
    lines = []
    seen_in_edge = set()
    for u, v in graph.edges():
        lines.append(f"{u} {v}")
        seen_in_edge.add(u)
        seen_in_edge.add(v)
    for v in graph.vertices():
        if v not in seen_in_edge:
            lines.append(str(v))
    return "\n".join(lines) + ("\n" if lines else "")


def save_graph(graph: Graph, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_graph(graph))
