"""Graph primitives, checked against independently coded oracles.

The oracle implementations in this file deliberately share no code with
forgiving_tree.graph: a recursive DFS-flavored BFS for spanning trees and a
dense all-pairs table for diameter.
"""

from __future__ import annotations

import random

import pytest

from forgiving_tree.graph import (
    DisconnectedGraphError,
    Graph,
    GraphError,
    bfs_distances,
    bfs_spanning_tree,
    degree_increase,
    diameter,
    dump_graph,
    is_tree,
    parse_graph_text,
    tree_diameter,
    tree_stats,
)


# ---- oracles -------------------------------------------------------------


def oracle_bfs_parents(adj: dict[int, set[int]], root: int) -> dict[int, int | None]:
    # Level-by-level frontier expansion, no deque; ties by sorted order.
    parents: dict[int, int | None] = {root: None}
    frontier = [root]
    while frontier:
        nxt = []
        for u in frontier:
            for w in sorted(adj[u]):
                if w not in parents:
                    parents[w] = u
                    nxt.append(w)
        frontier = nxt
    return parents


def oracle_all_pairs_diameter(adj: dict[int, set[int]]) -> int:
    # Floyd-Warshall on a dense matrix.
    vs = sorted(adj)
    idx = {v: i for i, v in enumerate(vs)}
    n = len(vs)
    inf = float("inf")
    dist = [[inf] * n for _ in range(n)]
    for v in vs:
        dist[idx[v]][idx[v]] = 0
        for w in adj[v]:
            dist[idx[v]][idx[w]] = 1
    for k in range(n):
        for i in range(n):
            dik = dist[i][k]
            if dik == inf:
                continue
            row_k = dist[k]
            row_i = dist[i]
            for j in range(n):
                alt = dik + row_k[j]
                if alt < row_i[j]:
                    row_i[j] = alt
    return int(max(max(row) for row in dist)) if n > 1 else 0


def random_connected_graph(rng: random.Random, n: int, extra_edges: int) -> Graph:
    g = Graph(vertices=range(n))
    order = list(range(n))
    rng.shuffle(order)
    for i in range(1, n):
        g.add_edge(order[i], rng.choice(order[:i]))
    added = 0
    while added < extra_edges:
        u, v = rng.randrange(n), rng.randrange(n)
        if u != v and not g.has_edge(u, v):
            g.add_edge(u, v)
            added += 1
    return g


def path_graph(n: int) -> Graph:
    return Graph(vertices=range(n), edges=[(i, i + 1) for i in range(n - 1)])


def star_graph(n: int) -> Graph:
    return Graph(vertices=range(n), edges=[(0, i) for i in range(1, n)])


# ---- bfs_spanning_tree ----------------------------------------------------


def test_bfs_path_parents():
    t = bfs_spanning_tree(path_graph(5), root=0)
    assert t.parent == {0: None, 1: 0, 2: 1, 3: 2, 4: 3}


def test_bfs_star_children_sorted_and_height_one():
    t = bfs_spanning_tree(star_graph(9), root=0)
    assert t.children[0] == list(range(1, 9))
    assert t.height() == 1


def test_bfs_matches_oracle_on_random_graph():
    rng = random.Random(7)
    g = random_connected_graph(rng, 32, 64 - 31)
    t = bfs_spanning_tree(g, root=0)
    t.validate()
    expect = oracle_bfs_parents({v: set(g.neighbors(v)) for v in g.vertices()}, 0)
    assert t.parent == expect


def test_bfs_tie_break_prefers_lower_id():
    # 3 reachable through both 1 and 2 at the same depth.
    g = Graph(edges=[(0, 1), (0, 2), (1, 3), (2, 3)])
    t = bfs_spanning_tree(g, root=0)
    assert t.parent[3] == 1


def test_bfs_disconnected_names_unreachable_vertex():
    g = Graph(vertices=[0, 1, 2])
    g.add_edge(0, 1)
    with pytest.raises(DisconnectedGraphError, match="2"):
        bfs_spanning_tree(g, root=0)


def test_bfs_missing_root():
    with pytest.raises(GraphError):
        bfs_spanning_tree(Graph(vertices=[0]), root=5)


# ---- diameter -------------------------------------------------------------


def test_diameter_path():
    assert diameter(path_graph(8)) == 7


def test_diameter_star_is_two():
    assert diameter(star_graph(9)) == 2


def test_diameter_singleton_and_empty():
    assert diameter(Graph(vertices=[3])) == 0
    assert diameter(Graph()) == 0


def test_diameter_balanced_binary_31():
    # Complete binary tree on 31 nodes, heap indexing.
    g = Graph(vertices=range(31))
    for i in range(1, 31):
        g.add_edge(i, (i - 1) // 2)
    expect = oracle_all_pairs_diameter({v: set(g.neighbors(v)) for v in g.vertices()})
    assert expect == 8
    assert diameter(g) == 8
    assert tree_diameter(g) == 8


def test_diameter_disconnected_raises():
    g = Graph(vertices=[0, 1])
    with pytest.raises(DisconnectedGraphError):
        diameter(g)


def test_tree_diameter_matches_generic_on_random_trees():
    rng = random.Random(21)
    for _ in range(20):
        n = rng.randrange(2, 40)
        g = random_connected_graph(rng, n, 0)
        assert is_tree(g)
        assert tree_diameter(g) == diameter(g)


def test_diameter_matches_oracle_on_random_graphs():
    rng = random.Random(5)
    for _ in range(5):
        g = random_connected_graph(rng, 18, 10)
        expect = oracle_all_pairs_diameter(
            {v: set(g.neighbors(v)) for v in g.vertices()}
        )
        assert diameter(g) == expect


# ---- degree_increase -------------------------------------------------------


def test_degree_increase_identity_is_zero():
    g = path_graph(4)
    assert degree_increase(g, g.copy()) == {0: 0, 1: 0, 2: 0, 3: 0}


def test_degree_increase_surrogate_star_hand_sim():
    # Star n=8 centered at 0; lowest-id leaf absorbs all others when the
    # center dies: its degree goes 1 -> 6, an increase of 5 = n-3.
    before = star_graph(8)
    after = Graph(vertices=range(1, 8))
    for v in range(2, 8):
        after.add_edge(1, v)
    inc = degree_increase(before, after)
    assert inc[1] == 5
    assert all(inc[v] == 0 for v in range(2, 8))


def test_degree_increase_clamps_at_zero():
    before = path_graph(3)
    after = Graph(vertices=[0, 1, 2])
    after.add_edge(0, 1)
    assert degree_increase(before, after)[1] == 0


# ---- stats and file format --------------------------------------------------


def test_tree_stats_star():
    t = bfs_spanning_tree(star_graph(9), root=0)
    s = tree_stats(t)
    assert (s.n, s.diameter, s.height, s.max_degree) == (9, 2, 1, 8)


def test_graph_text_roundtrip():
    g = Graph(vertices=[7], edges=[(0, 1), (1, 2)])
    text = dump_graph(g)
    h = parse_graph_text(text)
    assert h.edges() == g.edges()
    assert h.vertices() == g.vertices()


def test_graph_text_comments_and_isolated():
    g = parse_graph_text("# header\n0 1\n5\n\n1 2  # trailing\n")
    assert g.edges() == [(0, 1), (1, 2)]
    assert 5 in g


def test_graph_text_rejects_garbage():
    with pytest.raises(GraphError, match="line 1"):
        parse_graph_text("a b\n")
    with pytest.raises(GraphError, match="self-loop"):
        parse_graph_text("3 3\n")
    with pytest.raises(GraphError):
        parse_graph_text("1 2 3\n")


def test_graph_rejects_self_loop_and_negative():
    g = Graph()
    with pytest.raises(GraphError):
        g.add_edge(1, 1)
    with pytest.raises(GraphError):
        g.add_vertex(-2)
