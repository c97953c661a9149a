import numpy as np
import pytest

from egonav.errors import ConfigError, ConnectivityError, GraphInputError
from egonav.graphs import (AttributedGraph, bfs_distances, largest_connected_component,
                           load_graph, mean_shortest_path_and_density, save_graph,
                           shortest_path_length, split_nodes)


def make_graph(n, edges, d=2, seed=0):
    rng = np.random.default_rng(seed)
    return AttributedGraph(rng.random((n, d)), np.array(edges, dtype=np.int64).reshape(-1, 2))


def random_graph(n, p, seed):
    rng = np.random.default_rng(seed)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return make_graph(n, edges, seed=seed), edges


# --- independent oracles -----------------------------------------------------

def floyd_warshall(n, edges):
    inf = float("inf")
    dist = [[0 if i == j else inf for j in range(n)] for i in range(n)]
    for u, v in edges:
        dist[u][v] = dist[v][u] = 1
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if dist[i][k] + dist[k][j] < dist[i][j]:
                    dist[i][j] = dist[i][k] + dist[k][j]
    return dist


class UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        self.parent[self.find(a)] = self.find(b)


# --- construction ------------------------------------------------------------

def test_rejects_self_loops_and_bad_ids():
    with pytest.raises(GraphInputError):
        make_graph(3, [(0, 0)])
    with pytest.raises(GraphInputError):
        make_graph(3, [(0, 3)])


def test_duplicate_and_reversed_edges_collapse():
    g = make_graph(3, [(0, 1), (1, 0), (0, 1)])
    assert g.edge_count == 1
    assert list(g.neighbors(0)) == [1]
    assert list(g.neighbors(1)) == [0]


# --- neighbors ---------------------------------------------------------------

def test_neighbors_triangle():
    g = make_graph(3, [(0, 1), (1, 2), (0, 2)])
    assert list(g.neighbors(0)) == [1, 2]


def test_neighbors_isolated_node():
    g = make_graph(2, [])
    assert list(g.neighbors(0)) == []


def test_neighbors_out_of_range():
    g = make_graph(3, [(0, 1)])
    with pytest.raises(GraphInputError):
        g.neighbors(3)


def test_neighbors_match_edge_list_scan():
    g, edges = random_graph(10, 0.3, seed=5)
    for u in range(10):
        expected = sorted({b for a, b in edges if a == u} | {a for a, b in edges if b == u})
        assert list(g.neighbors(u)) == expected


# --- ego graphs --------------------------------------------------------------

def test_ego_graph_star_center():
    g = make_graph(5, [(0, 1), (0, 2), (0, 3), (0, 4)])
    ego = g.ego_graph(0)
    assert list(ego.members) == [0, 1, 2, 3, 4]
    assert len(ego.edges) == 4


def test_ego_graph_star_leaf():
    g = make_graph(5, [(0, 1), (0, 2), (0, 3), (0, 4)])
    ego = g.ego_graph(3)
    assert list(ego.members) == [0, 3]
    assert len(ego.edges) == 1


def test_ego_graph_matches_induced_subgraph():
    g, edges = random_graph(12, 0.4, seed=9)
    for u in range(12):
        members = sorted({u} | set(g.neighbors(u).tolist()))
        induced = sorted((min(a, b), max(a, b)) for a, b in edges
                         if a in members and b in members)
        ego = g.ego_graph(u)
        assert list(ego.members) == members
        assert sorted(map(tuple, ego.edges.tolist())) == induced
        assert u in ego.members


# --- shortest paths ----------------------------------------------------------

def test_shortest_path_trivial_cases():
    g = make_graph(3, [(0, 1), (1, 2)])
    assert shortest_path_length(g, 1, 1) == 0
    assert shortest_path_length(g, 0, 1) == 1
    assert shortest_path_length(g, 0, 2) == 2


def test_shortest_path_unreachable_is_none():
    g = make_graph(4, [(0, 1), (2, 3)])
    assert shortest_path_length(g, 0, 3) is None


def test_shortest_path_matches_floyd_warshall():
    g, edges = random_graph(15, 0.25, seed=3)
    ref = floyd_warshall(15, edges)
    for u in range(15):
        for v in range(15):
            got = shortest_path_length(g, u, v)
            want = None if ref[u][v] == float("inf") else int(ref[u][v])
            assert got == want


def test_shortest_path_is_a_metric_on_components():
    for seed in range(5):
        g, _ = random_graph(12, 0.3, seed=seed)
        d = np.array([bfs_distances(g, s) for s in range(12)])
        assert np.array_equal(d, d.T)
        reach = d >= 0
        for i in range(12):
            for j in range(12):
                for k in range(12):
                    if reach[i, j] and reach[j, k]:
                        assert d[i, k] >= 0 and d[i, k] <= d[i, j] + d[j, k]


# --- largest connected component ----------------------------------------------

def test_lcc_connected_graph_is_identity():
    g = make_graph(4, [(0, 1), (1, 2), (2, 3)])
    sub, mapping = largest_connected_component(g)
    assert sub.node_count == 4
    assert mapping == {0: 0, 1: 1, 2: 2, 3: 3}
    assert np.array_equal(sub.attributes, g.attributes)


def test_lcc_picks_bigger_component():
    edges = [(i, i + 1) for i in range(6)] + [(7, 8), (8, 9)]
    g = make_graph(10, edges)
    sub, mapping = largest_connected_component(g)
    assert sub.node_count == 7
    assert set(mapping) == set(range(7))


def test_lcc_membership_matches_union_find():
    for seed in range(6):
        g, edges = random_graph(20, 0.07, seed=seed)
        uf = UnionFind(20)
        for a, b in edges:
            uf.union(a, b)
        roots = {}
        for u in range(20):
            roots.setdefault(uf.find(u), []).append(u)
        biggest = max(len(v) for v in roots.values())
        sub, mapping = largest_connected_component(g)
        assert sub.node_count == biggest
        kept = sorted(mapping)
        assert len({uf.find(u) for u in kept}) == 1


def test_lcc_is_idempotent():
    g, _ = random_graph(20, 0.08, seed=2)
    sub, _ = largest_connected_component(g)
    again, mapping = largest_connected_component(sub)
    assert again.node_count == sub.node_count
    assert np.array_equal(again.attributes, sub.attributes)
    assert np.array_equal(again.edges(), sub.edges())
    assert all(mapping[k] == k for k in mapping)


# --- node splits -------------------------------------------------------------

def test_split_sizes_80_10_10():
    g = make_graph(10, [(i, i + 1) for i in range(9)])
    s = split_nodes(g, rng=np.random.default_rng(0))
    assert (len(s.train), len(s.val), len(s.test)) == (8, 1, 1)


def test_split_sizes_thirds():
    g = make_graph(3, [(0, 1), (1, 2)])
    s = split_nodes(g, (1 / 3, 1 / 3, 1 / 3), rng=np.random.default_rng(0))
    assert (len(s.train), len(s.val), len(s.test)) == (1, 1, 1)


def test_split_small_n_fills_empty_splits_first():
    g = make_graph(6, [(i, i + 1) for i in range(5)])
    s = split_nodes(g, rng=np.random.default_rng(1))
    assert (len(s.train), len(s.val), len(s.test)) == (4, 1, 1)


def test_split_too_small_raises():
    g = make_graph(2, [(0, 1)])
    with pytest.raises(ConfigError):
        split_nodes(g, rng=np.random.default_rng(0))


def test_split_disjoint_cover_over_many_seeds():
    g = make_graph(200, [(i, i + 1) for i in range(199)])
    for seed in range(100):
        s = split_nodes(g, rng=np.random.default_rng(seed))
        parts = [set(s.train.tolist()), set(s.val.tolist()), set(s.test.tolist())]
        assert parts[0] | parts[1] | parts[2] == set(range(200))
        assert not parts[0] & parts[1]
        assert not parts[0] & parts[2]
        assert not parts[1] & parts[2]


def test_split_deterministic_given_seed():
    g = make_graph(50, [(i, i + 1) for i in range(49)])
    a = split_nodes(g, rng=np.random.default_rng(7))
    b = split_nodes(g, rng=np.random.default_rng(7))
    assert np.array_equal(a.train, b.train) and np.array_equal(a.test, b.test)


# --- mean path length and density ---------------------------------------------

def test_mean_path_and_density_triangle():
    g = make_graph(3, [(0, 1), (1, 2), (0, 2)])
    l_g, rho = mean_shortest_path_and_density(g)
    assert l_g == 1.0 and rho == 1.0


def test_mean_path_and_density_path3():
    g = make_graph(3, [(0, 1), (1, 2)])
    l_g, rho = mean_shortest_path_and_density(g)
    assert l_g == pytest.approx(4 / 3)
    assert rho == pytest.approx(2 / 3)


def test_mean_path_disconnected_raises():
    g = make_graph(4, [(0, 1), (2, 3)])
    with pytest.raises(ConnectivityError, match="largest_connected_component"):
        mean_shortest_path_and_density(g)


# --- file round-trip ---------------------------------------------------------

def test_save_load_round_trip(tmp_path):
    g, _ = random_graph(15, 0.3, seed=4)
    save_graph(g, tmp_path / "g.edges", tmp_path / "g.attrs")
    g2 = load_graph(tmp_path / "g.edges", tmp_path / "g.attrs")
    assert g2.node_count == g.node_count
    assert np.array_equal(g2.edges(), g.edges())
    assert np.array_equal(g2.attributes, g.attributes)


def test_load_rejects_malformed_edge_line(tmp_path):
    (tmp_path / "g.attrs").write_text("0.5 0.5\n0.1 0.2\n")
    (tmp_path / "g.edges").write_text("0 1 2\n")
    with pytest.raises(GraphInputError, match="g.edges:1"):
        load_graph(tmp_path / "g.edges", tmp_path / "g.attrs")
