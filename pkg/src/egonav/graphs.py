"""Attributed undirected graphs: ego-graph views, BFS distances, node splits, file IO.

Nodes are dense integers ``0..n-1``. Neighbor lists are stored sorted
ascending so that iteration order, and therefore any downstream argmax tie
handling, is deterministic for a fixed graph.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ConnectivityError, GraphInputError

UNREACHABLE = -1  # marker used inside distance arrays; public scalar APIs return None


class AttributedGraph:
    """Undirected, unweighted graph with one real-valued attribute vector per node.

    Immutable after construction; safe to share across evaluation workers.
    """

    def __init__(self, attributes, edges):
        attrs = np.asarray(attributes, dtype=np.float64)
        if attrs.ndim != 2 or attrs.shape[0] < 1:
            raise GraphInputError("attributes must be a (n, d) array with n >= 1")
        n = attrs.shape[0]
        pairs = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if pairs.size:
            if pairs.min() < 0 or pairs.max() >= n:
                raise GraphInputError("edge endpoint out of range [0, n)")
            if np.any(pairs[:, 0] == pairs[:, 1]):
                raise GraphInputError("self-loops are not allowed")
        # canonical undirected form: u < v, deduplicated
        lo = pairs.min(axis=1)
        hi = pairs.max(axis=1)
        canon = np.unique(lo * n + hi)
        u = canon // n
        v = canon % n
        both = np.concatenate([np.stack([u, v], 1), np.stack([v, u], 1)])
        order = np.lexsort((both[:, 1], both[:, 0]))
        both = both[order]
        self._indices = np.ascontiguousarray(both[:, 1])
        self._indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self._indptr, both[:, 0] + 1, 1)
        np.cumsum(self._indptr, out=self._indptr)
        self._edges = np.stack([u, v], 1)

        self.node_count = n
        self.edge_count = len(u)
        self.attributes = attrs
        self.attribute_dim = attrs.shape[1]
        self.degrees = np.diff(self._indptr)
        for a in (self.attributes, self._indices, self._indptr, self._edges, self.degrees):
            a.flags.writeable = False
        self._dist_cache = None

    def check_node(self, u):
        if not 0 <= u < self.node_count:
            raise GraphInputError(f"node id {u} out of range [0, {self.node_count})")

    def neighbors(self, u):
        """Ascending array of nodes adjacent to u."""
        self.check_node(u)
        return self._indices[self._indptr[u]:self._indptr[u + 1]]

    def degree(self, u):
        self.check_node(u)
        return int(self.degrees[u])

    def has_edge(self, u, v):
        nb = self.neighbors(u)
        i = np.searchsorted(nb, v)
        return i < len(nb) and nb[i] == v

    def edges(self):
        """(m, 2) array of undirected edges with u < v, lexicographically sorted."""
        return self._edges

    def ego_graph(self, u):
        """1-hop ego graph around u: u, its neighbors, and every edge among them."""
        self.check_node(u)
        members = np.unique(np.append(self.neighbors(u), u))
        member_set = set(members.tolist())
        edges = []
        for a in members.tolist():
            for b in self.neighbors(a).tolist():
                if a < b and b in member_set:
                    edges.append((a, b))
        return EgoGraph(center=u, members=members,
                        edges=np.array(edges, dtype=np.int64).reshape(-1, 2))


@dataclass(frozen=True)
class EgoGraph:
    """Induced subgraph on a center node and its 1-hop neighborhood."""

    center: int
    members: np.ndarray   # sorted global node ids, includes center
    edges: np.ndarray     # (k, 2) global-id pairs with u < v

    def local_adjacency(self):
        """Boolean (s, s) adjacency over members (no self entries)."""
        s = len(self.members)
        pos = {int(m): i for i, m in enumerate(self.members)}
        adj = np.zeros((s, s), dtype=bool)
        for a, b in self.edges.tolist():
            i, j = pos[a], pos[b]
            adj[i, j] = adj[j, i] = True
        return adj


@dataclass(frozen=True)
class NodeSplit:
    """Disjoint train/val/test node sets covering all of V."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


def bfs_distances(g, src):
    """Hop counts from src to every node; UNREACHABLE (-1) where disconnected."""
    g.check_node(src)
    dist = np.full(g.node_count, UNREACHABLE, dtype=np.int64)
    dist[src] = 0
    q = deque([src])
    indptr, indices = g._indptr, g._indices
    while q:
        u = q.popleft()
        du = dist[u] + 1
        for v in indices[indptr[u]:indptr[u + 1]]:
            if dist[v] < 0:
                dist[v] = du
                q.append(v)
    return dist


def shortest_path_length(g, u, v):
    """Hop count of a shortest u-v path, 0 if u == v, None if unreachable."""
    g.check_node(u)
    g.check_node(v)
    if u == v:
        return 0
    d = bfs_distances(g, u)[v]
    return None if d < 0 else int(d)


def distance_matrix(g):
    """All-pairs hop counts (cached on the graph); UNREACHABLE (-1) entries allowed."""
    if g._dist_cache is None:
        mat = np.empty((g.node_count, g.node_count), dtype=np.int64)
        for s in range(g.node_count):
            mat[s] = bfs_distances(g, s)
        mat.flags.writeable = False
        g._dist_cache = mat
    return g._dist_cache


def connected_components(g):
    """List of sorted node arrays, one per component, ordered by first node id."""
    seen = np.zeros(g.node_count, dtype=bool)
    comps = []
    for s in range(g.node_count):
        if seen[s]:
            continue
        dist = bfs_distances(g, s)
        members = np.nonzero(dist >= 0)[0]
        seen[members] = True
        comps.append(members)
    return comps


def largest_connected_component(g):
    """Induced graph on the largest component, re-indexed densely.

    Returns (subgraph, old_to_new) where old_to_new maps every kept node id
    to its new id. Ties between equally large components go to the one
    containing the smallest node id.
    """
    comps = connected_components(g)
    keep = max(comps, key=len)  # first-listed wins ties -> smallest min id
    old_to_new = {int(old): new for new, old in enumerate(keep.tolist())}
    mask = np.zeros(g.node_count, dtype=bool)
    mask[keep] = True
    e = g.edges()
    kept_edges = e[mask[e[:, 0]] & mask[e[:, 1]]]
    remap = np.full(g.node_count, -1, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    sub = AttributedGraph(g.attributes[keep], remap[kept_edges])
    return sub, old_to_new


def split_nodes(g, ratios=(0.8, 0.1, 0.1), rng=None):
    """Uniform random partition of V into train/val/test at the given ratios.

    Sizes are floor(n * r); leftovers go to still-empty splits first, then to
    the largest fractional remainders (earlier split wins ties).
    """
    r = np.asarray(ratios, dtype=np.float64)
    if len(r) != 3 or np.any(r <= 0) or abs(r.sum() - 1.0) > 1e-9:
        raise ConfigError("ratios must be three positive numbers summing to 1")
    n = g.node_count
    sizes = np.floor(n * r).astype(int)
    frac = n * r - sizes
    for _ in range(n - sizes.sum()):
        empties = np.nonzero(sizes == 0)[0]
        i = empties[int(np.argmax(frac[empties]))] if len(empties) else int(np.argmax(frac))
        sizes[i] += 1
        frac[i] = -1
    if np.any(sizes == 0):
        raise ConfigError(f"n={n} is too small for ratios {tuple(ratios)}: a split would be empty")
    rng = np.random.default_rng() if rng is None else rng
    perm = rng.permutation(n)
    a, b = sizes[0], sizes[0] + sizes[1]
    return NodeSplit(train=np.sort(perm[:a]), val=np.sort(perm[a:b]), test=np.sort(perm[b:]))


def mean_shortest_path_and_density(g):
    """(average shortest path length over unordered pairs, edge density 2m / n(n-1))."""
    n = g.node_count
    if n < 2:
        raise ConfigError("need at least 2 nodes")
    d = distance_matrix(g)
    iu = np.triu_indices(n, 1)
    vals = d[iu]
    if np.any(vals < 0):
        raise ConnectivityError(
            "graph is disconnected; apply largest_connected_component first")
    l_g = float(vals.mean())
    rho = 2.0 * g.edge_count / (n * (n - 1))
    return l_g, rho


def save_graph(g, edges_path, attrs_path):
    """Write the plain-text edge list (`u v` per line) and attribute table."""
    with open(edges_path, "w") as f:
        for u, v in g.edges().tolist():
            f.write(f"{u} {v}\n")
    with open(attrs_path, "w") as f:
        for row in g.attributes:
            f.write(" ".join(f"{x:.17g}" for x in row) + "\n")


def load_graph(edges_path, attrs_path):
    """Read a graph saved by save_graph. Node count comes from the attribute file."""
    attrs = []
    width = None
    with open(attrs_path) as f:
        for ln, line in enumerate(f, 1):
            if not line.strip():
                continue
            row = [float(x) for x in line.split()]
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise GraphInputError(f"{attrs_path}:{ln}: expected {width} values, got {len(row)}")
            attrs.append(row)
    if not attrs:
        raise GraphInputError(f"{attrs_path}: no attribute rows")
    edges = []
    with open(edges_path) as f:
        for ln, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise GraphInputError(f"{edges_path}:{ln}: expected 'u v', got {line!r}")
            edges.append((int(parts[0]), int(parts[1])))
    return AttributedGraph(np.array(attrs), np.array(edges, dtype=np.int64).reshape(-1, 2))
