"""Rooted graph metric spaces and shortest-path preprocessing.

A :class:`Graph` is an undirected, connected, positively weighted graph with
a designated root node. :func:`build_path_index` runs Dijkstra from the root
once and materializes, for every node ``x``, the ordered list of edges on
the unique shortest path ``[root, x]``. An edge ``e`` lies on that list
exactly when ``x`` belongs to the subgraph hanging below ``e``, which is
all the transport module needs to aggregate mass per edge.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra

from .errors import DataIOError, ValidationError

__all__ = [
    "Graph",
    "PathIndex",
    "DistanceCache",
    "build_path_index",
    "gamma_membership",
    "pairwise_distances",
    "build_cluster_graph",
    "perturb_for_uniqueness",
    "find_shortest_path_ties",
    "central_root",
    "load_graph",
    "save_graph",
]


def _readonly(arr):
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected weighted graph with a root node.

    Node ids are dense integers ``0 .. n_nodes - 1``; edge ids are row
    indices into ``edges``.
    """

    nodes: np.ndarray
    edges: np.ndarray
    weights: np.ndarray
    root: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes.reshape(-1, 1) if nodes.size else nodes.reshape(0, 1)
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        n = nodes.shape[0]
        if n == 0:
            raise ValidationError("graph has no nodes")
        if edges.shape[0] != weights.shape[0]:
            raise ValidationError(
                f"{edges.shape[0]} edges but {weights.shape[0]} weights"
            )
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise ValidationError("edge endpoint outside node range")
        if np.any(edges[:, 0] == edges[:, 1]):
            bad = int(np.flatnonzero(edges[:, 0] == edges[:, 1])[0])
            raise ValidationError(f"edge {bad} is a self-loop")
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            bad = int(np.flatnonzero(~(weights > 0) | ~np.isfinite(weights))[0])
            raise ValidationError(
                f"edge {bad} has nonpositive or non-finite weight {weights[bad]!r}"
            )
        lo = np.minimum(edges[:, 0], edges[:, 1])
        hi = np.maximum(edges[:, 0], edges[:, 1])
        keys = lo * n + hi
        if np.unique(keys).size != keys.size:
            raise ValidationError("duplicate undirected edge")
        root = int(self.root)
        if not 0 <= root < n:
            raise ValidationError(f"root {root} outside node range [0, {n})")
        object.__setattr__(self, "nodes", _readonly(nodes))
        object.__setattr__(self, "edges", _readonly(edges))
        object.__setattr__(self, "weights", _readonly(weights))
        object.__setattr__(self, "root", root)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def with_root(self, root: int) -> "Graph":
        return replace(self, root=root)

    def is_tree(self) -> bool:
        return self.n_edges == self.n_nodes - 1 and _is_connected(self)

    def adjacency(self):
        """Per-node list of ``(neighbor, edge_id)`` sorted by neighbor id."""
        adj = [[] for _ in range(self.n_nodes)]
        for eid, (u, v) in enumerate(self.edges.tolist()):
            adj[u].append((v, eid))
            adj[v].append((u, eid))
        for lst in adj:
            lst.sort()
        return adj

    def to_csgraph(self):
        n = self.n_nodes
        return csr_matrix(
            (self.weights, (self.edges[:, 0], self.edges[:, 1])), shape=(n, n)
        )

    def to_dict(self) -> dict:
        return {
            "nodes": self.nodes.tolist(),
            "edges": [
                [int(u), int(v), float(w)]
                for (u, v), w in zip(self.edges.tolist(), self.weights.tolist())
            ],
            "root": self.root,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Graph":
        try:
            raw_edges = data["edges"]
            edges = [(int(e[0]), int(e[1])) for e in raw_edges]
            weights = [float(e[2]) for e in raw_edges]
            return cls(
                nodes=data["nodes"],
                edges=np.array(edges, dtype=np.int64).reshape(-1, 2),
                weights=weights,
                root=int(data.get("root", 0)),
                meta=data.get("meta", {}),
            )
        except (KeyError, IndexError, TypeError) as exc:
            raise ValidationError(f"malformed graph document: {exc}") from exc


@dataclass(frozen=True, eq=False)
class PathIndex:
    """Shortest-path tree from ``graph.root``.

    ``path_edges(x)`` lists edge ids from the root down to ``x``. The
    flat CSR layout (``path_ptr``, ``path_flat``) lets the transport code
    gather many paths with a single ``np.concatenate``.
    """

    graph: Graph
    parent: np.ndarray
    parent_edge: np.ndarray
    dist_from_root: np.ndarray
    path_ptr: np.ndarray
    path_flat: np.ndarray

    @property
    def root(self) -> int:
        return self.graph.root

    @property
    def n_nodes(self) -> int:
        return self.graph.n_nodes

    def path_edges(self, node: int) -> np.ndarray:
        node = _check_node(self.graph, node)
        return self.path_flat[self.path_ptr[node] : self.path_ptr[node + 1]]


@dataclass(frozen=True, eq=False)
class DistanceCache:
    """Graph distances restricted to ``node_ids`` (row/column order)."""

    node_ids: np.ndarray
    matrix: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.node_ids, dtype=np.int64)
        object.__setattr__(self, "node_ids", _readonly(ids))
        object.__setattr__(self, "matrix", _readonly(np.asarray(self.matrix, float)))
        object.__setattr__(
            self, "_pos", {int(x): i for i, x in enumerate(ids.tolist())}
        )

    def positions(self, nodes) -> np.ndarray:
        try:
            return np.array([self._pos[int(x)] for x in nodes], dtype=np.int64)
        except KeyError as exc:
            raise ValidationError(f"node {exc.args[0]} not covered by distance cache")

    def submatrix(self, rows, cols) -> np.ndarray:
        return self.matrix[np.ix_(self.positions(rows), self.positions(cols))]


def _check_node(graph: Graph, node) -> int:
    node = int(node)
    if not 0 <= node < graph.n_nodes:
        raise ValidationError(f"unknown node id {node}")
    return node


def _is_connected(graph: Graph) -> bool:
    return _first_unreachable(graph) is None


def _first_unreachable(graph: Graph):
    seen = np.zeros(graph.n_nodes, dtype=bool)
    adj = graph.adjacency()
    stack = [graph.root]
    seen[graph.root] = True
    while stack:
        u = stack.pop()
        for v, _ in adj[u]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    missing = np.flatnonzero(~seen)
    return int(missing[0]) if missing.size else None


def _dijkstra(graph: Graph, source: int):
    """Heap Dijkstra with deterministic tie-breaking.

    Among predecessors giving exactly the same tentative distance the
    smallest node id wins.
    """
    n = graph.n_nodes
    adj = graph.adjacency()
    w = graph.weights.tolist()
    dist = [math.inf] * n
    parent = [-1] * n
    parent_edge = [-1] * n
    done = [False] * n
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v, eid in adj[u]:
            if done[v]:
                continue
            nd = d + w[eid]
            if nd < dist[v]:
                dist[v] = nd
                parent[v] = u
                parent_edge[v] = eid
                heapq.heappush(heap, (nd, v))
            elif nd == dist[v] and u < parent[v]:
                parent[v] = u
                parent_edge[v] = eid
    return dist, parent, parent_edge


def build_path_index(graph: Graph) -> PathIndex:
    """Single-source shortest-path tree from ``graph.root``.

    Raises
    ------
    ValidationError
        If some node cannot be reached from the root.
    """
    dist, parent, parent_edge = _dijkstra(graph, graph.root)
    unreachable = [i for i, d in enumerate(dist) if d == math.inf]
    if unreachable:
        raise ValidationError(
            f"graph is disconnected: node {unreachable[0]} is unreachable "
            f"from root {graph.root}"
        )
    n = graph.n_nodes
    order = sorted(range(n), key=lambda x: (dist[x], x))
    paths: list = [None] * n
    paths[graph.root] = []
    for x in order:
        if x == graph.root:
            continue
        paths[x] = paths[parent[x]] + [parent_edge[x]]
    lengths = np.fromiter((len(p) for p in paths), dtype=np.int64, count=n)
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(lengths, out=ptr[1:])
    flat = np.fromiter(
        (e for p in paths for e in p), dtype=np.int64, count=int(ptr[-1])
    )
    return PathIndex(
        graph=graph,
        parent=_readonly(np.array(parent, dtype=np.int64)),
        parent_edge=_readonly(np.array(parent_edge, dtype=np.int64)),
        dist_from_root=_readonly(np.array(dist, dtype=float)),
        path_ptr=_readonly(ptr),
        path_flat=_readonly(flat),
    )


def gamma_membership(index: PathIndex, node: int) -> frozenset:
    """Edge ids ``e`` whose subgraph ``gamma_e`` contains ``node``."""
    return frozenset(int(e) for e in index.path_edges(node))


def pairwise_distances(graph: Graph, subset) -> DistanceCache:
    """Graph distances between every pair of nodes in ``subset``."""
    ids = np.asarray(list(subset), dtype=np.int64)
    if ids.size == 0:
        raise ValidationError("subset must be nonempty")
    for x in ids.tolist():
        _check_node(graph, x)
    full = _csgraph_dijkstra(graph.to_csgraph(), directed=False, indices=ids)
    block = full[:, ids]
    # per-source searches can differ in the last ulp; keep the matrix exactly symmetric
    block = np.minimum(block, block.T)
    np.fill_diagonal(block, 0.0)
    if not np.all(np.isfinite(block)):
        i, j = np.argwhere(~np.isfinite(block))[0]
        raise ValidationError(
            f"graph is disconnected: nodes {ids[i]} and {ids[j]} are not connected"
        )
    return DistanceCache(node_ids=ids, matrix=block)


def central_root(graph: Graph) -> int:
    """Node of minimum eccentricity; smallest id on ties."""
    full = _csgraph_dijkstra(graph.to_csgraph(), directed=False)
    ecc = full.max(axis=1)
    return int(np.argmin(ecc))


def find_shortest_path_ties(graph: Graph, rtol: float = 1e-12) -> list:
    """Nodes reachable from the root by more than one shortest path.

    Two path lengths count as equal when they agree to ``rtol`` relative.
    """
    dist, _, _ = _dijkstra(graph, graph.root)
    adj = graph.adjacency()
    w = graph.weights
    count = [0] * graph.n_nodes
    count[graph.root] = 1
    for v in sorted(range(graph.n_nodes), key=lambda x: (dist[x], x)):
        if v == graph.root:
            continue
        tol = rtol * max(dist[v], 1.0)
        count[v] = sum(
            count[u] for u, eid in adj[v] if abs(dist[u] + w[eid] - dist[v]) <= tol
            and dist[u] < dist[v]
        )
    return [v for v in range(graph.n_nodes) if count[v] > 1]


def perturb_for_uniqueness(graph: Graph, epsilon: float = 1e-6, seed=None) -> Graph:
    """Multiply every edge weight by ``1 + u`` with ``u ~ U[-epsilon, epsilon]``."""
    if not 0 < epsilon <= 1e-3:
        raise ValidationError(f"epsilon must lie in (0, 1e-3], got {epsilon}")
    rng = np.random.default_rng(seed)
    u = rng.uniform(-epsilon, epsilon, size=graph.n_edges)
    meta = dict(graph.meta, perturbation={"epsilon": epsilon, "seed": seed})
    return replace(graph, weights=graph.weights * (1.0 + u), meta=meta)


def _farthest_point_clusters(points: np.ndarray, budget: int, first: int):
    dmin = np.linalg.norm(points - points[first], axis=1)
    labels = np.zeros(points.shape[0], dtype=np.int64)
    centers = [first]
    while len(centers) < budget:
        nxt = int(np.argmax(dmin))
        if dmin[nxt] == 0.0:
            break
        d = np.linalg.norm(points - points[nxt], axis=1)
        closer = d < dmin
        labels[closer] = len(centers)
        dmin = np.minimum(dmin, d)
        centers.append(nxt)
    return np.array(centers, dtype=np.int64), labels


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if ra > rb:
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True


def build_cluster_graph(points, M: int, density: str = "log", seed=0,
                        random_start: bool = False):
    """Cluster ``points`` and wire the centroids into a random sparse graph.

    Farthest-point clustering gives at most ``M`` clusters whose centroids
    become the nodes. ``ceil(M ln M)`` (``density="log"``) or
    ``ceil(M ** 1.5)`` (``density="sqrt"``) distinct node pairs are drawn
    uniformly without replacement, capped at the complete graph. Leftover
    components are joined greedily through their closest centroid pairs.

    Returns
    -------
    graph : Graph
    assignment : ndarray of int
        Cluster node of every input point.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise ValidationError("need at least 2 points in an (n, d) array")
    if M < 2:
        raise ValidationError(f"cluster budget M must be >= 2, got {M}")
    if density not in ("log", "sqrt"):
        raise ValidationError(f"density must be 'log' or 'sqrt', got {density!r}")
    rng = np.random.default_rng(seed)
    if random_start:
        first = int(rng.integers(pts.shape[0]))
    else:
        first = int(np.lexsort(pts.T[::-1])[0])
    centers, labels = _farthest_point_clusters(pts, M, first)
    k = centers.size
    if k < 2:
        raise ValidationError("all points coincide; fewer than 2 distinct clusters")
    centroids = np.stack([pts[labels == c].mean(axis=0) for c in range(k)])

    target = math.ceil(M * math.log(M)) if density == "log" else math.ceil(M ** 1.5)
    iu, ju = np.triu_indices(k, 1)
    n_pairs = iu.size
    n_sampled = min(target, n_pairs)
    picked = np.sort(rng.choice(n_pairs, size=n_sampled, replace=False))
    edges = [(int(iu[p]), int(ju[p])) for p in picked]

    uf = _UnionFind(k)
    for u, v in edges:
        uf.union(u, v)
    pair_d = np.linalg.norm(centroids[iu] - centroids[ju], axis=1)
    bridges = []
    n_comp = len({uf.find(x) for x in range(k)})
    if n_comp > 1:
        for p in np.argsort(pair_d, kind="stable"):
            u, v = int(iu[p]), int(ju[p])
            if uf.union(u, v):
                bridges.append((u, v))
                if len(bridges) == n_comp - 1:
                    break
    all_edges = np.array(edges + bridges, dtype=np.int64).reshape(-1, 2)
    weights = np.linalg.norm(centroids[all_edges[:, 0]] - centroids[all_edges[:, 1]], axis=1)
    if np.any(weights <= 0):
        raise ValidationError("two clusters share a centroid; cannot form a positive edge")
    meta = {
        "builder": "farthest_point",
        "M": int(M),
        "density": density,
        "seed": seed,
        "random_start": bool(random_start),
        "n_points": int(pts.shape[0]),
        "n_clusters": int(k),
        "target_edges": int(target),
        "n_sampled_edges": int(n_sampled),
        "n_bridge_edges": len(bridges),
        "bridging": "closest_pair",
    }
    graph = Graph(nodes=centroids, edges=all_edges, weights=weights, root=0, meta=meta)
    return graph, labels


def save_graph(graph: Graph, path) -> None:
    path = Path(path)
    try:
        path.write_text(json.dumps(graph.to_dict(), sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise DataIOError(f"cannot write graph to {path}: {exc}") from exc


def load_graph(path) -> Graph:
    """Read a graph JSON document and check connectivity from its root."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataIOError(f"cannot read graph {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON: {exc}") from exc
    graph = Graph.from_dict(data)
    missing = _first_unreachable(graph)
    if missing is not None:
        raise ValidationError(f"{path}: graph is disconnected, node {missing} unreachable")
    return graph
