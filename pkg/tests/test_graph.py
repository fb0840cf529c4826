import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graph_gst.errors import ValidationError
from graph_gst.graph import (
    Graph,
    build_cluster_graph,
    build_path_index,
    central_root,
    find_shortest_path_ties,
    gamma_membership,
    load_graph,
    pairwise_distances,
    perturb_for_uniqueness,
    save_graph,
)

from conftest import random_connected_graph, random_tree


def bellman_ford(graph, source):
    dist = [math.inf] * graph.n_nodes
    dist[source] = 0.0
    for _ in range(graph.n_nodes - 1):
        for (u, v), w in zip(graph.edges.tolist(), graph.weights.tolist()):
            if dist[u] + w < dist[v]:
                dist[v] = dist[u] + w
            if dist[v] + w < dist[u]:
                dist[u] = dist[v] + w
    return np.array(dist)


def floyd_warshall(graph):
    n = graph.n_nodes
    d = np.full((n, n), math.inf)
    np.fill_diagonal(d, 0.0)
    for (u, v), w in zip(graph.edges.tolist(), graph.weights.tolist()):
        d[u, v] = d[v, u] = min(d[u, v], w)
    for k in range(n):
        d = np.minimum(d, d[:, k : k + 1] + d[k : k + 1, :])
    return d


def simple_paths(graph, src, dst):
    """All simple paths as lists of edge ids (exhaustive DFS)."""
    adj = graph.adjacency()
    out = []

    def walk(u, seen, edges):
        if u == dst:
            out.append(list(edges))
            return
        for v, eid in adj[u]:
            if v not in seen:
                seen.add(v)
                edges.append(eid)
                walk(v, seen, edges)
                edges.pop()
                seen.discard(v)

    walk(src, {src}, [])
    return out


def test_path_graph_index(path_graph):
    idx = build_path_index(path_graph)
    assert idx.path_edges(2).tolist() == [0, 1]
    assert idx.dist_from_root[2] == 3.0
    assert idx.path_edges(0).tolist() == []
    assert idx.dist_from_root[0] == 0.0
    assert idx.parent[0] == -1


def test_dijkstra_matches_bellman_ford(rng):
    graph = random_connected_graph(rng, 50, extra=80)
    idx = build_path_index(graph)
    np.testing.assert_allclose(idx.dist_from_root, bellman_ford(graph, 0), rtol=0, atol=1e-12)


def test_dist_from_root_is_sequential_path_sum(rng):
    graph = random_connected_graph(rng, 40)
    idx = build_path_index(graph)
    for x in range(graph.n_nodes):
        total = 0.0
        for e in idx.path_edges(x).tolist():
            total += graph.weights[e]
        assert total == idx.dist_from_root[x]


def test_gamma_membership_small_cases(two_node):
    idx = build_path_index(two_node)
    assert gamma_membership(idx, 1) == {0}
    assert gamma_membership(idx, 0) == frozenset()
    star = Graph(np.zeros((5, 1)) + np.arange(5)[:, None], [[0, i] for i in range(1, 5)],
                 [1.0, 2.0, 3.0, 4.0], root=0)
    sidx = build_path_index(star)
    for leaf in range(1, 5):
        assert gamma_membership(sidx, leaf) == {leaf - 1}
    with pytest.raises(ValidationError):
        gamma_membership(sidx, 9)


@pytest.mark.parametrize("seed", range(6))
def test_gamma_sets_match_path_enumeration(seed):
    rng = np.random.default_rng(seed)
    graph = random_connected_graph(rng, int(rng.integers(4, 11)), extra=4)
    idx = build_path_index(graph)
    for x in range(graph.n_nodes):
        paths = simple_paths(graph, graph.root, x)
        lengths = [sum(graph.weights[e] for e in p) for p in paths]
        best = paths[int(np.argmin(lengths))]
        assert gamma_membership(idx, x) == frozenset(best)
        # x in gamma_e  <=>  e on the root path of x
        for e in range(graph.n_edges):
            assert (e in best) == (e in idx.path_edges(x).tolist())


def test_pairwise_distances_examples(path_graph, rng):
    one = pairwise_distances(path_graph, [1])
    assert one.matrix.shape == (1, 1) and one.matrix[0, 0] == 0.0
    assert pairwise_distances(path_graph, [0, 1, 2]).matrix[0, 2] == 3.0
    graph = random_connected_graph(rng, 50, extra=70)
    cache = pairwise_distances(graph, range(50))
    np.testing.assert_allclose(cache.matrix, floyd_warshall(graph), rtol=0, atol=1e-12)
    with pytest.raises(ValidationError):
        pairwise_distances(graph, [])
    with pytest.raises(ValidationError):
        pairwise_distances(graph, [50])


def test_distance_cache_is_metric(rng):
    graph = random_connected_graph(rng, 30, extra=40)
    d = pairwise_distances(graph, range(30)).matrix
    assert np.array_equal(d, d.T)
    assert np.all(np.diag(d) == 0)
    excess = d[:, None, :] - d[:, :, None] - d[None, :, :].transpose(0, 2, 1)
    # d[i,k] <= d[i,j] + d[j,k]
    viol = d[:, None, :] - (d[:, :, None] + d[None, :, :])
    assert viol.max() <= 1e-9
    del excess


def test_tree_paths_are_length_measure(rng):
    tree = random_tree(rng, 25)
    idx = build_path_index(tree)
    d = pairwise_distances(tree, range(25)).matrix
    for x, y in itertools.combinations(range(25), 2):
        seg = set(idx.path_edges(x).tolist()) ^ set(idx.path_edges(y).tolist())
        assert math.isclose(sum(tree.weights[e] for e in seg), d[x, y], abs_tol=1e-12)


def test_validation_errors():
    with pytest.raises(ValidationError, match="unreachable"):
        build_path_index(Graph(np.zeros((3, 1)), [[0, 1]], [1.0]))
    with pytest.raises(ValidationError, match="nonpositive"):
        Graph(np.zeros((2, 1)), [[0, 1]], [0.0])
    with pytest.raises(ValidationError, match="self-loop"):
        Graph(np.zeros((2, 1)), [[1, 1]], [1.0])
    with pytest.raises(ValidationError, match="duplicate"):
        Graph(np.zeros((2, 1)), [[0, 1], [1, 0]], [1.0, 2.0])
    with pytest.raises(ValidationError):
        Graph(np.zeros((2, 1)), [[0, 1]], [1.0], root=5)


def test_disconnected_error_names_node():
    g = Graph(np.zeros((4, 1)), [[0, 1], [2, 3]], [1.0, 1.0])
    with pytest.raises(ValidationError, match="node 2"):
        build_path_index(g)


def test_cluster_graph_well_separated():
    pts = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]])
    g, assign = build_cluster_graph(pts, 4, "log", seed=1)
    assert g.n_nodes == 4
    # ceil(4 ln 4) = 6 equals the complete-graph size
    assert g.meta["target_edges"] == 6 and g.n_edges == 6
    build_path_index(g)
    assert sorted(assign.tolist()) == [0, 1, 2, 3]


def test_cluster_graph_two_points():
    g, assign = build_cluster_graph([[0.0, 0.0], [3.0, 4.0]], 2, "log", seed=0)
    assert g.n_nodes == 2 and g.n_edges == 1
    assert g.weights[0] == 5.0


def test_cluster_graph_deterministic_and_connected():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(500, 4))
    g1, a1 = build_cluster_graph(pts, 50, "log", seed=7)
    g2, a2 = build_cluster_graph(pts, 50, "log", seed=7)
    assert np.array_equal(g1.edges, g2.edges) and np.array_equal(g1.weights, g2.weights)
    assert np.array_equal(a1, a2)
    assert g1.n_edges == math.ceil(50 * math.log(50)) + g1.meta["n_bridge_edges"]
    build_path_index(g1)
    g3, _ = build_cluster_graph(pts, 50, "sqrt", seed=7)
    assert g3.meta["target_edges"] == math.ceil(50 ** 1.5)


def test_cluster_graph_bridges_components():
    # two far-apart blobs and a sparse edge budget force bridging
    rng = np.random.default_rng(0)
    pts = np.concatenate([rng.normal(size=(60, 2)), rng.normal(size=(60, 2)) + 100])
    g, _ = build_cluster_graph(pts, 30, "log", seed=4)
    build_path_index(g)
    assert g.n_edges == g.meta["n_sampled_edges"] + g.meta["n_bridge_edges"]


def test_cluster_graph_errors():
    with pytest.raises(ValidationError):
        build_cluster_graph([[0.0, 0.0], [1.0, 1.0]], 1)
    with pytest.raises(ValidationError):
        build_cluster_graph([[1.0, 1.0]] * 5, 3)
    with pytest.raises(ValidationError):
        build_cluster_graph([[0.0], [1.0]], 2, density="cubic")


def test_cluster_graph_duplicates_still_valid():
    pts = [[0.0, 0.0]] * 5 + [[1.0, 1.0]] * 5
    g, assign = build_cluster_graph(pts, 5, seed=0)
    assert g.n_nodes == 2
    assert assign.tolist() == [0] * 5 + [1] * 5


def test_perturbation_breaks_cycle_ties():
    square = Graph([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 1], [1, 2], [2, 3], [3, 0]],
                   [1.0, 1.0, 1.0, 1.0])
    # oracle: enumerate both root->2 paths
    lengths = sorted(sum(square.weights[e] for e in p) for p in simple_paths(square, 0, 2))
    assert lengths[0] == lengths[1]
    assert find_shortest_path_ties(square) == [2]
    pert = perturb_for_uniqueness(square, 1e-4, seed=0)
    assert np.all(pert.weights > 0)
    lengths = sorted(sum(pert.weights[e] for e in p) for p in simple_paths(pert, 0, 2))
    assert lengths[0] < lengths[1]
    assert find_shortest_path_ties(pert) == []


def test_perturbation_bounds(rng):
    graph = random_connected_graph(rng, 30)
    pert = perturb_for_uniqueness(graph, 1e-6, seed=1)
    d0 = build_path_index(graph).dist_from_root
    d1 = build_path_index(pert).dist_from_root
    assert np.all(np.abs(d1 - d0) <= 1e-6 * d0 + 1e-15)
    for eps in (0.0, 2e-3, -1e-4):
        with pytest.raises(ValidationError):
            perturb_for_uniqueness(graph, eps, seed=0)


def test_central_root():
    line = Graph(np.arange(5.0)[:, None], [[i, i + 1] for i in range(4)], [1.0] * 4)
    assert central_root(line) == 2


def test_json_round_trip(tmp_path, rng):
    graph = random_connected_graph(rng, 20)
    path = tmp_path / "g.json"
    save_graph(graph, path)
    back = load_graph(path)
    assert np.array_equal(back.edges, graph.edges)
    assert np.array_equal(back.weights, graph.weights)
    assert np.array_equal(back.nodes, graph.nodes)
    bad = {"nodes": [[0], [1], [2]], "edges": [[0, 1, 1.0]], "root": 0}
    (tmp_path / "bad.json").write_text(json.dumps(bad))
    with pytest.raises(ValidationError, match="disconnected"):
        load_graph(tmp_path / "bad.json")
    (tmp_path / "neg.json").write_text(json.dumps({"nodes": [[0], [1]], "edges": [[0, 1, -1]]}))
    with pytest.raises(ValidationError):
        load_graph(tmp_path / "neg.json")


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(2, 30))
def test_index_invariants_property(seed, n):
    graph = random_connected_graph(np.random.default_rng(seed), n)
    idx = build_path_index(graph)
    d = pairwise_distances(graph, [graph.root] + list(range(n))).matrix[0, 1:]
    np.testing.assert_allclose(idx.dist_from_root, d, rtol=1e-12, atol=1e-12)
    for x in range(n):
        path = idx.path_edges(x).tolist()
        if x != graph.root:
            # path ends at x via its parent edge
            assert path[-1] == idx.parent_edge[x]
