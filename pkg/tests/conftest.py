import numpy as np
import pytest

from graph_gst.graph import Graph, build_cluster_graph
from graph_gst.transport import Measure


def random_connected_graph(rng, n, extra=None, dim=2):
    """Random spanning tree plus ``extra`` random chords, random coordinates and weights."""
    pts = rng.random((n, dim))
    edges = set()
    for v in range(1, n):
        u = int(rng.integers(v))
        edges.add((u, v))
    extra = n if extra is None else extra
    tries = 0
    while extra > 0 and tries < 50 * n:
        tries += 1
        u, v = sorted(int(x) for x in rng.choice(n, 2, replace=False))
        if (u, v) not in edges:
            edges.add((u, v))
            extra -= 1
    edges = sorted(edges)
    w = rng.uniform(0.1, 2.0, size=len(edges))
    return Graph(pts, edges, w, root=0)


def random_tree(rng, n):
    return random_connected_graph(rng, n, extra=0)


def random_measure(rng, n_nodes, max_support=8, min_support=1):
    k = int(rng.integers(min_support, min(max_support, n_nodes) + 1))
    nodes = rng.choice(n_nodes, size=k, replace=False)
    return Measure.from_weights(nodes, rng.random(k) + 1e-3)


def cluster_graph(seed, M=20, density="log", n_points=None, dim=3):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n_points or 10 * M, dim))
    graph, _ = build_cluster_graph(pts, M, density, seed=seed)
    return graph


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def path_graph():
    # a(0) -- b(1) -- c(2) with weights 1, 2
    return Graph([[0.0], [1.0], [3.0]], [[0, 1], [1, 2]], [1.0, 2.0], root=0)


@pytest.fixture
def two_node():
    return Graph([[0.0], [1.0]], [[0, 1]], [1.0], root=0)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
