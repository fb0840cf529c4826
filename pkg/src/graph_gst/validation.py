"""Cross-method identity checks behind ``graph-gst validate``."""

from __future__ import annotations

import numpy as np

from .graph import Graph, build_cluster_graph, build_path_index, pairwise_distances
from .nfunctions import exp_minus, power, power_scaled
from .ow import CouplingProblem, exact_ot, orlicz_wasserstein, random_spanning_tree, tree_wasserstein
from .transport import Measure, gst, sobolev_transport


def random_measure(rng, n_nodes: int, max_support: int = 8) -> Measure:
    k = int(rng.integers(1, min(max_support, n_nodes) + 1))
    nodes = rng.choice(n_nodes, size=k, replace=False)
    return Measure.from_weights(nodes, rng.random(k) + 1e-3)


def random_graph(seed, M: int = 30, dim: int = 3) -> Graph:
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(10 * M, dim))
    graph, _ = build_cluster_graph(pts, M, "log", seed=seed)
    return graph


def run_identity_suite(graph: Graph = None, seed: int = 0, n_instances: int = 20):
    """Return ``[(name, passed, detail), ...]`` for the identity checks."""
    rng = np.random.default_rng(seed)
    if graph is None:
        graph = random_graph(seed)
    index = build_path_index(graph)
    n = graph.n_nodes
    pairs = [(random_measure(rng, n), random_measure(rng, n)) for _ in range(n_instances)]
    out = []

    worst = 0.0
    for p in (1.5, 2.0, 3.0):
        for mu, nu in pairs:
            st = sobolev_transport(index, mu, nu, p)
            val = gst(index, mu, nu, power_scaled(p), solver="newton").value
            worst = max(worst, abs(val - st) / (1.0 + st))
    out.append(("gst_power_scaled_equals_st", worst <= 1e-8, f"max rel err {worst:.2e}"))

    tree = random_spanning_tree(graph, seed)
    tindex = build_path_index(tree)
    tdist = pairwise_distances(tree, range(n))
    e_tw = e_ot = 0.0
    for mu, nu in pairs:
        s1 = sobolev_transport(tindex, mu, nu, 1.0)
        e_tw = max(e_tw, abs(s1 - tree_wasserstein(tindex, mu, nu)))
        w1, _ = exact_ot(CouplingProblem(mu.mass, nu.mass, tdist.submatrix(mu.support, nu.support)))
        e_ot = max(e_ot, abs(s1 - w1))
    out.append(("tree_st1_equals_tree_wasserstein", e_tw <= 1e-9, f"max abs err {e_tw:.2e}"))
    out.append(("tree_st1_equals_exact_ot", e_ot <= 1e-8, f"max abs err {e_ot:.2e}"))

    dist = pairwise_distances(graph, range(n))
    worst = 0.0
    for p in (1.5, 2.0):
        for mu, nu in pairs[: max(1, n_instances // 4)]:
            ow = orlicz_wasserstein(dist, mu, nu, power(p)).value
            wpp, _ = exact_ot(CouplingProblem(mu.mass, nu.mass, dist.submatrix(mu.support, nu.support) ** p))
            ref = wpp ** (1.0 / p)
            if ref > 0:
                worst = max(worst, abs(ow - ref) / ref)
    out.append(("ow_power_equals_wasserstein_p", worst <= 1e-6, f"max rel err {worst:.2e}"))

    phi = exp_minus()
    ok = True
    worst = 0.0
    for i in range(len(pairs)):
        mu, nu = pairs[i]
        sigma = pairs[(i + 1) % len(pairs)][0]
        d_mn = gst(index, mu, nu, phi).value
        ok &= d_mn >= 0 and d_mn == gst(index, nu, mu, phi).value
        ok &= gst(index, mu, mu, phi).value == 0.0
        gap = d_mn - gst(index, mu, sigma, phi).value - gst(index, sigma, nu, phi).value
        worst = max(worst, gap)
    ok &= worst <= 1e-9
    out.append(("gst_metric_axioms", bool(ok), f"max triangle excess {worst:.2e}"))
    return out
