"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

The lines are printed as the test runs and again in the pytest terminal
summary under "acceptance criteria".
"""

import math
import time

import numpy as np
import pytest

from graph_gst.cli import main, run_benchmark
from graph_gst.graph import build_cluster_graph, build_path_index, pairwise_distances
from graph_gst.io import RawDataset, ingest, load_matrix, save_measures
from graph_gst.nfunctions import (
    complementary, exp_minus, exp_power, log_entropy, power, power_div, power_scaled,
    power_sum,
)
from graph_gst.graph import save_graph
from graph_gst.ow import CouplingProblem, exact_ot, orlicz_wasserstein, tree_wasserstein
from graph_gst.transport import edge_masses, gst, gst_from_edge_masses, sobolev_transport

from conftest import ACCEPTANCE_LINES, cluster_graph, random_measure, random_tree


def report(num, title, passed, detail):
    line = f"criterion {num}: {'PASS' if passed else 'FAIL'}  {title}  ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert passed, line


def synthetic_dataset(rng, n_items, dim=5, n_topics=5, min_pts=10, max_pts=20):
    topics = rng.normal(size=(n_topics, dim)) * 4
    points = []
    for i in range(n_items):
        k = int(rng.integers(min_pts, max_pts + 1))
        centre = topics[i % n_topics]
        points.append(centre + rng.normal(size=(k, dim)))
    return RawDataset(points, [None] * n_items)


def test_criterion_1_closed_form_equivalence():
    t0 = time.perf_counter()
    worst = 0.0
    ok = True
    for M in (20, 100):
        graph = cluster_graph(seed=M, M=M)
        idx = build_path_index(graph)
        rng = np.random.default_rng(M)
        for _ in range(50):
            mu, nu = random_measure(rng, M, 15), random_measure(rng, M, 15)
            for p in (1.5, 2.0, 3.0):
                sp = sobolev_transport(idx, mu, nu, p)
                for solver in ("auto", "newton"):
                    err = abs(gst(idx, mu, nu, power_scaled(p), solver=solver).value - sp)
                    worst = max(worst, err / (1 + sp))
                    ok &= err <= 1e-8 * (1 + sp)
    elapsed = time.perf_counter() - t0
    report(1, "closed-form equivalence", ok and elapsed < 10,
           f"100 instances, max err/(1+S_p) = {worst:.2e}, {elapsed:.2f} s")


def test_criterion_2_tree_triple_equality():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst_tw = worst_ot = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 31))
        tree = random_tree(rng, n)
        idx = build_path_index(tree)
        cache = pairwise_distances(tree, range(n))
        mu, nu = random_measure(rng, n, 12), random_measure(rng, n, 12)
        s1 = sobolev_transport(idx, mu, nu, 1.0)
        worst_tw = max(worst_tw, abs(s1 - tree_wasserstein(idx, mu, nu)))
        ot, _ = exact_ot(CouplingProblem(mu.mass, nu.mass, cache.submatrix(mu.support, nu.support)))
        worst_ot = max(worst_ot, abs(s1 - ot))
    elapsed = time.perf_counter() - t0
    report(2, "tree triple equality", worst_tw <= 1e-9 and worst_ot <= 1e-8 and elapsed < 30,
           f"50 trees, |S1-TW| <= {worst_tw:.1e}, |S1-OT| <= {worst_ot:.1e}, {elapsed:.2f} s")


def test_criterion_3_ow_power_identity():
    t0 = time.perf_counter()
    graph = cluster_graph(seed=3, M=100)
    cache = pairwise_distances(graph, range(graph.n_nodes))
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(20):
        mu, nu = random_measure(rng, 100, 30), random_measure(rng, 100, 30)
        d = cache.submatrix(mu.support, nu.support)
        for p in (1.5, 2.0):
            ref, _ = exact_ot(CouplingProblem(mu.mass, nu.mass, d ** p))
            ref = ref ** (1 / p)
            got = orlicz_wasserstein(cache, mu, nu, power(p)).value
            worst = max(worst, abs(got - ref) / ref)
    elapsed = time.perf_counter() - t0
    report(3, "OW power-law identity", worst <= 1e-6 and elapsed < 60,
           f"20 pairs x p in {{1.5, 2}}, max rel err {worst:.2e}, {elapsed:.2f} s")


def test_criterion_4_metric_axioms():
    t0 = time.perf_counter()
    graph = cluster_graph(seed=4, M=50)
    idx = build_path_index(graph)
    rng = np.random.default_rng(4)
    failures = []
    for phi in (power_scaled(2), exp_minus(), exp_power(2)):
        for _ in range(200):
            a, b, c = (random_measure(rng, 50, 12) for _ in range(3))
            ab = gst(idx, a, b, phi).value
            ba = gst(idx, b, a, phi).value
            bc = gst(idx, b, c, phi).value
            ac = gst(idx, a, c, phi).value
            if min(ab, bc, ac) < 0 or ab != ba or gst(idx, a, a, phi).value != 0.0:
                failures.append(phi.spec)
            if ac > ab + bc + 1e-9:
                failures.append(phi.spec)
    elapsed = time.perf_counter() - t0
    report(4, "metric axioms", not failures and elapsed < 60,
           f"600 triples, {len(failures)} violations, {elapsed:.2f} s")


def test_criterion_5_monotonicity():
    lo_phi, hi_phi = power(2), power_sum(2, 3)
    t = np.linspace(0.0, 10.0, 100001)
    ordered = bool(np.all(lo_phi(t) <= hi_phi(t)))
    graph = cluster_graph(seed=5, M=50)
    idx = build_path_index(graph)
    rng = np.random.default_rng(5)
    worst = -math.inf
    for _ in range(100):
        mu, nu = random_measure(rng, 50, 12), random_measure(rng, 50, 12)
        worst = max(worst, gst(idx, mu, nu, lo_phi).value - gst(idx, mu, nu, hi_phi).value)
    report(5, "monotonicity in Phi", ordered and worst <= 1e-10,
           f"grid-ordered={ordered}, max(gst1 - gst2) = {worst:.2e} over 100 pairs")


def test_criterion_6_complement_correctness():
    psi = complementary(exp_power(2)).psi
    a = np.arange(0.0, 10.0 + 1e-12, 1e-5)
    grid_err = 0.0
    for t in (0.5, 1.0, 2.0):
        with np.errstate(over="ignore"):
            oracle = np.max(a * t - exp_power(2).values(a))
        grid_err = max(grid_err, abs(psi(t) - oracle))
    young_ok = True
    eq_err = 0.0
    s = np.linspace(0.0, 5.0, 50)
    for phi in (power(2), power(3), power_scaled(1.5), power_div(2), power_div(3),
                exp_minus(), log_entropy()):
        pair = complementary(phi)
        young_ok &= bool(np.all(np.outer(s, s) <= phi(s)[:, None] + pair.psi(s)[None, :] + 1e-12))
        for ti in s:
            si = phi.derivatives(ti)[0]
            eq_err = max(eq_err, abs(phi(ti) + float(pair.psi(si)) - ti * si))
    report(6, "complementary functions", grid_err <= 1e-4 and young_ok and eq_err <= 1e-8,
           f"grid-sup err {grid_err:.1e}, Young holds={young_ok}, equality err {eq_err:.1e}")


def test_criterion_7_limit_behaviour():
    graph = cluster_graph(seed=7, M=50)
    idx = build_path_index(graph)
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(50):
        mu, nu = random_measure(rng, 50, 12), random_measure(rng, 50, 12)
        s1 = sobolev_transport(idx, mu, nu, 1.0)
        g = gst(idx, mu, nu, power_scaled(1.001)).value
        worst = max(worst, abs(g - s1) / s1)
    report(7, "p -> 1+ limit", worst <= 0.01, f"50 instances, max rel diff {worst:.2e}")


def test_criterion_8_sparsity_identity():
    graph = cluster_graph(seed=8, M=100)
    idx = build_path_index(graph)
    rng = np.random.default_rng(8)
    mismatches = 0
    for _ in range(50):
        mu, nu = random_measure(rng, 100, 10), random_measure(rng, 100, 10)
        h = edge_masses(idx, mu, nu)
        for phi in (exp_minus(), exp_power(2), power_scaled(2)):
            active = gst_from_edge_masses(h.values, graph.weights[h.edge_ids], phi).value
            full = gst_from_edge_masses(h.dense(), graph.weights, phi).value
            mismatches += active != full
    report(8, "sparsity identity", mismatches == 0,
           f"50 instances x 3 Phi, {mismatches} non-identical results")


def test_criterion_9_performance():
    rng = np.random.default_rng(9)
    ds = synthetic_dataset(rng, 100)
    graph, assign = build_cluster_graph(ds.pooled_points(), 100, "log", seed=9)
    measures = ingest(ds, graph, assign)
    sizes = [len(m) for m in measures]
    rows = run_benchmark(graph, measures, [exp_minus()], 1000, seed=9)
    by = {r["method"]: r for r in rows}
    t_gst, t_ow = by["gst"]["total_seconds"], by["ow"]["total_seconds"]
    report(9, "GST vs OW speed", t_gst <= t_ow / 10 and t_gst < 5.0,
           f"M=100, 1000 pairs, supports {min(sizes)}-{max(sizes)}: GST {t_gst:.2f} s, "
           f"OW {t_ow:.1f} s, speedup {t_ow / t_gst:.0f}x")


def test_criterion_10_determinism(tmp_path):
    rng = np.random.default_rng(10)
    ds = synthetic_dataset(rng, 50)
    graph, assign = build_cluster_graph(ds.pooled_points(), 60, "log", seed=10)
    save_graph(graph, tmp_path / "g.json")
    save_measures(ingest(ds, graph, assign), tmp_path / "m.json")
    outs = []
    for workers in ("1", "8"):
        out = tmp_path / f"gram{workers}.csv"
        code = main(["gram", "--graph", str(tmp_path / "g.json"), "--measures",
                     str(tmp_path / "m.json"), "--phi", "exp_minus", "--workers", workers,
                     "--out", str(out)])
        assert code == 0
        outs.append(out.read_bytes())
    n = load_matrix(tmp_path / "gram1.csv").shape[0]
    report(10, "gram determinism", outs[0] == outs[1],
           f"{n} measures, 1 vs 8 workers, {len(outs[0])} bytes each")
