"""Command-line front end.

Exit codes: 0 success, 2 validation error, 3 numeric non-convergence,
4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io as _stdio
import json
import logging
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import io as gio
from .errors import DataIOError, GraphGstError, ValidationError
from .graph import (
    Graph,
    build_cluster_graph,
    build_path_index,
    central_root,
    load_graph,
    pairwise_distances,
    save_graph,
)
from .nfunctions import NFunction, parse_nfunction
from .ow import orlicz_wasserstein, ow_batch, random_spanning_tree, tree_wasserstein
from .transport import gst, gst_batch, sobolev_transport

log = logging.getLogger("graph_gst")

METHODS = ("gst", "st", "ow", "ow-tree")


@dataclass
class RunConfig:
    method: str
    st_order: Optional[float] = None
    phi: Optional[NFunction] = None
    root: str = "file"
    seed: int = 0
    workers: int = 1
    tol: Optional[float] = None

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        method, order = parse_method(args.method)
        phi = None
        if method in ("gst", "ow", "ow-tree"):
            phi = parse_nfunction(args.phi)
        workers = getattr(args, "workers", 1)
        if workers < 1:
            raise ValidationError("--workers must be >= 1")
        return cls(method, order, phi, args.root, args.seed, workers, args.tol)


def parse_method(text: str):
    """``"gst" | "st:p" | "ow" | "ow-tree"`` -> ``(method, st_order)``."""
    head, _, arg = text.partition(":")
    if head not in METHODS:
        raise ValidationError(f"unknown method {text!r}; choose from gst, st:p, ow, ow-tree")
    if head == "st":
        try:
            order = float(arg) if arg else 1.0
        except ValueError:
            raise ValidationError(f"bad Sobolev order in {text!r}") from None
        if order < 1:
            raise ValidationError(f"Sobolev order must be >= 1, got {order}")
        return head, order
    if arg:
        raise ValidationError(f"method {head} takes no argument")
    return head, None


def _apply_root(graph: Graph, root: str) -> Graph:
    if root in ("file", None):
        return graph
    if root == "auto":
        return graph.with_root(central_root(graph))
    try:
        return graph.with_root(int(root))
    except ValueError:
        raise ValidationError(f"--root must be an integer id or 'auto', got {root!r}") from None


class DistanceEngine:
    """Shared preprocessing for one (graph, method) so many pairs can reuse it."""

    def __init__(self, graph: Graph, cfg: RunConfig, nodes=None):
        self.cfg = cfg
        self.graph = _apply_root(graph, cfg.root)
        if cfg.method == "ow-tree" and not self.graph.is_tree():
            log.info("graph is not a tree; sampling a spanning tree (seed=%s)", cfg.seed)
            self.graph = random_spanning_tree(self.graph, cfg.seed)
        self.index = None
        self.dist = None
        if cfg.method in ("gst", "st") or (cfg.method == "ow-tree" and cfg.phi.kind == "linear"):
            self.index = build_path_index(self.graph)
        else:
            if nodes is None:
                nodes = range(self.graph.n_nodes)
            self.dist = pairwise_distances(self.graph, sorted(set(int(x) for x in nodes)))

    def gst_tol(self):
        return self.cfg.tol if self.cfg.tol is not None else 1e-10

    def ow_tol(self):
        return self.cfg.tol if self.cfg.tol is not None else 1e-6

    def one(self, mu, nu) -> float:
        cfg = self.cfg
        if cfg.method == "gst":
            return gst(self.index, mu, nu, cfg.phi, self.gst_tol()).value
        if cfg.method == "st":
            return sobolev_transport(self.index, mu, nu, cfg.st_order)
        if self.index is not None:
            return tree_wasserstein(self.index, mu, nu)
        return orlicz_wasserstein(self.dist, mu, nu, cfg.phi, self.ow_tol()).value

    def many(self, pairs, workers=1) -> list:
        cfg = self.cfg
        if cfg.method == "gst":
            res = gst_batch(self.index, pairs, cfg.phi, self.gst_tol(), workers)
        elif self.dist is not None:
            res = ow_batch(self.dist, pairs, cfg.phi, self.ow_tol(), workers)
        else:
            res = []
            for mu, nu in pairs:
                try:
                    res.append(self.one(mu, nu))
                except GraphGstError as exc:
                    res.append(exc)
        return [r if isinstance(r, (float, Exception)) else r.value for r in res]


def _support_nodes(measures):
    return np.unique(np.concatenate([m.support for m in measures]))


def gram_matrix(graph: Graph, measures, cfg: RunConfig):
    """Pairwise distance matrix and the list of ``(i, j, error)`` failures."""
    engine = DistanceEngine(graph, cfg, _support_nodes(measures))
    n = len(measures)
    iu, ju = np.triu_indices(n, 1)
    pairs = [(measures[i], measures[j]) for i, j in zip(iu.tolist(), ju.tolist())]
    values = engine.many(pairs, cfg.workers)
    mat = np.zeros((n, n))
    failures = []
    for i, j, v in zip(iu.tolist(), ju.tolist(), values):
        if isinstance(v, Exception):
            failures.append((i, j, v))
            v = math.nan
        mat[i, j] = mat[j, i] = v
    return mat, failures


def _load_points(path):
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in (".jsonl", ".ndjson"):
        ds = gio.load_dataset(path)
        return ds.pooled_points(), ds
    try:
        if suffix == ".npy":
            return np.load(path), None
        return np.loadtxt(path, delimiter=",", ndmin=2), None
    except OSError as exc:
        raise DataIOError(f"cannot read points {path}: {exc}") from exc
    except ValueError as exc:
        raise ValidationError(f"{path}: cannot parse points: {exc}") from exc


# -- subcommands --------------------------------------------------------------


def cmd_build_graph(args) -> int:
    points, dataset = _load_points(args.points)
    graph, assignment = build_cluster_graph(
        points, args.M, args.density, seed=args.seed, random_start=args.random_start
    )
    graph = _apply_root(graph, args.root)
    save_graph(graph, args.out)
    assign_out = args.assignment_out or str(Path(args.out).with_suffix("")) + ".assignment.json"
    gio.save_assignment(assignment, assign_out)
    if args.measures_out:
        if dataset is None:
            raise ValidationError("--measures-out needs a JSON-lines dataset as --points")
        measures = gio.ingest(dataset, graph, assignment)
        gio.save_measures(measures, args.measures_out, dataset.labels)
    meta = dict(graph.meta, n_nodes=graph.n_nodes, n_edges=graph.n_edges, root=graph.root)
    print(json.dumps(meta, sort_keys=True))
    return 0


def cmd_dist(args) -> int:
    cfg = RunConfig.from_args(args)
    graph = load_graph(args.graph)
    mu, nu = gio.load_measure(args.mu), gio.load_measure(args.nu)
    engine = DistanceEngine(graph, cfg, _support_nodes([mu, nu]))
    if cfg.method == "gst":
        res = gst(engine.index, mu, nu, cfg.phi, engine.gst_tol())
        out = {"value": res.value, "k_star": res.k_star, "iterations": res.iterations,
               "solver": res.solver}
    elif cfg.method == "ow" or (cfg.method == "ow-tree" and engine.dist is not None):
        res = orlicz_wasserstein(engine.dist, mu, nu, cfg.phi, engine.ow_tol())
        out = {"value": res.value, "inner_value_at_t": res.inner_value_at_t,
               "bisection_iters": res.bisection_iters}
    else:
        out = {"value": engine.one(mu, nu)}
    out["method"] = args.method
    if cfg.phi is not None:
        out["phi"] = cfg.phi.spec
    print(json.dumps(out, sort_keys=True))
    return 0


def cmd_gram(args) -> int:
    cfg = RunConfig.from_args(args)
    graph = load_graph(args.graph)
    measures, _ = gio.load_measures(args.measures)
    mat, failures = gram_matrix(graph, measures, cfg)
    for i, j, exc in failures:
        log.error("pair (%d, %d) failed: %s", i, j, exc)
    if failures:
        # NaN slots break exact symmetry checks; write them explicitly
        _write_matrix_allow_nan(mat, args.out)
        return max(getattr(exc, "exit_code", 3) for _, _, exc in failures)
    gio.save_matrix(mat, args.out)
    return 0


def _write_matrix_allow_nan(mat, path):
    if str(path).lower().endswith(".json"):
        text = json.dumps({"matrix": [[None if math.isnan(x) else x for x in row]
                                      for row in mat.tolist()]}) + "\n"
    else:
        text = "".join(",".join("%.17g" % x for x in row) + "\n" for row in mat.tolist())
    gio._write_text(path, text)


def run_benchmark(graph: Graph, measures, phis, n_pairs: int, seed: int = 0,
                  root: str = "file", tol_gst: float = 1e-10, tol_ow: float = 1e-6):
    """Time GST and OW on identical random pairs.

    Returns one row per (method, phi). Preprocessing (shortest-path index for
    GST, support distance matrix for OW) is timed separately and included in
    ``total_seconds``. A single warm-up pair per method is excluded.
    """
    rows = []
    if n_pairs <= 0 or len(measures) < 2:
        return rows
    rng = np.random.default_rng(seed)
    n = len(measures)
    pick = []
    while len(pick) < n_pairs:
        i, j = rng.choice(n, size=2, replace=False)
        pick.append((measures[int(i)], measures[int(j)]))
    graph = _apply_root(graph, root)
    for phi in phis:
        t0 = time.perf_counter()
        index = build_path_index(graph)
        t_pre_gst = time.perf_counter() - t0
        gst(index, *pick[0], phi, tol_gst)
        t0 = time.perf_counter()
        for mu, nu in pick:
            gst(index, mu, nu, phi, tol_gst)
        t_gst = time.perf_counter() - t0

        t0 = time.perf_counter()
        dist = pairwise_distances(graph, _support_nodes(measures))
        t_pre_ow = time.perf_counter() - t0
        orlicz_wasserstein(dist, *pick[0], phi, tol_ow)
        t0 = time.perf_counter()
        for mu, nu in pick:
            orlicz_wasserstein(dist, mu, nu, phi, tol_ow)
        t_ow = time.perf_counter() - t0

        total_gst, total_ow = t_pre_gst + t_gst, t_pre_ow + t_ow
        for method, pre, solve, total in (
            ("gst", t_pre_gst, t_gst, total_gst),
            ("ow", t_pre_ow, t_ow, total_ow),
        ):
            rows.append({
                "method": method,
                "phi": phi.spec,
                "n_pairs": n_pairs,
                "preprocess_seconds": pre,
                "solve_seconds": solve,
                "total_seconds": total,
                "per_pair_us": 1e6 * total / n_pairs,
                "speedup": total_ow / total_gst if method == "gst" else 1.0,
            })
    return rows


BENCH_FIELDS = ["method", "phi", "n_pairs", "preprocess_seconds", "solve_seconds",
                "total_seconds", "per_pair_us", "speedup"]


def cmd_bench(args) -> int:
    graph = load_graph(args.graph)
    measures, _ = gio.load_measures(args.measures)
    phis = [parse_nfunction(s) for s in args.phi]
    rows = run_benchmark(graph, measures, phis, args.pairs, args.seed, args.root)
    buf = _stdio.StringIO()
    writer = csv.DictWriter(buf, fieldnames=BENCH_FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    if args.out:
        gio._write_text(args.out, buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return 0


def cmd_validate(args) -> int:
    from .validation import run_identity_suite

    graph = load_graph(args.graph) if args.graph else None
    results = run_identity_suite(graph=graph, seed=args.seed, n_instances=args.instances)
    ok = True
    for name, passed, detail in results:
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")
    return 0 if ok else 3


# -- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graph-gst",
        description="Sobolev / Orlicz-Wasserstein transport distances on graphs.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-graph", help="cluster points into a G_Log / G_Sqrt graph")
    p.add_argument("--points", required=True,
                   help="JSON-lines dataset, CSV of coordinates, or .npy array")
    p.add_argument("-M", type=int, required=True, help="cluster budget")
    p.add_argument("--density", choices=["log", "sqrt"], default="log")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--root", default="file", help="node id, 'auto', or 'file' (node 0)")
    p.add_argument("--random-start", action="store_true",
                   help="seeded random first center instead of the lexicographic minimum")
    p.add_argument("--out", required=True)
    p.add_argument("--assignment-out")
    p.add_argument("--measures-out", help="also ingest the dataset into node measures")
    p.set_defaults(func=cmd_build_graph)

    def common(p, phi_default="exp_minus", tol=True):
        p.add_argument("--graph", required=True)
        p.add_argument("--method", default="gst", help="gst | st:p | ow | ow-tree")
        p.add_argument("--phi", default=phi_default, help="N-function spec, e.g. exp_power:p=2")
        p.add_argument("--root", default="file", help="node id, 'auto', or 'file'")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tol", type=float, default=None)

    p = sub.add_parser("dist", help="distance between two measures")
    common(p)
    p.add_argument("--mu", required=True)
    p.add_argument("--nu", required=True)
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("gram", help="pairwise distance matrix over a measure collection")
    common(p)
    p.add_argument("--measures", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gram)

    p = sub.add_parser("bench", help="time GST against OW on random pairs")
    p.add_argument("--graph", required=True)
    p.add_argument("--measures", required=True)
    p.add_argument("--phi", nargs="+", default=["exp_minus"])
    p.add_argument("--pairs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--root", default="file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("validate", help="run the cross-method identity checks")
    p.add_argument("--graph")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=20)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except GraphGstError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except OSError as exc:
        log.error("%s", exc)
        return DataIOError.exit_code


if __name__ == "__main__":
    sys.exit(main())
