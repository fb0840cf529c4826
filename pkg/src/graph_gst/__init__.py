"""Generalized Sobolev transport and Orlicz-Wasserstein distances on graphs."""

from .errors import (
    ConvergenceError,
    DataIOError,
    GraphGstError,
    NFunctionRangeError,
    ValidationError,
)
from .graph import (
    DistanceCache,
    Graph,
    PathIndex,
    build_cluster_graph,
    build_path_index,
    gamma_membership,
    load_graph,
    pairwise_distances,
    perturb_for_uniqueness,
    save_graph,
)
from .nfunctions import NFunction, complementary, parse_nfunction
from .ow import exact_ot, orlicz_wasserstein, random_spanning_tree, tree_wasserstein
from .transport import Measure, edge_masses, gst, gst_batch, sobolev_transport

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "DataIOError",
    "GraphGstError",
    "NFunctionRangeError",
    "ValidationError",
    "DistanceCache",
    "Graph",
    "PathIndex",
    "build_cluster_graph",
    "build_path_index",
    "gamma_membership",
    "load_graph",
    "pairwise_distances",
    "perturb_for_uniqueness",
    "save_graph",
    "NFunction",
    "complementary",
    "parse_nfunction",
    "exact_ot",
    "orlicz_wasserstein",
    "random_spanning_tree",
    "tree_wasserstein",
    "Measure",
    "edge_masses",
    "gst",
    "gst_batch",
    "sobolev_transport",
]
