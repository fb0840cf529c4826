"""Generalized Sobolev transport (GST) and Sobolev transport (ST) on graphs.

For measures supported on graph nodes, GST reduces to a univariate problem

    GST(mu, nu) = inf_{k > 0} (1/k) * (1 + sum_e w_e Phi(k |h(e)|)),

with ``h(e) = mu(gamma_e) - nu(gamma_e)`` the net mass below edge ``e``.
Writing ``S(k) = sum_e w_e Phi(k |h(e)|)``, the objective has derivative
``G(k) / k**2`` with ``G(k) = k S'(k) - S(k) - 1``. ``G`` starts at ``-1``
and is nondecreasing (``G' = k S'' >= 0``), so the minimizer is the root of
``G`` and a bracketed Newton iteration finds it.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import ConvergenceError, GraphGstError, ValidationError
from .graph import PathIndex
from .nfunctions import NFunction
from .roots import expand_upper, newton_bisect

__all__ = [
    "Measure",
    "EdgeMassVector",
    "GstResult",
    "edge_masses",
    "gst",
    "gst_from_edge_masses",
    "sobolev_transport",
    "gst_batch",
    "ZERO_MASS_THRESHOLD",
    "K_CAP",
]

#: net edge masses at or below this magnitude count as zero
ZERO_MASS_THRESHOLD = 1e-15
#: upper limit for the bracket search on k * max|h|
K_CAP = 1e9


@dataclass(frozen=True, eq=False)
class Measure:
    """Probability measure on graph nodes, stored sorted by node id."""

    support: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.int64).reshape(-1)
        mass = np.asarray(self.mass, dtype=float).reshape(-1)
        if support.shape != mass.shape:
            raise ValidationError("support and mass differ in length")
        if support.size == 0:
            raise ValidationError("measure has empty support")
        if np.any(support < 0):
            raise ValidationError("negative node id in support")
        if not np.all(np.isfinite(mass)) or np.any(mass < 0):
            raise ValidationError("masses must be finite and nonnegative")
        order = np.argsort(support, kind="stable")
        support, mass = support[order], mass[order]
        if np.any(support[1:] == support[:-1]):
            raise ValidationError("duplicate node id in support")
        total = math.fsum(mass.tolist())
        if abs(total - 1.0) > 1e-12:
            raise ValidationError(f"measure is not normalized: total mass {total!r}")
        support.setflags(write=False)
        mass.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "mass", mass)

    @classmethod
    def from_weights(cls, nodes, weights, max_drift: Optional[float] = None) -> "Measure":
        """Merge duplicate nodes and normalize ``weights`` to total 1.

        With ``max_drift`` set, inputs whose total deviates from 1 by more
        than that are rejected instead of rescaled.
        """
        nodes = np.asarray(nodes, dtype=np.int64).reshape(-1)
        weights = np.asarray(weights, dtype=float).reshape(-1)
        if nodes.shape != weights.shape:
            raise ValidationError("nodes and weights differ in length")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ValidationError("weights must be finite and nonnegative")
        uniq, inv = np.unique(nodes, return_inverse=True)
        groups = [[] for _ in range(uniq.size)]
        for slot, weight in zip(inv.tolist(), weights.tolist()):
            groups[slot].append(weight)
        # fsum is exactly rounded, so the merge does not depend on input order
        merged = np.array([math.fsum(g) for g in groups])
        total = math.fsum(merged.tolist())
        if not total > 0:
            raise ValidationError("total weight is zero")
        if max_drift is not None and abs(total - 1.0) > max_drift:
            raise ValidationError(f"total mass {total!r} deviates from 1 by more than {max_drift:g}")
        mass = merged / total
        # absorb the last rounding residue so the fsum is exactly representable near 1
        resid = 1.0 - math.fsum(mass.tolist())
        mass[np.argmax(mass)] += resid
        return cls(uniq, mass)

    @classmethod
    def dirac(cls, node: int) -> "Measure":
        return cls([node], [1.0])

    def __len__(self):
        return self.support.size

    def __eq__(self, other):
        if not isinstance(other, Measure):
            return NotImplemented
        return np.array_equal(self.support, other.support) and np.array_equal(
            self.mass, other.mass
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class EdgeMassVector:
    """Net mass ``h(e)`` on the active edges ``E_{mu,nu}`` (ascending ids)."""

    edge_ids: np.ndarray
    values: np.ndarray
    n_edges: int

    def dense(self) -> np.ndarray:
        out = np.zeros(self.n_edges)
        out[self.edge_ids] = self.values
        return out

    def as_dict(self) -> dict:
        return {int(e): float(v) for e, v in zip(self.edge_ids, self.values)}


@dataclass(frozen=True)
class GstResult:
    value: float
    k_star: Optional[float]
    iterations: int
    solver: str


def _path_mass(index: PathIndex, measure: Measure):
    sup = measure.support
    if sup.size and sup[-1] >= index.n_nodes:
        raise ValidationError(f"support node {int(sup[-1])} not in graph")
    starts = index.path_ptr[sup]
    lengths = index.path_ptr[sup + 1] - starts
    total = int(lengths.sum())
    # flat positions of every support's path inside path_flat
    offsets = np.repeat(starts - (np.cumsum(lengths) - lengths), lengths)
    idx = index.path_flat[offsets + np.arange(total)]
    wts = np.repeat(measure.mass, lengths)
    return idx, wts


def edge_masses(index: PathIndex, mu: Measure, nu: Measure) -> EdgeMassVector:
    """Aggregate ``h(e) = mu(gamma_e) - nu(gamma_e)`` over the active edges.

    Both sides are accumulated separately and subtracted once, so swapping
    ``mu`` and ``nu`` negates the result exactly.
    """
    m = index.graph.n_edges
    idx_mu, w_mu = _path_mass(index, mu)
    idx_nu, w_nu = _path_mass(index, nu)
    h_mu = np.bincount(idx_mu, weights=w_mu, minlength=m)
    h_nu = np.bincount(idx_nu, weights=w_nu, minlength=m)
    active = np.zeros(m, dtype=bool)
    active[idx_mu] = True
    active[idx_nu] = True
    ids = np.flatnonzero(active)
    return EdgeMassVector(edge_ids=ids, values=h_mu[ids] - h_nu[ids], n_edges=m)


def _check_tol(tol):
    if not 0 < tol <= 1e-3:
        raise ValidationError(f"tol must lie in (0, 1e-3], got {tol}")


def gst_from_edge_masses(values, weights, phi: NFunction, tol: float = 1e-10,
                         solver: str = "auto") -> GstResult:
    """GST from net edge masses ``values`` and edge lengths ``weights``.

    ``solver="auto"`` uses the closed forms for ``power_scaled`` and
    ``linear``; ``solver="newton"`` forces the root search on ``G`` for any
    kind that is not ``linear``.
    """
    _check_tol(tol)
    if solver not in ("auto", "newton"):
        raise ValidationError(f"solver must be 'auto' or 'newton', got {solver!r}")
    a = np.abs(np.asarray(values, dtype=float))
    w = np.asarray(weights, dtype=float)
    if a.shape != w.shape:
        raise ValidationError("values and weights differ in length")
    # entries at roundoff level count as zero; Phi(0) = 0 so they are dropped up front
    keep = a > ZERO_MASS_THRESHOLD
    a, w = a[keep], w[keep]
    if a.size == 0:
        return GstResult(0.0, None, 0, "closed_form")

    if phi.kind == "linear":
        return GstResult(float(np.sum(w * a)), None, 0, "closed_form")
    if phi.kind == "power_scaled" and solver == "auto":
        p = phi.p
        value = float(np.sum(w * a ** p)) ** (1.0 / p)
        return GstResult(value, p / ((p - 1.0) * value), 0, "closed_form")

    def S(k):
        return float(np.sum(w * phi.values(k * a)))

    def G(k):
        x = k * a
        if x.max() > phi.max_argument:
            return math.inf, math.inf
        _, d2 = phi.derivative_values(x)
        # k S'(k) - S(k) summed termwise as x Phi'(x) - Phi(x)
        g = np.sum(w * phi.legendre_values(x)) - 1.0
        s2 = np.sum(w * a * a * d2)
        if not math.isfinite(g):
            return math.inf, math.inf
        return float(g), float(k * s2)

    calls = 0

    def G_counted(k):
        nonlocal calls
        calls += 1
        return G(k)

    slope = phi.linear_slope
    if slope is not None:
        # past k_tail every argument sits on the linear piece and G is constant
        k_tail = 1.0 / float(a.min())
        if G_counted(k_tail)[0] <= 0:
            return GstResult(float(np.sum(w * slope * a)), None, calls, "closed_form")
        lo, hi = 0.0, k_tail
    else:
        # k* scales like 1/max|h|, so the search and its cap are in units of k*max|h|
        scale = 1.0 / float(a.max())
        try:
            lo, hi = expand_upper(G_counted, start=scale, cap=K_CAP * scale)
        except ConvergenceError as exc:
            raise ConvergenceError(
                f"{phi.spec}: G(k) stays nonpositive up to k*max|h|={K_CAP:g}; "
                "the function does not grow fast enough",
                bracket=exc.bracket,
            ) from None
    root = newton_bisect(G_counted, lo, hi, ftol=tol, rtol=tol, maxiter=500)
    k = root.x
    value = (1.0 + S(k)) / k
    return GstResult(value, k, calls, "bisection" if root.bisections else "newton")


def gst(index: PathIndex, mu: Measure, nu: Measure, phi: NFunction,
        tol: float = 1e-10, solver: str = "auto") -> GstResult:
    """Generalized Sobolev transport between node measures ``mu`` and ``nu``.

    Examples
    --------
    >>> from graph_gst.graph import Graph, build_path_index
    >>> from graph_gst.nfunctions import exp_minus
    >>> idx = build_path_index(Graph([[0.0], [1.0]], [[0, 1]], [1.0]))
    >>> round(gst(idx, Measure.dirac(0), Measure.dirac(1), exp_minus()).value, 6)
    1.718282
    """
    h = edge_masses(index, mu, nu)
    return gst_from_edge_masses(h.values, index.graph.weights[h.edge_ids], phi, tol, solver)


def sobolev_transport(index: PathIndex, mu: Measure, nu: Measure, p: float = 1.0) -> float:
    """Closed-form order-``p`` Sobolev transport ``(sum_e w_e |h(e)|**p)**(1/p)``."""
    p = float(p)
    if not p >= 1.0:
        raise ValidationError(f"order p must be >= 1, got {p}")
    h = edge_masses(index, mu, nu)
    a = np.abs(h.values)
    w = index.graph.weights[h.edge_ids]
    # same zero filtering as gst_from_edge_masses, so both paths sum identical terms
    keep = a > ZERO_MASS_THRESHOLD
    a, w = a[keep], w[keep]
    if p == 1.0:
        return float(np.sum(w * a))
    return float(np.sum(w * a ** p)) ** (1.0 / p)


def gst_batch(index: PathIndex, pairs, phi: NFunction, tol: float = 1e-10,
              workers: int = 1) -> list:
    """Evaluate :func:`gst` over ``pairs`` in order.

    A pair that fails leaves its exception object in its slot instead of
    aborting the batch. Results do not depend on ``workers``.
    """
    _check_tol(tol)
    pairs = list(pairs)

    def one(pair) -> Union[GstResult, GraphGstError]:
        try:
            return gst(index, pair[0], pair[1], phi, tol)
        except GraphGstError as exc:
            return exc

    if workers <= 1 or len(pairs) <= 1:
        return [one(pr) for pr in pairs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, pairs))
