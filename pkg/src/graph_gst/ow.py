"""Reference Orlicz-Wasserstein solver and tree/OT cross-checks.

``W_Phi(mu, nu) = inf{t > 0 : min_pi sum_ij pi_ij Phi(d_ij / t) <= 1}``.

The inner value ``v(t) = min_pi sum pi Phi(d/t)`` is nonincreasing in ``t``,
so the outer problem is solved by bisection on ``t``; each probe solves an
exact transportation LP. This is deliberately the slow, definitional route.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import ConvergenceError, GraphGstError, ValidationError
from .graph import DistanceCache, Graph, PathIndex, _UnionFind, _first_unreachable
from .nfunctions import NFunction
from .transport import Measure, edge_masses

__all__ = [
    "CouplingProblem",
    "OwResult",
    "exact_ot",
    "orlicz_wasserstein",
    "ow_batch",
    "tree_wasserstein",
    "random_spanning_tree",
    "MAX_SUPPORT",
]

#: largest support size accepted by the exact inner solver
MAX_SUPPORT = 2000
# inner costs above this are clipped before the LP; plans touching them count as infeasible
_COST_CAP = 1e12


@dataclass(frozen=True, eq=False)
class CouplingProblem:
    a: np.ndarray
    b: np.ndarray
    cost: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).reshape(-1)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        cost = np.asarray(self.cost, dtype=float)
        if cost.shape != (a.size, b.size):
            raise ValidationError(f"cost shape {cost.shape} != ({a.size}, {b.size})")
        if np.any(a < 0) or np.any(b < 0):
            raise ValidationError("marginals must be nonnegative")
        sa, sb = math.fsum(a.tolist()), math.fsum(b.tolist())
        if abs(sa - 1.0) > 1e-12 or abs(sb - 1.0) > 1e-12:
            raise ValidationError(f"unbalanced marginals: sums {sa!r} and {sb!r}")
        if not np.all(np.isfinite(cost)):
            raise ValidationError("cost must be finite")
        if np.any(cost < 0):
            raise ValidationError("cost must be nonnegative")
        if a.size > MAX_SUPPORT or b.size > MAX_SUPPORT:
            raise ValidationError(
                f"support sizes {a.size}x{b.size} exceed the exact solver limit {MAX_SUPPORT}"
            )
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "cost", cost)


@dataclass(frozen=True)
class OwResult:
    value: float
    inner_value_at_t: float
    bisection_iters: int


@lru_cache(maxsize=64)
def _marginal_constraints(n: int, m: int):
    # rows: n source sums, then m - 1 target sums (the last one is implied)
    cols = np.arange(n * m)
    src = sparse.csr_matrix((np.ones(n * m), (np.repeat(np.arange(n), m), cols)), shape=(n, n * m))
    tgt = sparse.csr_matrix((np.ones(n * m), (np.tile(np.arange(m), n), cols)), shape=(m, n * m))
    return sparse.vstack([src, tgt[: m - 1]]).tocsc()


_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


def _solve_lp(a, b, cost):
    n, m = a.size, b.size
    if n == 1 or m == 1:
        plan = np.outer(a, b)
        return float(np.sum(plan * cost)), plan
    res = linprog(
        cost.ravel(),
        A_eq=_marginal_constraints(n, m),
        b_eq=np.concatenate([a, b[: m - 1]]),
        bounds=(0, None),
        method="highs-ds",
        options=_HIGHS_OPTIONS,
    )
    if res.status != 0:
        raise ConvergenceError(f"transport LP failed: {res.message}")
    plan = res.x.reshape(n, m)
    return float(np.sum(plan * cost)), plan


def exact_ot(problem: CouplingProblem):
    """Optimal transport value and plan by the dual simplex method.

    Rows and columns with zero mass are dropped before solving and restored
    as zeros in the returned plan.
    """
    a, b, cost = problem.a, problem.b, problem.cost
    rows, cols = np.flatnonzero(a > 0), np.flatnonzero(b > 0)
    value, sub = _solve_lp(a[rows], b[cols], cost[np.ix_(rows, cols)])
    plan = np.zeros(cost.shape)
    plan[np.ix_(rows, cols)] = sub
    return value, plan


def _inner(phi: NFunction, a, b, dist, t):
    """``v(t)`` with costs clipped at ``_COST_CAP``; ``inf`` if the plan needs clipped cells."""
    with np.errstate(over="ignore", invalid="ignore"):
        c = phi.values(dist / t)
    clipped = ~(c <= _COST_CAP)
    c = np.where(clipped, _COST_CAP, c)
    value, plan = _solve_lp(a, b, c)
    if np.any(plan[clipped] > 1e-15):
        return math.inf
    return value


def _order_key(m: Measure):
    return (m.support.tolist(), m.mass.tolist())


def orlicz_wasserstein(dist: DistanceCache, mu: Measure, nu: Measure, phi: NFunction,
                       tol: float = 1e-6, max_iter: int = 200) -> OwResult:
    """Orlicz-Wasserstein distance by bisection over the scale ``t``.

    Stops when the relative bracket width is ``<= tol`` and the inner value
    at the upper (feasible) endpoint lies in ``[1 - 1e-6, 1 + 1e-8]``;
    returns that endpoint. ``phi = linear`` short-cuts to the order-1
    Wasserstein distance.
    """
    if not 0 < tol <= 1e-3:
        raise ValidationError(f"tol must lie in (0, 1e-3], got {tol}")
    # solve (mu, nu) and (nu, mu) as the same problem so the result is exactly symmetric
    if _order_key(nu) < _order_key(mu):
        mu, nu = nu, mu
    mu_keep = mu.mass > 0
    nu_keep = nu.mass > 0
    a, b = mu.mass[mu_keep], nu.mass[nu_keep]
    d = dist.submatrix(mu.support[mu_keep], nu.support[nu_keep])
    if a.size > MAX_SUPPORT or b.size > MAX_SUPPORT:
        raise ValidationError(f"support exceeds exact solver limit {MAX_SUPPORT}")

    if np.any(d == 0):
        zero_cost = (d > 0).astype(float)
        z, _ = _solve_lp(a, b, zero_cost)
        if z <= 1e-14:
            return OwResult(0.0, 0.0, 0)
    if phi.kind == "linear":
        w1, _ = _solve_lp(a, b, d)
        return OwResult(w1, 1.0, 0)

    unit = phi.inverse(1.0)
    if not (unit > 0 and math.isfinite(unit)):
        raise ConvergenceError(f"{phi.spec}: Phi^-1(1) = {unit!r} is degenerate")
    hi = float(d.max()) / unit
    v_hi = _inner(phi, a, b, d, hi)
    if v_hi > 1.0 + 1e-8:
        raise ConvergenceError(f"upper bracket t={hi:g} infeasible (v={v_hi:g})")

    dpos = d[d > 0]
    lo = float(dpos.min()) / phi.inverse(1.0 / (a.min() * b.min()))
    lo = max(lo, 1e-12)
    v_lo = _inner(phi, a, b, d, lo)
    while v_lo <= 1.0:
        hi, v_hi = lo, v_lo
        lo *= 0.5
        if lo < 1e-12:
            return OwResult(hi, v_hi, 0)
        v_lo = _inner(phi, a, b, d, lo)

    iters = 0
    while not (hi - lo <= tol * hi and v_hi >= 1.0 - 1e-6):
        if iters >= max_iter:
            raise ConvergenceError(
                f"OW bisection did not converge in {max_iter} steps", bracket=(lo, hi),
                iterations=iters,
            )
        mid = math.sqrt(lo * hi)
        if not lo < mid < hi:
            break
        iters += 1
        v = _inner(phi, a, b, d, mid)
        slack = 1e-9 * (1.0 + abs(v_hi))
        if v < v_hi - slack or (math.isfinite(v_lo) and v > v_lo + 1e-9 * (1.0 + v_lo)):
            raise ConvergenceError(
                f"inner OT value not monotone in t at t={mid:g}", bracket=(lo, hi),
                iterations=iters,
            )
        if v <= 1.0:
            hi, v_hi = mid, v
        else:
            lo, v_lo = mid, v
    return OwResult(hi, v_hi, iters)


def ow_batch(dist: DistanceCache, pairs, phi: NFunction, tol: float = 1e-6,
             workers: int = 1) -> list:
    """:func:`orlicz_wasserstein` over ``pairs``; failures stay in their slot."""
    pairs = list(pairs)

    def one(pair):
        try:
            return orlicz_wasserstein(dist, pair[0], pair[1], phi, tol)
        except GraphGstError as exc:
            return exc

    if workers <= 1 or len(pairs) <= 1:
        return [one(pr) for pr in pairs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, pairs))


def tree_wasserstein(tree_index: PathIndex, mu: Measure, nu: Measure) -> float:
    """Closed-form order-1 Wasserstein distance on a tree, ``sum_e w_e |h(e)|``."""
    if not tree_index.graph.is_tree():
        raise ValidationError("tree_wasserstein needs a tree (|E| = |V| - 1, connected)")
    h = edge_masses(tree_index, mu, nu)
    return float(np.sum(tree_index.graph.weights[h.edge_ids] * np.abs(h.values)))


def random_spanning_tree(graph: Graph, seed=None) -> Graph:
    """Minimum spanning tree under i.i.d. uniform random edge priorities.

    Kept edges retain their lengths and relative order; the root is unchanged.
    """
    missing = _first_unreachable(graph)
    if missing is not None:
        raise ValidationError(f"graph is disconnected: node {missing} unreachable")
    rng = np.random.default_rng(seed)
    priority = rng.random(graph.n_edges)
    uf = _UnionFind(graph.n_nodes)
    keep = np.zeros(graph.n_edges, dtype=bool)
    for eid in np.argsort(priority, kind="stable"):
        u, v = graph.edges[eid]
        if uf.union(int(u), int(v)):
            keep[eid] = True
    meta = dict(graph.meta, spanning_tree_seed=seed)
    return replace(graph, edges=graph.edges[keep], weights=graph.weights[keep], meta=meta)
