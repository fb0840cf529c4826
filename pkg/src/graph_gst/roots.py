"""Safeguarded Newton iteration for nondecreasing scalar functions."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConvergenceError


@dataclass
class RootResult:
    x: float
    iterations: int
    bisections: int
    bracket: tuple


def expand_upper(fun, start=1.0, cap=1e9):
    """Double ``x`` from ``start`` until ``fun(x) > 0``.

    Returns ``(lo, hi)`` with ``fun(lo) <= 0 < fun(hi)``; ``lo`` is 0 when the
    first probe is already positive. ``fun`` returns a value or an
    ``(value, derivative)`` pair.
    """
    lo, x = 0.0, float(start)
    while True:
        f = fun(x)
        if isinstance(f, tuple):
            f = f[0]
        if f > 0:
            return lo, x
        lo = x
        x *= 2.0
        if x > cap:
            raise ConvergenceError(
                f"no sign change below {cap:g}", bracket=(lo, x)
            )


def newton_bisect(fun, lo, hi, *, ftol=0.0, rtol=1e-12, x0=None, maxiter=200):
    """Root of a nondecreasing ``fun`` on ``[lo, hi]``.

    ``fun(x)`` returns ``(f, df)``; ``f`` may be ``+inf`` where the function
    overflows. Requires ``f(lo) <= 0 < f(hi)``. Newton steps that leave the
    bracket fall back to bisection.

    Convergence needs ``|f(x)| <= ftol`` (skipped when ``ftol`` is 0 and the
    Newton step has stalled) together with a bracket of width
    ``<= rtol * x``; the bracket is tightened around a candidate by probing
    ``x +- rtol * x / 2``.
    """
    x = 0.5 * (lo + hi) if x0 is None else float(x0)
    if not lo < x < hi:
        x = 0.5 * (lo + hi)
    bisections = 0
    f_lo, f_hi = -math.inf, math.inf
    for it in range(1, maxiter + 1):
        f, df = fun(x)
        if f != f:
            raise ConvergenceError("objective returned NaN", bracket=(lo, hi), iterations=it)
        if not f_lo - 1e-12 * (1 + abs(f_lo)) <= f <= f_hi + 1e-12 * (1 + abs(f_hi)):
            raise ConvergenceError(
                "objective is not monotone on the bracket", bracket=(lo, hi), iterations=it
            )
        if f <= 0:
            lo, f_lo = x, f
        else:
            hi, f_hi = x, f
        step = None
        if math.isfinite(f) and df > 0 and math.isfinite(df):
            step = x - f / df
        small = abs(f) <= ftol or (
            step is not None and abs(step - x) <= 0.5 * rtol * abs(x)
        )
        if small or hi - lo <= rtol * abs(x):
            if hi - lo > rtol * abs(x):
                delta = 0.5 * rtol * abs(x)
                for probe in (x - delta, x + delta):
                    if not lo < probe < hi:
                        continue
                    fp, _ = fun(probe)
                    if fp <= 0:
                        lo, f_lo = probe, fp
                    else:
                        hi, f_hi = probe, fp
            if hi - lo <= rtol * abs(x) and (abs(f) <= ftol or ftol == 0.0):
                return RootResult(x, it, bisections, (lo, hi))
            if hi - lo <= 4 * math.ulp(max(abs(lo), abs(hi))):
                # bracket at float resolution: nothing left to refine
                return RootResult(x, it, bisections, (lo, hi))
        if step is not None and lo < step < hi and hi - lo > rtol * abs(x):
            x = step
        else:
            x = 0.5 * (lo + hi)
            bisections += 1
    raise ConvergenceError(
        f"no convergence after {maxiter} iterations", bracket=(lo, hi), iterations=maxiter
    )
