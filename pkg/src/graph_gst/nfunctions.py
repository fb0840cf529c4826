"""N-functions, their derivatives, inverses and complementary functions.

An N-function is a strictly increasing convex ``Phi: [0, inf) -> [0, inf)``
with ``Phi(t)/t -> 0`` as ``t -> 0`` and ``Phi(t)/t -> inf`` as ``t -> inf``.
Two extra kinds are carried for convenience although they grow only
linearly: ``linear`` (``Phi(t) = t``) and the normalized Huber function.
Both are flagged through :attr:`NFunction.is_n_function`.

Spec strings (CLI / config)::

    power:p=2  power_scaled:p=2  power_div:p=2  power_sum:p=2,q=3
    exp_minus  exp_power:p=2  log_entropy  huber:delta=1  linear
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import NFunctionRangeError, ValidationError
from .roots import expand_upper, newton_bisect

__all__ = [
    "NFunction",
    "NumericComplement",
    "ComplementaryPair",
    "power",
    "power_scaled",
    "power_div",
    "power_sum",
    "exp_minus",
    "exp_power",
    "log_entropy",
    "huber",
    "linear",
    "parse_nfunction",
    "complementary",
    "luxemburg_norm_discrete",
    "EXP_ARG_MAX",
]

KINDS = (
    "power",
    "power_scaled",
    "power_div",
    "power_sum",
    "exp_minus",
    "exp_power",
    "log_entropy",
    "huber",
    "linear",
)
_NEEDS_P = {"power", "power_scaled", "power_div", "power_sum", "exp_power"}
_POWER_KINDS = {"power", "power_scaled", "power_div"}

#: largest exponent accepted by the exponential kinds before a range error
EXP_ARG_MAX = 700.0


def _conjugate(p: float) -> float:
    return p / (p - 1.0)


@dataclass(frozen=True)
class NFunction:
    """Descriptor of a convex growth function ``Phi``.

    Instances are callable and accept scalars or arrays. ``p`` is used by the
    power and ``exp_power`` kinds, ``q`` by ``power_sum`` (``t**p + t**q``)
    and ``delta`` by ``huber``.
    """

    kind: str
    p: Union[float, None] = None
    delta: Union[float, None] = None
    q: Union[float, None] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown N-function kind {self.kind!r}")
        if self.kind in _NEEDS_P:
            if self.p is None or not (1.0 < float(self.p) < math.inf):
                raise ValidationError(f"{self.kind} needs 1 < p < inf, got p={self.p}")
            object.__setattr__(self, "p", float(self.p))
        elif self.p is not None:
            raise ValidationError(f"{self.kind} takes no parameter p")
        if self.kind == "power_sum":
            if self.q is None or not (1.0 < float(self.q) < math.inf):
                raise ValidationError(f"power_sum needs 1 < q < inf, got q={self.q}")
            object.__setattr__(self, "q", float(self.q))
        elif self.q is not None:
            raise ValidationError(f"{self.kind} takes no parameter q")
        if self.kind == "huber":
            delta = 1.0 if self.delta is None else float(self.delta)
            if not delta > 0:
                raise ValidationError(f"huber needs delta > 0, got {self.delta}")
            object.__setattr__(self, "delta", delta)
        elif self.delta is not None:
            raise ValidationError(f"{self.kind} takes no parameter delta")

    # -- descriptive ---------------------------------------------------------

    @property
    def is_n_function(self) -> bool:
        return self.kind not in ("linear", "huber")

    @property
    def spec(self) -> str:
        if self.kind == "power_sum":
            return f"power_sum:p={self.p:g},q={self.q:g}"
        if self.kind in _NEEDS_P:
            return f"{self.kind}:p={self.p:g}"
        if self.kind == "huber":
            return f"huber:delta={self.delta:g}"
        return self.kind

    def __str__(self):
        return self.spec

    @property
    def coef(self) -> float:
        """Leading coefficient ``c`` of the power kinds ``c * t**p``."""
        p = self.p
        if self.kind == "power":
            return 1.0
        if self.kind == "power_scaled":
            return (p - 1.0) ** (p - 1.0) / p ** p
        if self.kind == "power_div":
            return 1.0 / p
        raise AttributeError(f"{self.kind} has no power coefficient")

    @property
    def _huber_consts(self):
        # a = f_H^{-1}(1); slope = left derivative of the normalized function at 1
        d = self.delta
        a = math.sqrt(2.0) if d >= math.sqrt(2.0) else 1.0 / d + d / 2.0
        slope = a * min(a, d)
        return a, slope

    @property
    def linear_slope(self):
        """Asymptotic slope for linearly growing kinds, else ``None``."""
        if self.kind == "linear":
            return 1.0
        if self.kind == "huber":
            return self._huber_consts[1]
        return None

    @property
    def max_argument(self) -> float:
        """Largest ``t`` accepted before :class:`NFunctionRangeError`."""
        if self.kind == "exp_minus":
            return EXP_ARG_MAX
        if self.kind == "exp_power":
            return EXP_ARG_MAX ** (1.0 / self.p)
        return math.inf

    # -- evaluation ----------------------------------------------------------

    def _check(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(np.isnan(t)):
            raise ValidationError(f"{self.spec} is defined on t >= 0 only")
        if t.size and np.max(t) > self.max_argument:
            raise NFunctionRangeError(
                f"{self.spec}: argument {np.max(t):g} exceeds {self.max_argument:g}"
            )
        return t

    def values(self, t):
        """Unchecked vectorized ``Phi(t)``; overflow yields ``inf``."""
        t = np.asarray(t, dtype=float)
        kind = self.kind
        with np.errstate(over="ignore", invalid="ignore"):
            if kind in _POWER_KINDS:
                return self.coef * t ** self.p
            if kind == "power_sum":
                return t ** self.p + t ** self.q
            if kind == "exp_minus":
                return np.expm1(t) - t
            if kind == "exp_power":
                return np.expm1(t ** self.p)
            if kind == "log_entropy":
                return (1.0 + t) * np.log1p(t) - t
            if kind == "linear":
                return t.copy()
            a, slope = self._huber_consts
            d = self.delta
            u = a * t
            inner = np.where(u <= d, 0.5 * u * u, d * (u - 0.5 * d))
            return np.where(t <= 1.0, inner, slope * t - (slope - 1.0))

    def derivative_values(self, t):
        """Unchecked vectorized ``(Phi'(t), Phi''(t))``.

        At kinks the left derivative is reported. Power kinds with ``p < 2``
        return ``inf`` for ``Phi''(0)``.
        """
        t = np.asarray(t, dtype=float)
        kind = self.kind
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            if kind in _POWER_KINDS:
                c, p = self.coef, self.p
                d1 = c * p * t ** (p - 1.0)
                if p == 2.0:
                    d2 = np.full_like(t, 2.0 * c)
                else:
                    d2 = c * p * (p - 1.0) * t ** (p - 2.0)
                return d1, d2
            if kind == "power_sum":
                p, q = self.p, self.q
                d1 = p * t ** (p - 1.0) + q * t ** (q - 1.0)
                d2 = p * (p - 1.0) * t ** (p - 2.0) + q * (q - 1.0) * t ** (q - 2.0)
                return d1, d2
            if kind == "exp_minus":
                return np.expm1(t), np.exp(t)
            if kind == "exp_power":
                p = self.p
                tp = t ** p
                e = np.exp(tp)
                d1 = p * t ** (p - 1.0) * e
                d2 = e * (p * (p - 1.0) * t ** (p - 2.0) + p * p * t ** (2.0 * p - 2.0))
                return d1, d2
            if kind == "log_entropy":
                return np.log1p(t), 1.0 / (1.0 + t)
            if kind == "linear":
                return np.ones_like(t), np.zeros_like(t)
            a, slope = self._huber_consts
            d = self.delta
            u = a * t
            quad = u <= d
            d1_in = np.where(quad, a * u, a * d)
            d2_in = np.where(quad, a * a, 0.0)
            tail = t > 1.0
            return np.where(tail, slope, d1_in), np.where(tail, 0.0, d2_in)

    def legendre_values(self, t):
        """Unchecked ``t Phi'(t) - Phi(t)`` (equal to ``Psi(Phi'(t))``).

        Closed forms avoid the cancellation of the two large terms, which
        matters on the linear pieces at very large ``t``.
        """
        t = np.asarray(t, dtype=float)
        kind = self.kind
        with np.errstate(over="ignore", invalid="ignore"):
            if kind in _POWER_KINDS:
                return self.coef * (self.p - 1.0) * t ** self.p
            if kind == "power_sum":
                return (self.p - 1.0) * t ** self.p + (self.q - 1.0) * t ** self.q
            if kind == "linear":
                return np.zeros_like(t)
            if kind == "huber":
                a, slope = self._huber_consts
                d = self.delta
                u = a * t
                inner = np.where(u <= d, 0.5 * u * u, 0.5 * d * d)
                return np.where(t <= 1.0, inner, slope - 1.0)
            d1, _ = self.derivative_values(t)
            return t * d1 - self.values(t)

    def __call__(self, t):
        t = self._check(t)
        out = self.values(t)
        return float(out) if out.ndim == 0 else out

    def eval(self, t):
        return self(t)

    def derivatives(self, t):
        """``(Phi'(t), Phi''(t))`` with input validation."""
        t = self._check(t)
        d1, d2 = self.derivative_values(t)
        if d1.ndim == 0:
            return float(d1), float(d2)
        return d1, d2

    def inverse(self, y):
        """Unique ``t >= 0`` with ``Phi(t) = y``."""
        y = float(y)
        if y < 0 or y != y:
            raise ValidationError(f"inverse needs y >= 0, got {y}")
        if y == 0.0:
            return 0.0
        kind = self.kind
        if kind in _POWER_KINDS:
            return (y / self.coef) ** (1.0 / self.p)
        if kind == "exp_power":
            return math.log1p(y) ** (1.0 / self.p)
        if kind == "linear":
            return y
        if kind == "huber":
            a, slope = self._huber_consts
            if y > 1.0:
                return (y + slope - 1.0) / slope
            d = self.delta
            u = math.sqrt(2.0 * y) if y <= 0.5 * d * d else y / d + 0.5 * d
            return u / a

        def g(t):
            d1, _ = self.derivative_values(t)
            return float(self.values(t)) - y, float(d1)

        lo, hi = expand_upper(g, start=1.0, cap=1e300)
        return newton_bisect(g, lo, hi, rtol=1e-12, ftol=0.0).x


def power(p: float) -> NFunction:
    return NFunction("power", p=p)


def power_scaled(p: float) -> NFunction:
    """``(p-1)**(p-1) / p**p * t**p``, whose GST is the order-``p`` Sobolev transport."""
    return NFunction("power_scaled", p=p)


def power_div(p: float) -> NFunction:
    return NFunction("power_div", p=p)


def power_sum(p: float, q: float) -> NFunction:
    return NFunction("power_sum", p=p, q=q)


def exp_minus() -> NFunction:
    return NFunction("exp_minus")


def exp_power(p: float) -> NFunction:
    return NFunction("exp_power", p=p)


def log_entropy() -> NFunction:
    return NFunction("log_entropy")


def huber(delta: float = 1.0) -> NFunction:
    return NFunction("huber", delta=delta)


def linear() -> NFunction:
    return NFunction("linear")


def parse_nfunction(spec: str) -> NFunction:
    """Parse ``"kind[:key=value,...]"`` into an :class:`NFunction`.

    >>> parse_nfunction("exp_power:p=2").p
    2.0
    """
    aliases = {"huber_normalized": "huber", "linear_limit": "linear", "phi0": "linear"}
    head, _, rest = spec.strip().partition(":")
    kind = aliases.get(head.strip(), head.strip())
    params = {}
    if rest:
        for item in rest.split(","):
            key, eq, val = item.partition("=")
            if not eq:
                raise ValidationError(f"bad N-function parameter {item!r} in {spec!r}")
            try:
                params[key.strip()] = float(val)
            except ValueError:
                raise ValidationError(f"non-numeric parameter {item!r} in {spec!r}") from None
    unknown = set(params) - {"p", "q", "delta"}
    if unknown:
        raise ValidationError(f"unknown parameter(s) {sorted(unknown)} in {spec!r}")
    return NFunction(kind, **params)


class NumericComplement:
    """Complement evaluated by a 1-D concave maximization.

    ``Psi(t) = a* t - Phi(a*)`` where ``a*`` solves ``Phi'(a) = t``. For
    ``exp(t**p) - 1`` that is the root of ``t - p a**(p-1) exp(a**p)``,
    which is strictly decreasing in ``a``, so the root is unique and a
    monotone safeguarded search applies.
    """

    def __init__(self, phi: NFunction):
        if not phi.is_n_function:
            raise ValidationError(f"{phi.spec} has no finite complement")
        self.phi = phi

    @property
    def spec(self):
        return f"complement({self.phi.spec})"

    def maximizer(self, t: float) -> float:
        t = float(t)
        if t < 0:
            raise ValidationError("complement is evaluated on t >= 0 only")
        if t == 0.0:
            return 0.0
        phi = self.phi

        def g(a):
            d1, d2 = phi.derivative_values(a)
            return float(d1) - t, float(d2)

        lo, hi = expand_upper(g, start=1.0, cap=min(phi.max_argument, 1e300))
        return newton_bisect(g, lo, hi, rtol=1e-12, ftol=0.0).x

    def __call__(self, t):
        arr = np.asarray(t, dtype=float)
        out = np.empty_like(arr)
        flat_in, flat_out = arr.reshape(-1), out.reshape(-1)
        for i, ti in enumerate(flat_in):
            a = self.maximizer(ti)
            flat_out[i] = a * ti - float(self.phi.values(a))
        return float(out) if out.ndim == 0 else out

    def derivatives(self, t):
        a = self.maximizer(t)
        _, d2 = self.phi.derivative_values(a)
        return a, (1.0 / float(d2) if d2 > 0 else math.inf)


@dataclass(frozen=True)
class ComplementaryPair:
    phi: NFunction
    psi: Union[NFunction, NumericComplement]


def complementary(phi: NFunction) -> ComplementaryPair:
    """Complementary function ``Psi(t) = sup_{a >= 0} (a t - Phi(a))``.

    Closed forms: ``t**p/p <-> t**q/q``; ``t**q <-> power_scaled(p)``;
    ``exp(t) - t - 1 <-> (1+t) log(1+t) - t``. ``exp(t**p) - 1`` gets a
    :class:`NumericComplement`.
    """
    kind = phi.kind
    if kind == "power":
        psi = power_scaled(_conjugate(phi.p))
    elif kind == "power_scaled":
        psi = power(_conjugate(phi.p))
    elif kind == "power_div":
        psi = power_div(_conjugate(phi.p))
    elif kind == "exp_minus":
        psi = log_entropy()
    elif kind == "log_entropy":
        psi = exp_minus()
    elif kind in ("exp_power", "power_sum"):
        psi = NumericComplement(phi)
    else:
        raise ValidationError(
            f"{phi.spec} grows linearly, so its complement is infinite past a "
            "finite slope; use the closed-form order-1 Sobolev transport path instead"
        )
    return ComplementaryPair(phi=phi, psi=psi)


def luxemburg_norm_discrete(values, weights, phi: NFunction, rtol: float = 1e-12) -> float:
    """``inf{t > 0 : sum_i w_i Phi(|v_i| / t) <= 1}`` by bisection on ``log t``."""
    v = np.abs(np.asarray(values, dtype=float)).reshape(-1)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if v.shape != w.shape:
        raise ValidationError("values and weights differ in length")
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(w))):
        raise ValidationError("values and weights must be finite")
    if np.any(w <= 0):
        raise ValidationError("weights must be positive")
    keep = v > 0
    v, w = v[keep], w[keep]
    if v.size == 0:
        return 0.0

    def excess(t):
        with np.errstate(over="ignore"):
            return float(np.sum(w * phi.values(v / t))) - 1.0

    hi = float(v.max())
    while excess(hi) > 0:
        hi *= 2.0
    lo = hi
    while excess(lo) <= 0:
        lo *= 0.5
        if lo < 1e-300:
            return 0.0
    # excess(lo) > 0 >= excess(hi)
    while hi - lo > rtol * hi:
        mid = math.sqrt(lo * hi)
        if mid <= lo or mid >= hi:
            break
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    return hi
