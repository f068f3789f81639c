"""Erlang distribution functions and exact partial moments of Erlang survival.

Shapes here are small integers (at most ``battery + 1``), so everything is
built from truncated Poisson sums

    Q_n(y) = sum_{i=0}^{n-1} exp(-y) y^i / i!

which is the survival function of an Erlang(n) variable at ``y = rate * x``.
A shape ``<= 0`` denotes the degenerate variable that is identically zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ErlangSpec",
    "poisson_head",
    "erlang_cdf",
    "erlang_survival",
    "erlang_cdf_table",
    "survival_partial_moment",
    "PoissonTables",
]


@dataclass(frozen=True)
class ErlangSpec:
    """Erlang(shape, rate); ``shape <= 0`` is the point mass at zero."""

    shape: int
    rate: float

    def __post_init__(self):
        if not (math.isfinite(self.rate) and self.rate > 0):
            raise ValueError(f"Erlang rate must be positive and finite, got {self.rate!r}")
        if int(self.shape) != self.shape:
            raise ValueError(f"Erlang shape must be an integer, got {self.shape!r}")
        object.__setattr__(self, "shape", int(self.shape))


def _check_x(x: float) -> float:
    x = float(x)
    if not math.isfinite(x) or x < 0:
        raise ValueError(f"x must be finite and nonnegative, got {x!r}")
    return x


def poisson_head(n: int, y: float) -> float:
    """Return Q_n(y) = P(Poisson(y) < n), accumulated by term recurrence."""
    if n <= 0:
        return 0.0
    if math.isinf(y):
        return 0.0
    term = math.exp(-y)
    total = term
    for k in range(1, n):
        term *= y / k
        total += term
    return min(total, 1.0)


def _poisson_tail(n: int, y: float) -> float:
    """P(Poisson(y) >= n) by forward series; accurate when y < n."""
    term = math.exp(-y)
    for k in range(1, n + 1):
        term *= y / k
    total = term
    k = n
    while term > 1e-17 * total:
        k += 1
        term *= y / k
        total += term
    return total


def erlang_cdf(spec: ErlangSpec, x: float) -> float:
    """P(Y <= x) for ``Y ~ Erlang(spec.shape, spec.rate)``.

    Uses the upper Poisson tail when ``rate * x < shape`` so that small
    probabilities keep their relative accuracy; otherwise ``1 - Q_n``.
    """
    x = _check_x(x)
    n = spec.shape
    if n <= 0:
        return 1.0
    y = spec.rate * x
    if y < n:
        p = _poisson_tail(n, y)
    else:
        p = 1.0 - poisson_head(n, y)
    return min(max(p, 0.0), 1.0)


def erlang_survival(spec: ErlangSpec, x: float) -> float:
    """P(Y > x); zero for the degenerate shapes."""
    x = _check_x(x)
    return poisson_head(spec.shape, spec.rate * x)


def _pmf_terms(y: np.ndarray, n: int) -> np.ndarray:
    """Poisson pmf ``exp(-y) y^k / k!`` for k < n via the running product.

    Each partial product is itself a pmf value, so it never overflows.
    """
    factors = np.empty(y.shape + (n,))
    if n:
        factors[..., 0] = np.exp(-y)
        factors[..., 1:] = y[..., None] / np.arange(1, n)
    return np.cumprod(factors, axis=-1)


@dataclass(frozen=True)
class PoissonTables:
    """Erlang quantities at scaled points ``y = rate * x``, for shapes 0..n_max.

    ``cdf[..., n]``
        ``P(Y_n <= x)``; upper Poisson tail where ``y < n``, else ``1 - Q_n(y)``.
    ``first[..., k]``, ``second[..., k]``
        ``sum_{i<k} Q_{i+1}(y)`` and ``sum_{i<k} (i+1) Q_{i+2}(y)``: for shape
        ``k``, ``int_a^b S = (first(ya) - first(yb)) / rate`` and
        ``int_a^b x S = (second(ya) - second(yb)) / rate**2``.

    Infinite ``y`` gives ``cdf = 1`` and zero antiderivative tails.
    """

    cdf: np.ndarray
    first: np.ndarray
    second: np.ndarray

    @classmethod
    def build(cls, y, n_max: int) -> "PoissonTables":
        y = np.asarray(y, dtype=float)
        finite = np.isfinite(y)
        ys = np.where(finite, y, 0.0)
        # pmf far enough past n_max that the truncated upper tail is below 1e-17 relative
        n_terms = n_max + 21 + int(math.ceil(8 * math.sqrt(n_max + 1)))
        terms = _pmf_terms(ys, n_terms)
        head = np.zeros(y.shape + (n_max + 2,))
        head[..., 1:] = np.minimum(np.cumsum(terms[..., : n_max + 1], axis=-1), 1.0)
        tail = np.cumsum(terms[..., ::-1], axis=-1)[..., ::-1][..., : n_max + 1]
        shapes = np.arange(n_max + 1)
        cdf = np.clip(np.where(ys[..., None] < shapes, tail, 1.0 - head[..., : n_max + 1]), 0.0, 1.0)
        cdf[..., 0] = 1.0
        head[~finite] = 0.0
        cdf[~finite] = 1.0
        first = np.zeros(y.shape + (n_max + 1,))
        second = np.zeros(y.shape + (n_max + 1,))
        first[..., 1:] = np.cumsum(head[..., 1 : n_max + 1], axis=-1)
        second[..., 1:] = np.cumsum(shapes[1:] * head[..., 2 : n_max + 2], axis=-1)
        return cls(cdf, first, second)


def erlang_cdf_table(rate: float, x, n_max: int) -> np.ndarray:
    """``P(Y_n <= x)`` for n = 0..n_max along the last axis; vectorised :func:`erlang_cdf`."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise ValueError("x must be finite and nonnegative")
    return PoissonTables.build(rate * x, n_max).cdf


def survival_partial_moment(spec, p, a, b):
    """Exact ``int_a^b x**p * P(Y > x) dx`` for ``p`` in {0, 1}.

    ``spec`` may be an :class:`ErlangSpec` or a ``(shapes, rate)`` pair where
    ``shapes`` is an integer array; ``a`` and ``b`` broadcast against the
    shapes and ``b`` may be ``inf``. Scalars in, float out; arrays in, array out.

    Raises
    ------
    ValueError
        If ``p`` is not 0 or 1, any bound is negative or NaN, ``a`` is
        infinite, or ``a > b``.
    """
    if isinstance(spec, ErlangSpec):
        shapes, rate = spec.shape, spec.rate
    else:
        shapes, rate = spec
        ErlangSpec(1, rate)
    if p not in (0, 1):
        raise ValueError(f"moment order p must be 0 or 1, got {p!r}")
    scalar = np.ndim(shapes) == 0 and np.ndim(a) == 0 and np.ndim(b) == 0
    shapes, a, b = np.broadcast_arrays(
        np.asarray(shapes, dtype=np.int64), np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    )
    if np.any(np.isnan(a)) or np.any(np.isnan(b)) or np.any(a < 0) or np.any(~np.isfinite(a)):
        raise ValueError("lower bound must be finite and nonnegative")
    if np.any(a > b):
        raise ValueError("lower bound exceeds upper bound")

    k = np.maximum(shapes, 0)[..., None]
    k_max = int(k.max()) if k.size else 0
    lo = PoissonTables.build(rate * a, k_max)
    hi = PoissonTables.build(rate * b, k_max)
    if p == 0:
        diff = np.take_along_axis(lo.first, k, axis=-1) - np.take_along_axis(hi.first, k, axis=-1)
        out = diff[..., 0] / rate
    else:
        diff = np.take_along_axis(lo.second, k, axis=-1) - np.take_along_axis(hi.second, k, axis=-1)
        out = diff[..., 0] / rate**2
    out = np.maximum(out, 0.0)
    return float(out) if scalar else out
