"""Generalized factorials, binomials and Stirling numbers.

Linear-domain helpers return floats; the ``log_*`` variants return the
natural log of the magnitude, with the sign reported separately where the
value can be negative or zero.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import betaln

from .errors import DomainError

STIRLING_MAX_N = 64

# direct products are exact enough below this many factors
_DIRECT_PRODUCT_MAX = 64


def rising_factorial(base: float, steps: int, increment: float = 1.0) -> float:
    """base * (base + inc) * ... * (base + (steps - 1) * inc); 1 when steps == 0."""
    if steps < 0:
        raise DomainError(f"steps must be >= 0, got {steps}")
    out = 1.0
    for i in range(steps):
        out *= base + i * increment
    return out


def log_rising_factorial(base: float, steps: int, increment: float = 1.0) -> tuple[int, float]:
    """Return ``(sign, log|value|)`` of the generalized rising factorial.

    An exact zero factor gives ``(0, -inf)``.
    """
    if steps < 0:
        raise DomainError(f"steps must be >= 0, got {steps}")
    if steps == 0:
        return 1, 0.0
    if increment > 0 and base > 0 and steps > _DIRECT_PRODUCT_MAX:
        # (a)_{j|b} = b^j Gamma(a/b + j) / Gamma(a/b)
        c = base / increment
        return 1, steps * math.log(increment) + math.lgamma(c + steps) - math.lgamma(c)
    sign = 1
    acc = 0.0
    for i in range(steps):
        f = base + i * increment
        if f == 0.0:
            return 0, -math.inf
        if f < 0:
            sign = -sign
        acc += math.log(abs(f))
    return sign, acc


def falling_factorial(c: float, j: int) -> float:
    """c (c - 1) ... (c - j + 1)."""
    return rising_factorial(c, j, -1.0)


def log_pochhammer_ratio(a: float, shift: float, m: int) -> float:
    """log of (a + shift)_{m|1} / (a)_{m|1} for a > 0, a + shift > 0.

    Uses a running product for moderate m (relative error ~ m * eps) and
    log-gamma differences beyond that.
    """
    if m <= 4096:
        acc = 0.0
        for k in range(m):
            acc += math.log1p(shift / (a + k))
        return acc
    return (math.lgamma(a + shift + m) - math.lgamma(a + shift)
            - math.lgamma(a + m) + math.lgamma(a))


@lru_cache(maxsize=None)
def _stirling_table() -> tuple[tuple[int, ...], ...]:
    rows = [(1,)]
    for n in range(1, STIRLING_MAX_N + 1):
        prev = rows[-1]
        row = [0] * (n + 1)
        for k in range(1, n + 1):
            left = prev[k - 1]
            right = prev[k] if k < n else 0
            row[k] = left + k * right
        rows.append(tuple(row))
    return tuple(rows)


def stirling2(n: int, k: int) -> int:
    """Stirling number of the second kind as an exact integer (n <= 64)."""
    if not (0 <= k <= n <= STIRLING_MAX_N):
        raise DomainError(f"stirling2 needs 0 <= k <= n <= {STIRLING_MAX_N}, got ({n}, {k})")
    return _stirling_table()[n][k]


def stirling2_row(n: int) -> tuple[int, ...]:
    if not 0 <= n <= STIRLING_MAX_N:
        raise DomainError(f"stirling2 row needs 0 <= n <= {STIRLING_MAX_N}, got {n}")
    return _stirling_table()[n]


def noncentral_stirling2(n: int, k: int, a: float) -> float:
    """Non-central Stirling numbers of the second kind S(n, k; a).

    Convention: S(n, k; a) = S(n-1, k-1; a) + (k + a) S(n-1, k; a) with
    S(0, 0; a) = 1 and S(n, 0; a) = a**n, equivalently
    sum_k S(n, k; a) (x)_{k|-1} = (x + a)**n.
    """
    if n < 0 or k < 0 or k > n:
        raise DomainError(f"noncentral_stirling2 needs 0 <= k <= n, got ({n}, {k})")
    row = [1.0]
    for i in range(1, n + 1):
        new = [0.0] * (i + 1)
        new[0] = a * row[0]
        for kk in range(1, i + 1):
            right = row[kk] if kk < i else 0.0
            new[kk] = row[kk - 1] + (kk + a) * right
        row = new
    return row[k]


def gen_binom(x: float, k: int) -> float:
    """Generalized binomial coefficient x (x-1) ... (x-k+1) / k! for real x."""
    if k < 0:
        raise DomainError(f"k must be >= 0, got {k}")
    out = 1.0
    for i in range(k):
        out *= (x - i) / (i + 1)
    return out


def log_gen_binom(x: float, k: int) -> float:
    """log C(x, k) for real x and integer k >= 0.

    Raises DomainError when the coefficient is zero or negative, since it
    has no real logarithm.
    """
    if k < 0:
        raise DomainError(f"k must be >= 0, got {k}")
    if k == 0:
        return 0.0
    if x > k - 1 and k > _DIRECT_PRODUCT_MAX:
        return float(log_binom_array(np.float64(x), np.float64(k)))
    sign = 1
    acc = 0.0
    for i in range(k):
        f = x - i
        if f == 0.0:
            raise DomainError(f"C({x}, {k}) is zero")
        if f < 0:
            sign = -sign
        acc += math.log(abs(f)) - math.log(i + 1)
    if sign < 0:
        raise DomainError(f"C({x}, {k}) is negative")
    return acc


def log_binom_array(x, k):
    """Vectorized log C(x, k) for real x, k with x - k > -1 and k > -1.

    Written through the log-Beta function, which keeps the cancellation
    between large log-gamma values under control.
    """
    x = np.asarray(x, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    return -np.log1p(x) - betaln(x - k + 1.0, k + 1.0)
