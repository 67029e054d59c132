"""Exact (non-Monte-Carlo) laws, generating functions and moments.

Oracles and closed forms live side by side here on purpose: the DP law of
K_n and the multiplicity enumeration are the references every closed-form
moment and series is checked against.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from . import _backend
from .combinatorics import (
    falling_factorial,
    log_binom_array,
    log_pochhammer_ratio,
    log_rising_factorial,
    rising_factorial,
    stirling2_row,
)
from .errors import DomainError, NumericGuardError, ResourceError
from .sampler import ModelParams

LAW_KN_MAX_N = 20000
MULTIPLICITY_MAX_N = 16
FACTORIAL_MOMENT_MAX_R = 30
CANCELLATION_LIMIT = 1e12
POSITIVE_EXPANSION_MAX_M = 2000

SERIES_REL_TOL = 1e-14
SERIES_QUIET_TERMS = 20
SERIES_MAX_TERMS = 10**8
_SERIES_CHUNK = 8192


@dataclass(frozen=True)
class ExactLaw:
    """Law of K_n; ``log_prob[k]`` = log P(K_n = k) for k = 0..n."""

    n: int
    log_prob: np.ndarray

    @property
    def support(self) -> np.ndarray:
        return np.arange(1, self.n + 1)

    @property
    def prob(self) -> np.ndarray:
        """P(K_n = k) for k in ``support``."""
        return np.exp(self.log_prob[1:])

    def mean(self) -> float:
        return float(math.fsum(self.support * self.prob))

    def factorial_moment(self, r: int) -> float:
        """E[(K_n)_{r|-1}]."""
        return float(math.fsum(falling_factorial(float(k), r) * p
                               for k, p in zip(self.support, self.prob)))

    def log_mgf(self, t: float) -> float:
        """log E[exp(t K_n)]."""
        return float(logsumexp(self.log_prob[1:] + t * self.support))


def law_kn(params: ModelParams, n: int) -> ExactLaw:
    """Exact law of the number of blocks via the predictive-rule recursion.

    P(K_{n+1}=k) = P(K_n=k)(n - k alpha)/(theta + n)
                   + P(K_n=k-1)(theta + (k-1) alpha)/(theta + n),
    carried out in log space.
    """
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if n > LAW_KN_MAX_N:
        raise ResourceError(f"law_kn is quadratic in n; n={n} exceeds {LAW_KN_MAX_N}")
    lp = _backend.law_kn_logprob(float(params.alpha), float(params.theta), int(n))
    return ExactLaw(n, np.asarray(lp))


@dataclass(frozen=True)
class MultiplicityLaw:
    """Joint law of the block-size histogram.

    Each atom is ``(counts, prob)`` with ``counts[l-1]`` = number of blocks of
    size l.
    """

    n: int
    atoms: tuple

    def expect(self, fn) -> float:
        return float(math.fsum(p * fn(c) for c, p in self.atoms))

    def marginal_m(self, l: int) -> tuple[np.ndarray, np.ndarray]:
        """Law of M_{l,n} as (values, probabilities)."""
        acc = {}
        for counts, p in self.atoms:
            v = counts[l - 1] if l <= len(counts) else 0
            acc.setdefault(v, []).append(p)
        vals = np.array(sorted(acc))
        return vals, np.array([math.fsum(acc[v]) for v in vals])

    def marginal_k(self) -> tuple[np.ndarray, np.ndarray]:
        acc = {}
        for counts, p in self.atoms:
            acc.setdefault(sum(counts), []).append(p)
        vals = np.array(sorted(acc))
        return vals, np.array([math.fsum(acc[v]) for v in vals])


def law_multiplicities(params: ModelParams, n: int) -> MultiplicityLaw:
    """Exact histogram law by forward DP over the integer partitions of n."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if n > MULTIPLICITY_MAX_N:
        raise ResourceError(f"enumeration limited to n <= {MULTIPLICITY_MAX_N}, got {n}")
    a, t = params.alpha, params.theta
    states = {(1,) + (0,) * (n - 1): 1.0}
    for m in range(1, n):
        nxt: dict = {}
        for counts, p in states.items():
            k = sum(counts)
            denom = t + m
            c = list(counts)
            c[0] += 1
            key = tuple(c)
            nxt[key] = nxt.get(key, 0.0) + p * (t + k * a) / denom
            for s, ms in enumerate(counts, start=1):
                if ms == 0:
                    continue
                c = list(counts)
                c[s - 1] -= 1
                c[s] += 1
                key = tuple(c)
                nxt[key] = nxt.get(key, 0.0) + p * (s - a) * ms / denom
        states = nxt
    atoms = tuple(sorted(states.items(), key=lambda kv: kv[0], reverse=True))
    return MultiplicityLaw(n, atoms)


def _check_series_args(alpha, y):
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"series needs alpha in (0, 1), got {alpha}")
    if not (0.0 < y < 1.0):
        raise DomainError(f"series needs y in (0, 1), got {y}")


def mgf_kn_series(alpha: float, n: int, y: float) -> float:
    """log E[(1 - y)^(-K_n)] at theta = 0 from sum_i y^i C(i alpha + n - 1, n - 1).

    Terms are accumulated in log space.  Summation stops once the last
    ``SERIES_QUIET_TERMS`` terms are each below the partial sum times
    ``SERIES_REL_TOL`` and the geometric tail bound is too; the log-binomial
    is concave in i, so the current term ratio bounds all later ones.
    """
    _check_series_args(alpha, y)
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    log_y = math.log(y)
    log_tol = math.log(SERIES_REL_TOL)
    acc = -math.inf
    start = 0
    while start < SERIES_MAX_TERMS:
        i = np.arange(start, start + _SERIES_CHUNK, dtype=np.float64)
        terms = i * log_y + log_binom_array(i * alpha + n - 1, n - 1)
        acc = float(np.logaddexp(acc, logsumexp(terms)))
        tail = terms[-SERIES_QUIET_TERMS:]
        log_ratio = terms[-1] - terms[-2]
        if log_ratio < 0 and np.all(tail < acc + log_tol):
            log_bound = terms[-1] + log_ratio - math.log(-math.expm1(log_ratio))
            if log_bound < acc + log_tol:
                return acc
        start += _SERIES_CHUNK
    raise NumericGuardError(
        f"series did not converge within {SERIES_MAX_TERMS} terms (y={y} too close to 1)",
        partial=acc, bound=float(log_bound) if "log_bound" in locals() else None)


def mln_tilt_factor(alpha: float, l: int) -> float:
    """alpha (1 - alpha)_{(l-1)|1} / l!, the per-block weight of size-l blocks."""
    return alpha * rising_factorial(1.0 - alpha, l - 1) / math.factorial(l)


def mgf_mln_series(alpha: float, n: int, l: int, y: float) -> float:
    """log E[(1 - y)^(-M_{l,n})] at theta = 0 from the finite sum

    sum_{i=0}^{floor(n/l)} y_l^i n/(n - il + alpha i) C(n - il + i alpha, n - il),
    y_l = alpha (1-alpha)_{(l-1)|1} / l! * y / (1 - y).
    """
    _check_series_args(alpha, y)
    if not (1 <= l <= n):
        raise DomainError(f"need 1 <= l <= n, got l={l}, n={n}")
    log_yl = math.log(mln_tilt_factor(alpha, l)) + math.log(y) - math.log1p(-y)
    i = np.arange(0, n // l + 1, dtype=np.float64)
    rest = n - i * l
    terms = (i * log_yl + math.log(n) - np.log(rest + alpha * i)
             + log_binom_array(rest + i * alpha, rest))
    terms[0] = 0.0
    return float(logsumexp(terms))


def _check_post(params_post: ModelParams):
    if params_post.alpha <= 0.0:
        raise DomainError("closed-form moments need alpha > 0")
    if params_post.theta <= 0.0:
        raise DomainError("closed-form moments need theta + n > 0")


def factorial_moment_kstar(params_post: ModelParams, m: int, r: int) -> float:
    """E[(K_m)_{r|-1}] under PD(alpha, theta'), theta' = ``params_post.theta``.

    (theta'/alpha)_{r|1} sum_i (-1)^{r-i} C(r,i) (theta' + i alpha)_{m|1} / (theta')_{m|1}.
    The alternating sum is an r-th forward difference.  For m up to
    ``POSITIVE_EXPANSION_MAX_M`` it is expanded into positive terms (see
    :func:`_log_forward_difference`), which avoids cancellation entirely.
    Beyond that it is formed with exactly rounded summation; if the largest
    term exceeds the result by more than ``CANCELLATION_LIMIT`` the answer
    is not trusted and NumericGuardError is raised.
    """
    _check_post(params_post)
    if m < 0 or r < 0:
        raise DomainError("m and r must be nonnegative")
    if r > FACTORIAL_MOMENT_MAX_R:
        raise NumericGuardError(f"r={r} exceeds the alternating-sum guard {FACTORIAL_MOMENT_MAX_R}")
    if r == 0:
        return 1.0
    if r > m:
        return 0.0  # K_m <= m
    a, t = params_post.alpha, params_post.theta
    _, log_pre = log_rising_factorial(t / a, r)
    if m <= POSITIVE_EXPANSION_MAX_M:
        return math.exp(log_pre + _log_forward_difference(a, t, m, r))
    terms = []
    for i in range(r + 1):
        mag = math.comb(r, i) * math.exp(log_pochhammer_ratio(t, i * a, m))
        terms.append(mag if (r - i) % 2 == 0 else -mag)
    s = math.fsum(terms)
    biggest = max(abs(x) for x in terms)
    if s <= 0 or biggest / s > CANCELLATION_LIMIT:
        raise NumericGuardError(f"cancellation too severe in factorial moment (m={m}, r={r})",
                                partial=s, bound=biggest)
    return math.exp(log_pre) * s


@lru_cache(maxsize=4)
def _log_stirling2_table(d_max: int) -> np.ndarray:
    """log S(d, k) for d <= d_max, k <= FACTORIAL_MOMENT_MAX_R (floating point, -inf for zeros)."""
    k_max = FACTORIAL_MOMENT_MAX_R
    out = np.full((d_max + 1, k_max + 1), -np.inf)
    out[0, 0] = 0.0
    logk = np.log(np.arange(1, k_max + 1, dtype=np.float64))
    with np.errstate(divide="ignore"):
        for d in range(1, d_max + 1):
            out[d, 1:] = np.logaddexp(out[d - 1, :-1], logk + out[d - 1, 1:])
    return out


@lru_cache(maxsize=256)
def _log_elementary(alpha: float, theta: float, m: int) -> np.ndarray:
    """log e_d(c_0..c_{m-1}), c_k = alpha / (theta + k): coefficients of prod_k (1 + c_k x)."""
    le = np.full(m + 1, -np.inf)
    le[0] = 0.0
    logc = math.log(alpha) - np.log(theta + np.arange(m, dtype=np.float64))
    for k in range(m):
        le[1:k + 2] = np.logaddexp(le[1:k + 2], logc[k] + le[:k + 1])
    return le


def _log_forward_difference(alpha: float, theta: float, m: int, r: int) -> float:
    """log of the r-th forward difference at 0 of f(i) = (theta + i alpha)_{m|1} / (theta)_{m|1}.

    f(x) = sum_d e_d x^d and the r-th difference of x^d at 0 is r! S(d, r),
    so the alternating sum becomes a sum of positive terms.
    """
    le = _log_elementary(alpha, theta, m)
    ls = _log_stirling2_table(POSITIVE_EXPANSION_MAX_M)[r:m + 1, r]
    return math.lgamma(r + 1) + float(logsumexp(le[r:] + ls))


def factorial_moment_mstar(params_post: ModelParams, m: int, l: int, r: int) -> float:
    """E[(M_{l,m})_{r|-1}] under PD(alpha, theta').

    (m)_{rl|-1} (alpha (1-alpha)_{(l-1)|1}/l!)^r (theta'/alpha)_{r|1}
    (theta' + r alpha)_{(m - rl)|1} / (theta')_{m|1}.
    """
    _check_post(params_post)
    if l < 1 or m < 0 or r < 0:
        raise DomainError("need l >= 1, m >= 0, r >= 0")
    if r == 0:
        return 1.0
    if r * l > m:
        return 0.0
    a, t = params_post.alpha, params_post.theta
    log_v = (math.lgamma(m + 1) - math.lgamma(m - r * l + 1)
             + r * math.log(mln_tilt_factor(a, l))
             + log_rising_factorial(t / a, r)[1]
             + log_rising_factorial(t + r * a, m - r * l)[1]
             - log_rising_factorial(t, m)[1])
    return math.exp(log_v)


def _as_law(k_law):
    if isinstance(k_law, (int, np.integer)):
        return np.array([int(k_law)]), np.array([1.0])
    if isinstance(k_law, ExactLaw):
        return k_law.support, k_law.prob
    vals, probs = k_law
    return np.asarray(vals), np.asarray(probs, dtype=np.float64)


def binomial_moment(k_law, p_moments, r: int) -> float:
    """E[Z^r] for Z ~ Binomial(N, P) with N and P independent.

    ``k_law`` is a fixed integer, an :class:`ExactLaw`, or a ``(values,
    probabilities)`` pair; ``p_moments[t]`` = E[P^t] for t = 0..r.
    sum_t S(r, t) E[(N)_{t|-1}] E[P^t].
    """
    if r < 0:
        raise DomainError("r must be >= 0")
    if len(p_moments) < r + 1:
        raise DomainError(f"need E[P^t] for t = 0..{r}, got {len(p_moments)} entries")
    if r == 0:
        return 1.0
    vals, probs = _as_law(k_law)
    row = stirling2_row(r)
    out = []
    for t in range(r + 1):
        if row[t] == 0:
            continue
        ff = math.fsum(falling_factorial(float(v), t) * p for v, p in zip(vals, probs))
        out.append(row[t] * ff * p_moments[t])
    return math.fsum(out)


def beta_moments(a: float, b: float, r_max: int) -> np.ndarray:
    """E[B^t] = (a)_{t|1} / (a + b)_{t|1} for t = 0..r_max."""
    if not (a > 0 and b > 0):
        raise DomainError(f"beta moments need a, b > 0, got ({a}, {b})")
    out = np.ones(r_max + 1)
    for t in range(1, r_max + 1):
        out[t] = out[t - 1] * (a + t - 1) / (a + b + t - 1)
    return out
