"""Posterior diversities of an additional sample given K_n = j.

Given an initial sample of size n with j distinct types, the number of new
types in m further draws is distributed as Binomial(K*_m, eta), where K*_m
counts blocks under PD(alpha, theta + n) and eta ~ Beta(theta/alpha + j,
n/alpha - j) independently; likewise for the new types seen l times.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import sampler
from .combinatorics import log_rising_factorial, noncentral_stirling2, rising_factorial, stirling2_row
from .errors import DomainError
from .exact import (
    MULTIPLICITY_MAX_N,
    beta_moments,
    binomial_moment,
    factorial_moment_kstar,
    factorial_moment_mstar,
    law_kn,
    law_multiplicities,
)
from .sampler import ModelParams, RngStream

DP_MODE_MAX_M = 200
ENUM_MODE_MAX_M = 12
REL_TOL_FLAG = 1e-8
MC_SE_FLAG = 4.0


@dataclass(frozen=True)
class PosteriorContext:
    params: ModelParams
    n: int
    j: int

    def __post_init__(self):
        self.params.require_positive_alpha()
        if not (1 <= self.j <= self.n):
            raise DomainError(f"need 1 <= j <= n, got j={self.j}, n={self.n}")
        assert self.beta_b > 0, "n/alpha - j > 0 holds for alpha < 1"

    @property
    def beta_a(self) -> float:
        return self.params.theta / self.params.alpha + self.j

    @property
    def beta_b(self) -> float:
        return self.n / self.params.alpha - self.j

    @property
    def params_post(self) -> ModelParams:
        return self.params.shifted(self.n)


def posterior_components(ctx: PosteriorContext, m: int, rng: RngStream, l: int | None = None,
                         beta_params=None) -> tuple[float, int, int]:
    """Draw (eta, X*, Binomial(X*, eta)) with X* = K*_m, or M*_{l,m} when l is given.

    eta is drawn first and independently of the PD(alpha, theta + n) path.
    """
    a, b = beta_params if beta_params is not None else (ctx.beta_a, ctx.beta_b)
    eta = sampler.beta(a, b, rng)
    ks, ms = sampler.sample_path_arrays(ctx.params_post, [m], l or 1, rng)
    x = int(ks[0]) if l is None else int(ms[0, l - 1])
    return eta, x, sampler.binomial(x, eta, rng)


def sample_posterior_k(ctx: PosteriorContext, m: int, rng: RngStream) -> int:
    """One draw of the number of new types among m additional draws."""
    if m < 0:
        raise DomainError("m must be >= 0")
    if m == 0:
        return 0
    return posterior_components(ctx, m, rng)[2]


def sample_posterior_m(ctx: PosteriorContext, m: int, l: int, rng: RngStream) -> int:
    """One draw of the number of new types seen exactly l times among m draws."""
    if m < 0:
        raise DomainError("m must be >= 0")
    if m == 0:
        return 0
    if not 1 <= l <= m:
        raise DomainError(f"need 1 <= l <= m, got l={l}, m={m}")
    return posterior_components(ctx, m, rng, l)[2]


def sample_posterior_k_path(ctx: PosteriorContext, checkpoints, rng: RngStream,
                            beta_params=None) -> tuple[np.ndarray, float]:
    """New-type counts at several m from one coupled trajectory.

    Each block of the PD(alpha, theta + n) path carries its own Bernoulli(eta)
    mark, so counts at successive checkpoints are thinned consistently.
    Returns (counts, eta).
    """
    a, b = beta_params if beta_params is not None else (ctx.beta_a, ctx.beta_b)
    eta = sampler.beta(a, b, rng)
    ks, _ = sampler.sample_path_arrays(ctx.params_post, checkpoints, 1, rng)
    out = np.empty(len(ks), dtype=np.int64)
    marked = 0
    prev = 0
    for c, k in enumerate(ks):
        marked += sampler.binomial(int(k) - prev, eta, rng)
        prev = int(k)
        out[c] = marked
    return out, eta


def _beta_ratio(ctx: PosteriorContext, t: int) -> float:
    """(j + theta/alpha)_{t|1} / ((theta + n)/alpha)_{t|1}."""
    a = ctx.params.alpha
    return math.exp(log_rising_factorial(ctx.j + ctx.params.theta / a, t)[1]
                    - log_rising_factorial((ctx.params.theta + ctx.n) / a, t)[1])


def posterior_moment_k(ctx: PosteriorContext, m: int, r: int) -> float:
    """E[(new types in m draws)^r | K_n = j] in closed form.

    sum_t S(r, t) (j + theta/alpha)_t / ((theta + n)/alpha)_t E[(K*_m)_{t|-1}].
    """
    if r < 0 or m < 0:
        raise DomainError("m and r must be nonnegative")
    if r == 0:
        return 1.0
    row = stirling2_row(r)
    post = ctx.params_post
    return math.fsum(row[t] * _beta_ratio(ctx, t) * factorial_moment_kstar(post, m, t)
                     for t in range(1, r + 1))


def posterior_moment_m(ctx: PosteriorContext, m: int, l: int, r: int) -> float:
    """E[(new types seen l times in m draws)^r | K_n = j] in closed form."""
    if r < 0 or m < 0 or l < 1:
        raise DomainError("need m >= 0, l >= 1, r >= 0")
    if r == 0:
        return 1.0
    row = stirling2_row(r)
    post = ctx.params_post
    return math.fsum(row[t] * _beta_ratio(ctx, t) * factorial_moment_mstar(post, m, l, t)
                     for t in range(1, r + 1))


def posterior_moment_k_noncentral(ctx: PosteriorContext, m: int, r: int) -> float:
    """Same moment through non-central Stirling numbers S(r, i; j + theta/alpha):

    sum_i (-1)^{r-i} (c)_{i|1} S(r, i; c) (theta+n+i alpha)_{m|1}/(theta+n)_{m|1},
    c = j + theta/alpha.  Used only as a cross-check of the central form.
    """
    c = ctx.j + ctx.params.theta / ctx.params.alpha
    a, t0 = ctx.params.alpha, ctx.params.theta + ctx.n
    terms = []
    for i in range(r + 1):
        ratio = math.exp(log_rising_factorial(t0 + i * a, m)[1] - log_rising_factorial(t0, m)[1])
        terms.append((-1) ** (r - i) * rising_factorial(c, i) * noncentral_stirling2(r, i, c) * ratio)
    return math.fsum(terms)


def compound_moment_oracle(ctx: PosteriorContext, m: int, r: int, l: int | None = None,
                           beta_params=None) -> float:
    """E[Binomial(X, B)^r] with X's law computed exactly.

    X is K*_m from the DP law (l is None) or M*_{l,m} from the histogram
    enumeration; B ~ Beta(a, b), by default the representation's parameters.
    """
    a, b = beta_params if beta_params is not None else (ctx.beta_a, ctx.beta_b)
    pm = beta_moments(a, b, r)
    if m == 0:
        return 1.0 if r == 0 else 0.0
    if l is None:
        law = law_kn(ctx.params_post, m)
        return binomial_moment(law, pm, r)
    if m > MULTIPLICITY_MAX_N:
        raise DomainError(f"enumeration oracle limited to m <= {MULTIPLICITY_MAX_N}")
    return binomial_moment(law_multiplicities(ctx.params_post, m).marginal_m(l), pm, r)


@dataclass
class VerificationRow:
    r: int
    closed_form: float
    oracle: float
    mc_mean: float
    mc_se: float
    rel_err: float
    z: float
    flagged: bool


@dataclass
class VerificationReport:
    ctx: PosteriorContext
    m: int
    l: int | None
    reps: int
    rows: list = field(default_factory=list)

    @property
    def flagged(self) -> bool:
        return any(row.flagged for row in self.rows)


def verify_representation(ctx: PosteriorContext, m: int, l: int | None, r_max: int, reps: int,
                          master_seed: int, *, workers: int = 1, beta_params=None) -> VerificationReport:
    """Three-way check of the Binomial-Beta representation, moment by moment.

    Columns: the closed-form posterior moment, the exact compound moment of
    the representation, and a Monte Carlo estimate from ``reps`` draws of
    the representation.  ``beta_params`` overrides the representation's Beta
    parameters (used to confirm the verifier notices a wrong one).
    """
    if l is None and m > DP_MODE_MAX_M:
        raise DomainError(f"DP mode limited to m <= {DP_MODE_MAX_M}")
    if l is not None and m > ENUM_MODE_MAX_M:
        raise DomainError(f"enumeration mode limited to m <= {ENUM_MODE_MAX_M}")
    a, b = beta_params if beta_params is not None else (ctx.beta_a, ctx.beta_b)

    def draw(rng):
        return posterior_components(ctx, m, rng, l, beta_params=(a, b))[2]

    samples = np.array(sampler.run_replicates(draw, reps, master_seed, workers=workers),
                       dtype=np.float64) if m > 0 else np.zeros(reps)
    report = VerificationReport(ctx, m, l, reps)
    for r in range(r_max + 1):
        cf = posterior_moment_k(ctx, m, r) if l is None else posterior_moment_m(ctx, m, l, r)
        orc = compound_moment_oracle(ctx, m, r, l, beta_params=(a, b))
        powered = samples ** r
        mc = float(powered.mean()) if reps else math.nan
        se = float(powered.std(ddof=1) / math.sqrt(reps)) if reps > 1 else math.nan
        rel = abs(cf - orc) / abs(orc) if orc != 0 else abs(cf - orc)
        if se > 0:
            z = abs(mc - cf) / se
        else:
            z = 0.0 if (math.isnan(mc) or mc == cf) else math.inf
        flagged = rel > REL_TOL_FLAG or (reps > 1 and z > MC_SE_FLAG)
        report.rows.append(VerificationRow(r, cf, orc, mc, se, rel, z, flagged))
    return report
