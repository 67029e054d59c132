"""Seeded random generation for PD(alpha, theta) partitions.

Everything random goes through an :class:`RngStream`, a PCG64 generator
keyed by ``(master_seed, stream_index)``.  Replicate ``r`` of any Monte
Carlo experiment uses ``stream_index = r`` so results do not depend on how
replicates are scheduled across workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import DomainError


@dataclass(frozen=True)
class ModelParams:
    """Discount ``alpha`` in [0, 1) and strength ``theta`` > -alpha."""

    alpha: float
    theta: float

    def __post_init__(self):
        if not (0.0 <= self.alpha < 1.0):
            raise DomainError(f"alpha must lie in [0, 1), got {self.alpha}")
        if not self.theta + self.alpha > 0.0:
            raise DomainError(f"need theta > -alpha, got theta={self.theta}, alpha={self.alpha}")

    def require_positive_alpha(self):
        if self.alpha <= 0.0:
            raise DomainError("this operation requires alpha > 0")
        return self

    def shifted(self, dtheta: float) -> "ModelParams":
        return ModelParams(self.alpha, self.theta + dtheta)


class RngStream:
    """A reproducible random stream identified by ``(master_seed, stream_index)``.

    ``namespace`` separates unrelated experiments sharing one master seed
    (e.g. prior vs posterior draws in one comparison).
    """

    def __init__(self, master_seed: int, stream_index: int = 0, namespace: int = 0):
        if stream_index < 0 or namespace < 0:
            raise DomainError("stream_index and namespace must be nonnegative")
        self.master_seed = int(master_seed) & 0xFFFFFFFFFFFFFFFF
        self.stream_index = int(stream_index)
        self.namespace = int(namespace)
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.namespace, self.stream_index))
        self.bit_generator = np.random.PCG64(seq)
        self.generator = np.random.Generator(self.bit_generator)

    def __repr__(self):
        return (f"RngStream(master_seed={self.master_seed}, stream_index={self.stream_index}, "
                f"namespace={self.namespace})")


@dataclass(frozen=True)
class PartitionState:
    """Block-size histogram: ``multiplicity[l]`` blocks of size ``l``."""

    n: int = 0
    multiplicity: dict = field(default_factory=dict)

    def __post_init__(self):
        total = sum(l * m for l, m in self.multiplicity.items())
        if total != self.n or any(m < 0 or l < 1 for l, m in self.multiplicity.items()):
            raise DomainError(f"inconsistent partition state: n={self.n}, histogram={self.multiplicity}")

    @property
    def k(self) -> int:
        return sum(self.multiplicity.values())

    def m(self, l: int) -> int:
        return self.multiplicity.get(l, 0)


@dataclass(frozen=True)
class StickWeights:
    sticks: np.ndarray
    residual: float


def beta(a: float, b: float, rng: RngStream) -> float:
    """Beta(a, b) draw as G_a / (G_a + G_b) from two independent gamma variates."""
    if not (a > 0 and b > 0):
        raise DomainError(f"beta needs a, b > 0, got ({a}, {b})")
    x = rng.generator.standard_gamma(a)
    y = rng.generator.standard_gamma(b)
    return float(x / (x + y))


def binomial(k: int, p: float, rng: RngStream) -> int:
    if k < 0 or not (0.0 <= p <= 1.0):
        raise DomainError(f"binomial needs k >= 0 and p in [0, 1], got ({k}, {p})")
    if k == 0:
        return 0
    return int(rng.generator.binomial(k, p))


def sample_gem(params: ModelParams, truncation: int, rng: RngStream) -> StickWeights:
    """First ``truncation`` stick-breaking weights, U_k ~ Beta(1 - alpha, theta + k alpha)."""
    if truncation < 1:
        raise DomainError("truncation must be >= 1")
    a, t = params.alpha, params.theta
    # Beta(1 - a, t + k a) as G1 / (G1 + G2), all sticks at once
    g1 = rng.generator.standard_gamma(1.0 - a, size=truncation)
    g2 = rng.generator.standard_gamma(t + a * np.arange(1, truncation + 1))
    u = g1 / (g1 + g2)
    survive = np.cumprod(1.0 - u)
    sticks = u * np.concatenate(([1.0], survive[:-1]))
    remaining = float(survive[-1])
    return StickWeights(sticks, remaining)


def gem_partition_kn(params: ModelParams, n: int, truncation: int, rng: RngStream) -> int:
    """K_n obtained by sampling n labels from stick-breaking weights.

    Mass beyond the truncation is treated as diffuse: each draw landing
    there opens its own type.  This is an independent route to the law of
    K_n used to cross-check the sequential sampler.
    """
    sw = sample_gem(params, truncation, rng)
    cdf = np.cumsum(sw.sticks)
    u = rng.generator.random(n)
    idx = np.searchsorted(cdf, u, side="right")
    inside = idx < truncation
    return int(len(np.unique(idx[inside])) + np.count_nonzero(~inside))


def new_block_probability(state: PartitionState, params: ModelParams) -> float:
    if state.n == 0:
        return 1.0
    return (params.theta + state.k * params.alpha) / (params.theta + state.n)


def crp_extend(state: PartitionState, params: ModelParams, rng: RngStream) -> PartitionState:
    """Add one element to ``state`` by the two-parameter predictive rule.

    New block with probability (theta + K alpha) / (theta + n); otherwise a
    block of size s is joined with probability proportional to
    (s - alpha) M_s.
    """
    mult = dict(state.multiplicity)
    u = rng.generator.random()
    p_new = new_block_probability(state, params)
    if u < p_new:
        mult[1] = mult.get(1, 0) + 1
        return PartitionState(state.n + 1, mult)
    # remaining mass (n - K alpha) / (theta + n) is split over sizes
    target = (u - p_new) * (params.theta + state.n)
    chosen = None
    for s in sorted(mult):
        w = (s - params.alpha) * mult[s]
        if target < w:
            chosen = s
            break
        target -= w
    if chosen is None:  # rounding at the top end
        chosen = max(s for s, m in mult.items() if m > 0)
    mult[chosen] -= 1
    if mult[chosen] == 0:
        del mult[chosen]
    mult[chosen + 1] = mult.get(chosen + 1, 0) + 1
    return PartitionState(state.n + 1, mult)


@dataclass(frozen=True)
class PathPoint:
    n: int
    k: int
    m: tuple


def _check_checkpoints(checkpoints) -> np.ndarray:
    cp = np.asarray(checkpoints, dtype=np.int64)
    if cp.ndim != 1 or len(cp) == 0:
        raise DomainError("checkpoints must be a nonempty list of sample sizes")
    if cp[0] < 1 or np.any(np.diff(cp) <= 0):
        raise DomainError("checkpoints must be strictly increasing positive integers")
    if cp[-1] >= 2**31:
        raise DomainError("sample size too large for the path sampler")
    return np.ascontiguousarray(cp)


def sample_path_arrays(params: ModelParams, checkpoints, track_l_max: int, rng: RngStream):
    """Array form of :func:`sample_path`: ``(K[c], M[c, l-1])``."""
    cp = _check_checkpoints(checkpoints)
    if track_l_max < 1:
        raise DomainError("track_l_max must be >= 1")
    return _backend.crp_path(rng.bit_generator, float(params.alpha), float(params.theta), cp,
                             int(track_l_max))


def sample_path(params: ModelParams, checkpoints, track_l_max: int, rng: RngStream) -> list[PathPoint]:
    """One sequential trajectory recorded at each checkpoint."""
    cp = _check_checkpoints(checkpoints)
    ks, ms = sample_path_arrays(params, cp, track_l_max, rng)
    return [PathPoint(int(n), int(k), tuple(int(x) for x in m)) for n, k, m in zip(cp, ks, ms)]


def bernoulli_kn_alpha0(theta: float, n: int, rng: RngStream) -> int:
    """K_n for alpha = 0 as a sum of independent Bernoulli(theta / (theta + i - 1))."""
    if theta <= 0:
        raise DomainError(f"theta must be > 0, got {theta}")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    p = theta / (theta + np.arange(n, dtype=np.float64))
    return int(np.count_nonzero(rng.generator.random(n) < p))


def run_replicates(fn, reps: int, master_seed: int, *, namespace: int = 0, workers: int = 1) -> list:
    """Evaluate ``fn(RngStream(master_seed, r, namespace))`` for r = 0..reps-1.

    Results come back in replicate order whatever ``workers`` is.  The
    compiled kernels release the GIL, so threads give real parallelism.
    """
    def one(r):
        return fn(RngStream(master_seed, r, namespace))

    if workers <= 1 or reps <= 1:
        return [one(r) for r in range(reps)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(reps)))


def replicate_paths(params: ModelParams, checkpoints, l_max: int, reps: int, master_seed: int, *,
                    namespace: int = 0, workers: int = 1):
    """K and M_{1..l_max} at each checkpoint for ``reps`` independent paths.

    Returns arrays of shape (reps, C) and (reps, C, l_max).
    """
    cp = _check_checkpoints(checkpoints)
    out = run_replicates(lambda rng: sample_path_arrays(params, cp, l_max, rng), reps, master_seed,
                         namespace=namespace, workers=workers)
    ks = np.stack([o[0] for o in out]) if out else np.zeros((0, len(cp)), dtype=np.int64)
    ms = np.stack([o[1] for o in out]) if out else np.zeros((0, len(cp), l_max), dtype=np.int64)
    return ks, ms


def expected_kn_alpha0(theta: float, n: int) -> tuple[float, float]:
    """Exact mean and variance of K_n at alpha = 0."""
    p = theta / (theta + np.arange(n, dtype=np.float64))
    return float(math.fsum(p)), float(math.fsum(p * (1.0 - p)))
