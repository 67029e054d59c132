"""Moderate-deviation analysis for the number of blocks and block-size counts.

Normalization used throughout, for a scale sequence beta_n:

    tilt_n(lam)  = lam * n**(-alpha) * beta_n**(alpha / (1 - alpha))
    speed_n      = beta_n**(1 / (1 - alpha))
    Lhat_n(lam)  = log E[exp(tilt_n(lam) * X)] / speed_n

with X = K_n or M_{l,n}.  Lhat_n converges to lam**(1/alpha) for K_n and to
(alpha (1-alpha)_{(l-1)|1} lam / l!)**(1/alpha) for M_{l,n} when lam > 0,
and to 0 for lam <= 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import sampler
from .combinatorics import gen_binom, rising_factorial
from .errors import DomainError, NumericGuardError
from .exact import LAW_KN_MAX_N, law_kn, mgf_kn_series, mgf_mln_series, mln_tilt_factor
from .posterior import PosteriorContext, sample_posterior_k_path
from .sampler import ModelParams

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
MC_SE_FLAG = 4.0


def _check_alpha(alpha):
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")


def rate_k(alpha: float, x: float) -> float:
    """(1 - alpha) alpha^(alpha/(1-alpha)) x^(1/(1-alpha)) for x > 0, else +inf."""
    _check_alpha(alpha)
    if x <= 0:
        return math.inf
    return (1.0 - alpha) * alpha ** (alpha / (1.0 - alpha)) * x ** (1.0 / (1.0 - alpha))


def rate_m(alpha: float, l: int, x: float) -> float:
    """(1 - alpha) (l!/(1-alpha)_{(l-1)|1})^(alpha/(1-alpha)) x^(1/(1-alpha)) for x > 0."""
    _check_alpha(alpha)
    if l < 1:
        raise DomainError("l must be >= 1")
    if x <= 0:
        return math.inf
    pref = math.factorial(l) / rising_factorial(1.0 - alpha, l - 1)
    return (1.0 - alpha) * pref ** (alpha / (1.0 - alpha)) * x ** (1.0 / (1.0 - alpha))


def rate_m_dual(alpha: float, l: int, x: float) -> float:
    """Closed-form conjugate of ``limit_logmgf_m``: rate_k(alpha, x / c_l).

    c_l = alpha (1-alpha)_{(l-1)|1} / l!.  It differs from :func:`rate_m` by
    the factor 1 / c_l; see the README for why both are provided.
    """
    _check_alpha(alpha)
    if l < 1:
        raise DomainError("l must be >= 1")
    return rate_k(alpha, x / mln_tilt_factor(alpha, l))


def limit_logmgf_k(alpha: float, lam: float) -> float:
    _check_alpha(alpha)
    return lam ** (1.0 / alpha) if lam > 0 else 0.0


def limit_logmgf_m(alpha: float, l: int, lam: float) -> float:
    _check_alpha(alpha)
    if lam <= 0:
        return 0.0
    return (mln_tilt_factor(alpha, l) * lam) ** (1.0 / alpha)


def golden_max(f, lo: float, hi: float, tol: float = 1e-13, max_iter: int = 500) -> tuple[float, float]:
    """Maximize a unimodal ``f`` on [lo, hi]; returns (argmax, max)."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    else:
        raise NumericGuardError("golden-section search did not converge")
    x = 0.5 * (a + b)
    return x, f(x)


def legendre(alpha: float, x: float, l: int | None = None, tol: float = 1e-13) -> float:
    """sup over lam > 0 of lam x - Lambda(lam), found numerically.

    ``l=None`` uses the K_n limit; an integer l uses the M_{l,n} limit.
    """
    _check_alpha(alpha)
    if x <= 0:
        raise DomainError("legendre transform evaluated for x > 0 only")
    lim = (lambda lam: limit_logmgf_k(alpha, lam)) if l is None else (lambda lam: limit_logmgf_m(alpha, l, lam))

    def obj(lam):
        return lam * x - lim(lam)

    hi = 1.0
    for _ in range(2000):
        if obj(2.0 * hi) < obj(hi):
            break
        hi *= 2.0
    else:
        raise NumericGuardError("could not bracket the Legendre maximizer")
    _, val = golden_max(obj, 0.0, 2.0 * hi, tol=tol)
    return val


def entropy_form(alpha: float, x: float) -> tuple[float, float]:
    """Return (H_alpha, exp((H_alpha + ln x) / (1 - alpha))).

    H_alpha = (1 - alpha) ln(1 - alpha) + alpha ln(alpha); the second value
    is the K_n rate function rewritten through this entropy.
    """
    _check_alpha(alpha)
    if x <= 0:
        raise DomainError("x must be > 0")
    h = (1.0 - alpha) * math.log1p(-alpha) + alpha * math.log(alpha)
    return h, math.exp((h + math.log(x)) / (1.0 - alpha))


def critical_alpha(x: float, tol: float = 1e-12) -> float:
    """Numerical argmin over alpha in (0, 1) of the K_n rate function at x > 1."""
    if x <= 1:
        raise DomainError("critical_alpha needs x > 1 (no interior minimum otherwise)")
    eps = 1e-12
    arg, _ = golden_max(lambda a: -math.log(rate_k(a, x)), eps, 1.0 - eps, tol=tol)
    return arg


@dataclass(frozen=True)
class ScaleSchedule:
    """beta_n = c * n**p * (ln n)**q."""

    c: float = 1.0
    p: float = 0.25
    q: float = 0.0

    def __post_init__(self):
        if not self.c > 0:
            raise DomainError("schedule constant c must be > 0")
        if self.p < 0:
            raise DomainError("schedule exponent p must be >= 0")

    @classmethod
    def parse(cls, text: str) -> "ScaleSchedule":
        parts = [float(v) for v in text.split(",")]
        if len(parts) != 3:
            raise DomainError(f"schedule must be 'c,p,q', got {text!r}")
        return cls(*parts)

    def beta(self, n: float) -> float:
        return self.c * n ** self.p * math.log(n) ** self.q

    def gamma(self, n: float, alpha: float) -> int:
        """floor(beta_n^(1/(1-alpha)))."""
        return math.floor(self.beta(n) ** (1.0 / (1.0 - alpha)))


def validate_schedule(schedule: ScaleSchedule, alpha: float) -> tuple[bool, str]:
    """Check beta_n / n^(1-alpha) -> 0 and beta_n / (ln n)^(1-alpha) -> inf."""
    _check_alpha(alpha)
    p, q = schedule.p, schedule.q
    upper_ok = p < 1.0 - alpha
    lower_ok = p > 0 or q > 1.0 - alpha
    if upper_ok and lower_ok:
        return True, "ok"
    reasons = []
    if not upper_ok:
        reasons.append(f"beta_n/n^(1-alpha) does not vanish (p={p} >= {1.0 - alpha})")
    if not lower_ok:
        reasons.append(f"beta_n/(ln n)^(1-alpha) does not diverge (p=0, q={q} <= {1.0 - alpha})")
    return False, "; ".join(reasons)


@dataclass(frozen=True)
class MdpEntry:
    n: int
    lam: float
    beta_n: float
    value: float
    method: str
    stderr: float | None = None


@dataclass
class MdpScan:
    params: ModelParams
    schedule: ScaleSchedule
    statistic: str
    entries: list = field(default_factory=list)

    def add(self, entry: MdpEntry):
        if any(e.n == entry.n and e.lam == entry.lam for e in self.entries):
            raise DomainError(f"duplicate scan entry at n={entry.n}, lambda={entry.lam}")
        self.entries.append(entry)

    def limit(self, lam: float) -> float:
        if self.statistic == "K":
            return limit_logmgf_k(self.params.alpha, lam)
        return limit_logmgf_m(self.params.alpha, _stat_l(self.statistic), lam)

    def trend(self) -> dict:
        """Per lambda: the |Lhat_n - Lambda| sequence along n and whether it strictly decreases."""
        out = {}
        for lam in sorted({e.lam for e in self.entries}):
            row = sorted((e for e in self.entries if e.lam == lam), key=lambda e: e.n)
            dev = [abs(e.value - self.limit(lam)) for e in row]
            out[lam] = ([e.n for e in row], dev, all(b < a for a, b in zip(dev, dev[1:])))
        return out


def _stat_l(statistic: str) -> int | None:
    if statistic == "K":
        return None
    if statistic.startswith("M") and statistic[1:].isdigit() and int(statistic[1:]) >= 1:
        return int(statistic[1:])
    raise DomainError(f"statistic must be 'K' or 'M<l>', got {statistic!r}")


def scaling(alpha: float, schedule: ScaleSchedule, n: float, lam: float) -> tuple[float, float, float]:
    """(beta_n, tilt, speed) for the scaled log-MGF at sample size n."""
    b = schedule.beta(n)
    tilt = lam * n ** (-alpha) * b ** (alpha / (1.0 - alpha))
    return b, tilt, b ** (1.0 / (1.0 - alpha))


def log_mean_exp(x: np.ndarray) -> tuple[float, float]:
    """log(mean(exp(x))) with a max shift, and its delta-method standard error."""
    x = np.asarray(x, dtype=np.float64)
    r = len(x)
    shift = float(np.max(x))
    w = np.exp(x - shift)
    mean = float(w.mean())
    se = float(w.std(ddof=1) / (math.sqrt(r) * mean)) if r > 1 else math.nan
    return shift + math.log(mean), se


def scaled_logmgf(params: ModelParams, schedule: ScaleSchedule, n: int, lam: float, statistic: str = "K",
                  method: str = "series", *, reps: int = 0, master_seed: int | None = None,
                  workers: int = 1, samples: np.ndarray | None = None) -> MdpEntry:
    """Lhat_n(lam) by exact series (theta = 0), exact DP law, or Monte Carlo.

    For ``method="mc"`` pass either ``reps`` and ``master_seed`` or
    precomputed ``samples`` of the statistic at this n.
    """
    params.require_positive_alpha()
    l = _stat_l(statistic)
    a = params.alpha
    b, tilt, speed = scaling(a, schedule, n, lam)
    if method == "series":
        if params.theta != 0.0:
            raise DomainError("series method is exact only at theta = 0")
        if lam == 0:
            return MdpEntry(n, lam, b, 0.0, method)
        if lam < 0:
            raise DomainError("series method needs lambda > 0; use dp or mc for lambda <= 0")
        y = -math.expm1(-tilt)
        logm = mgf_kn_series(a, n, y) if l is None else mgf_mln_series(a, n, l, y)
        return MdpEntry(n, lam, b, logm / speed, method)
    if method == "dp":
        if l is not None:
            raise DomainError("dp method covers statistic K only")
        return MdpEntry(n, lam, b, law_kn(params, n).log_mgf(tilt) / speed, method)
    if method == "mc":
        if samples is None:
            if reps < 2 or master_seed is None:
                raise DomainError("mc method needs reps >= 2 and a seed")
            ks, ms = sampler.replicate_paths(params, [n], l or 1, reps, master_seed, workers=workers)
            samples = ks[:, 0] if l is None else ms[:, 0, l - 1]
        with np.errstate(over="raise"):
            val, se = log_mean_exp(tilt * np.asarray(samples, dtype=np.float64))
        return MdpEntry(n, lam, b, val / speed, method, se / speed)
    raise DomainError(f"unknown method {method!r}")


def mdp_scan(params: ModelParams, schedule: ScaleSchedule, n_grid, lambda_grid, statistic: str = "K",
             method: str = "series", *, reps: int = 0, master_seed: int | None = None,
             workers: int = 1) -> MdpScan:
    """Scan Lhat_n over an (n, lambda) grid.

    Monte Carlo scans draw one trajectory per replicate and read every n
    of the grid off it, reusing the draws across lambda.
    """
    scan = MdpScan(params, schedule, statistic)
    n_grid = sorted(int(v) for v in n_grid)
    if method == "mc":
        l = _stat_l(statistic)
        if reps < 2 or master_seed is None:
            raise DomainError("mc method needs reps >= 2 and a seed")
        ks, ms = sampler.replicate_paths(params, n_grid, l or 1, reps, master_seed, workers=workers)
        for c, n in enumerate(n_grid):
            x = ks[:, c] if l is None else ms[:, c, l - 1]
            for lam in lambda_grid:
                scan.add(scaled_logmgf(params, schedule, n, lam, statistic, "mc", samples=x))
        return scan
    for n in n_grid:
        for lam in lambda_grid:
            scan.add(scaled_logmgf(params, schedule, n, lam, statistic, method))
    return scan


@dataclass
class CompareRow:
    m: int
    lam: float
    posterior: float
    posterior_se: float
    prior: float
    prior_se: float
    z: float
    flagged: bool


def posterior_mdp_compare(ctx: PosteriorContext, schedule: ScaleSchedule, m_grid, lambda_grid, reps: int,
                          master_seed: int, *, workers: int = 1) -> list[CompareRow]:
    """Monte Carlo Lhat_m for posterior new-type counts next to the prior K_m.

    Posterior replicates use namespace 1 and prior replicates namespace 0 of
    ``master_seed``.  Only the largest m is flagged, when the two estimates
    are more than 4 combined standard errors apart.
    """
    m_grid = sorted(int(v) for v in m_grid)
    a = ctx.params.alpha
    post = sampler.run_replicates(lambda rng: sample_posterior_k_path(ctx, m_grid, rng)[0], reps, master_seed,
                                  namespace=1, workers=workers)
    post = np.stack(post)
    prior, _ = sampler.replicate_paths(ctx.params, m_grid, 1, reps, master_seed, namespace=0, workers=workers)
    rows = []
    for c, m in enumerate(m_grid):
        for lam in lambda_grid:
            _, tilt, speed = scaling(a, schedule, m, lam)
            pv, ps = log_mean_exp(tilt * post[:, c].astype(np.float64))
            qv, qs = log_mean_exp(tilt * prior[:, c].astype(np.float64))
            pv, ps, qv, qs = pv / speed, ps / speed, qv / speed, qs / speed
            comb = math.hypot(ps, qs)
            z = abs(pv - qv) / comb if comb > 0 else (0.0 if pv == qv else math.inf)
            rows.append(CompareRow(m, lam, pv, ps, qv, qs, z, m == m_grid[-1] and z > MC_SE_FLAG))
    return rows


@dataclass
class CltReport:
    theta: float
    n: int
    reps: int
    exact_mean: float
    exact_var: float
    mean: float
    mean_se: float | None
    var: float | None
    var_se: float | None
    skewness: float | None
    flags: list = field(default_factory=list)


def clt_diagnostic(theta: float, n: int, reps: int, master_seed: int, *, workers: int = 1) -> CltReport:
    """Empirical mean/variance of K_n at alpha = 0 against the exact Bernoulli sums.

    Also reports the sample skewness of (K_n - theta ln n)/sqrt(ln n), which
    shrinks toward 0 as the normal limit takes hold.
    """
    ks = np.array(sampler.run_replicates(lambda rng: sampler.bernoulli_kn_alpha0(theta, n, rng), reps,
                                         master_seed, workers=workers), dtype=np.float64)
    mu, var = sampler.expected_kn_alpha0(theta, n)
    mean = float(ks.mean())
    if reps < 2:
        return CltReport(theta, n, reps, mu, var, mean, None, None, None, None)
    s2 = float(ks.var(ddof=1))
    mean_se = math.sqrt(s2 / reps)
    centered = ks - mean
    m4 = float(np.mean(centered ** 4))
    var_se = math.sqrt(max(m4 - s2 ** 2, 0.0) / reps)
    z = (ks - theta * math.log(n)) / math.sqrt(math.log(n))
    zc = z - z.mean()
    sd = float(np.sqrt(np.mean(zc ** 2)))
    skew = float(np.mean(zc ** 3) / sd ** 3) if sd > 0 else 0.0
    flags = []
    if abs(mean - mu) > MC_SE_FLAG * mean_se:
        flags.append("mean")
    if abs(s2 - var) > MC_SE_FLAG * var_se:
        flags.append("variance")
    return CltReport(theta, n, reps, mu, var, mean, mean_se, s2, var_se, skew, flags)


def alpha_diversity_ratio(alpha: float, l: int) -> float:
    """(-1)^(l-1) C(alpha, l): limit of M_{l,n} / K_n."""
    return (-1) ** (l - 1) * gen_binom(alpha, l)


@dataclass
class LimitReport:
    params: ModelParams
    n: int
    reps: int
    k_scaled_mean: float
    k_scaled_se: float
    k_scaled_exact: float | None
    ratio_mean: list
    ratio_se: list
    ratio_limit: list
    flags: list = field(default_factory=list)


def limit_ratio_diagnostic(params: ModelParams, n: int, l_max: int, reps: int, master_seed: int, *,
                           workers: int = 1, ratio_tol: float = 0.02) -> LimitReport:
    """Replicate means of K_n/n^alpha and M_{l,n}/K_n against their anchors.

    M_{l,n}/K_n is compared with (-1)^(l-1) C(alpha, l) (flag when further
    than ``ratio_tol``); K_n/n^alpha with E[K_n]/n^alpha from the exact law
    when n is small enough for it (flag beyond 4 standard errors).
    """
    params.require_positive_alpha()
    ks, ms = sampler.replicate_paths(params, [n], l_max, reps, master_seed, workers=workers)
    k = ks[:, 0].astype(np.float64)
    scaled = k / n ** params.alpha
    se = float(scaled.std(ddof=1) / math.sqrt(reps)) if reps > 1 else math.nan
    exact = law_kn(params, n).mean() / n ** params.alpha if n <= LAW_KN_MAX_N else None
    ratio_mean, ratio_se, limits, flags = [], [], [], []
    for l in range(1, l_max + 1):
        ratio = ms[:, 0, l - 1] / k
        ratio_mean.append(float(ratio.mean()))
        ratio_se.append(float(ratio.std(ddof=1) / math.sqrt(reps)) if reps > 1 else math.nan)
        limits.append(alpha_diversity_ratio(params.alpha, l))
        if abs(ratio_mean[-1] - limits[-1]) > ratio_tol:
            flags.append(f"M{l}/K")
    mean = float(scaled.mean())
    if exact is not None and reps > 1 and abs(mean - exact) > MC_SE_FLAG * se:
        flags.append("K/n^alpha")
    return LimitReport(params, n, reps, mean, se, exact, ratio_mean, ratio_se, limits, flags)
