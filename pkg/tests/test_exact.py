import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import logsumexp

from pdpart.combinatorics import falling_factorial, stirling2
from pdpart.errors import DomainError, NumericGuardError, ResourceError
from pdpart.exact import (
    beta_moments,
    binomial_moment,
    factorial_moment_kstar,
    factorial_moment_mstar,
    law_kn,
    law_multiplicities,
    mgf_kn_series,
    mgf_mln_series,
)
from pdpart.sampler import ModelParams

GRID = [ModelParams(a, t) for a in (0.25, 0.5, 0.75) for t in (0.5, 1.0, 5.0)]


def _mix_log_mgf_k(params, n, y):
    law = law_kn(params, n)
    return float(logsumexp(law.log_prob[1:] - law.support * math.log1p(-y)))


def _mix_log_mgf_m(params, n, l, y):
    vals, probs = law_multiplicities(params, n).marginal_m(l)
    return float(logsumexp(np.log(probs) - vals * math.log1p(-y)))


class TestLawKn:
    def test_examples(self):
        assert law_kn(ModelParams(0.3, 1.0), 1).prob[0] == 1.0
        law = law_kn(ModelParams(0.5, 0.5), 2)
        assert law.prob == pytest.approx([1 / 3, 2 / 3], rel=1e-15)

    @given(alpha=st.floats(0.0, 0.99), theta_off=st.floats(0.01, 50), n=st.integers(1, 400))
    def test_normalized(self, alpha, theta_off, n):
        law = law_kn(ModelParams(alpha, theta_off - alpha), n)
        assert abs(logsumexp(law.log_prob) ) < 1e-10
        assert np.all(np.isfinite(law.log_prob[1:]))

    def test_size_guard(self):
        with pytest.raises(ResourceError):
            law_kn(ModelParams(0.5, 1.0), 20001)
        with pytest.raises(DomainError):
            law_kn(ModelParams(0.5, 1.0), 0)

    def test_alpha0_mean(self):
        law = law_kn(ModelParams(0.0, 2.0), 50)
        assert law.mean() == pytest.approx(sum(2.0 / (2.0 + i) for i in range(50)), rel=1e-12)

    def test_mean_nondecreasing(self):
        for p in GRID:
            means = [law_kn(p, m).mean() for m in range(1, 60)]
            assert all(b >= a for a, b in zip(means, means[1:]))


class TestMultiplicities:
    def test_n2_example(self):
        law = law_multiplicities(ModelParams(0.5, 0.5), 2)
        got = {c: p for c, p in law.atoms}
        assert got[(0, 1)] == pytest.approx(1 / 3)
        assert got[(2, 0)] == pytest.approx(2 / 3)

    def test_n3_states(self):
        law = law_multiplicities(ModelParams(0.2, 3.0), 3)
        assert sorted(c for c, _ in law.atoms) == sorted([(3, 0, 0), (1, 1, 0), (0, 0, 1)])

    @pytest.mark.parametrize("p", GRID[::2] + [ModelParams(0.0, 1.0)])
    def test_marginal_k_equals_dp(self, p):
        for n in range(1, 11):
            law = law_multiplicities(p, n)
            assert math.fsum(pr for _, pr in law.atoms) == pytest.approx(1.0, abs=1e-12)
            for counts, _ in law.atoms:
                assert sum((l + 1) * c for l, c in enumerate(counts)) == n
            vals, probs = law.marginal_k()
            dense = np.zeros(n)
            dense[vals - 1] = probs
            assert np.max(np.abs(dense - law_kn(p, n).prob)) <= 1e-12

    def test_partition_counts(self):
        # p(n) for n = 1..14
        expected = [1, 2, 3, 5, 7, 11, 15, 22, 30, 42, 56, 77, 101, 135]
        for n, pn in enumerate(expected, start=1):
            assert len(law_multiplicities(ModelParams(0.5, 1.0), n).atoms) == pn

    def test_size_guard(self):
        with pytest.raises(ResourceError):
            law_multiplicities(ModelParams(0.5, 1.0), 17)


class TestKSeries:
    def test_n1_closed_form(self):
        for y in (0.1, 0.5, 0.9):
            assert math.exp(mgf_kn_series(0.5, 1, y)) == pytest.approx(1 / (1 - y), rel=1e-12)
        assert math.exp(mgf_kn_series(0.3, 1, 0.5)) == pytest.approx(2.0, rel=1e-12)

    def test_small_y(self):
        assert mgf_kn_series(0.5, 20, 1e-12) == pytest.approx(0.0, abs=1e-9)

    @pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
    @pytest.mark.parametrize("y", [0.1, 0.3, 0.6])
    def test_matches_dp_mixture(self, alpha, y):
        p = ModelParams(alpha, 0.0)
        for n in range(1, 51):
            got, want = mgf_kn_series(alpha, n, y), _mix_log_mgf_k(p, n, y)
            assert abs(math.expm1(got - want)) <= 1e-8

    def test_guard(self):
        with pytest.raises(NumericGuardError) as info:
            import pdpart.exact as ex

            old = ex.SERIES_MAX_TERMS
            ex.SERIES_MAX_TERMS = 10_000
            try:
                mgf_kn_series(0.9, 5, 1 - 1e-9)
            finally:
                ex.SERIES_MAX_TERMS = old
        assert info.value.partial is not None

    def test_domain(self):
        for bad in (0.0, 1.0, -0.2):
            with pytest.raises(DomainError):
                mgf_kn_series(0.5, 4, bad)


class TestMSeries:
    @pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
    @pytest.mark.parametrize("l", [1, 2, 3])
    def test_matches_enumeration_at_theta0(self, alpha, l):
        p = ModelParams(alpha, 0.0)
        for n in range(l, 13):
            for y in (0.1, 0.3, 0.6):
                got, want = mgf_mln_series(alpha, n, l, y), _mix_log_mgf_m(p, n, l, y)
                assert abs(math.expm1(got - want)) <= 1e-9

    def test_not_valid_away_from_theta0(self):
        # the finite sum is the theta = 0 law only; documented domain restriction
        errs = [abs(math.expm1(mgf_mln_series(0.5, n, 1, 0.3) - _mix_log_mgf_m(ModelParams(0.5, t), n, 1, 0.3)))
                for t in (0.5, 1.0) for n in (6, 12)]
        assert min(errs) > 1e-3

    def test_two_terms_when_l_equals_n(self):
        a, n, y = 0.5, 7, 0.4
        from pdpart.exact import mln_tilt_factor

        yl = mln_tilt_factor(a, n) * y / (1 - y)
        two = 1 + yl * n / a  # i = 1: rest = 0, n/(alpha) * C(alpha, 0)
        assert math.exp(mgf_mln_series(a, n, n, y)) == pytest.approx(two, rel=1e-13)

    def test_small_y(self):
        assert mgf_mln_series(0.5, 10, 2, 1e-12) == pytest.approx(0.0, abs=1e-9)


class TestFactorialMoments:
    def test_examples(self):
        post = ModelParams(0.5, 9.0)
        assert factorial_moment_kstar(post, 1, 1) == pytest.approx(1.0, rel=1e-12)
        assert factorial_moment_mstar(post, 1, 1, 1) == pytest.approx(1.0, rel=1e-12)
        assert factorial_moment_kstar(post, 3, 5) == 0.0
        assert factorial_moment_mstar(post, 5, 2, 3) == 0.0

    @pytest.mark.parametrize("p", GRID)
    def test_kstar_vs_dp(self, p):
        post = p.shifted(8)
        for m in (1, 2, 5, 17, 60, 200):
            law = law_kn(post, m)
            for r in range(1, 6):
                want = law.factorial_moment(r)
                got = factorial_moment_kstar(post, m, r)
                if want == 0:
                    assert abs(got) <= 1e-9
                else:
                    assert got == pytest.approx(want, rel=1e-9)
                assert got >= 0

    @pytest.mark.parametrize("p", GRID[::4])
    @pytest.mark.parametrize("l", [1, 2, 3])
    def test_mstar_vs_enumeration(self, p, l):
        post = p.shifted(8)
        for m in range(1, 13):
            vals, probs = law_multiplicities(post, m).marginal_m(l)
            for r in range(1, 4):
                want = math.fsum(falling_factorial(v, r) * q for v, q in zip(vals, probs))
                got = factorial_moment_mstar(post, m, l, r)
                assert got == pytest.approx(want, rel=1e-9, abs=1e-300)

    def test_positive_expansion_agrees_with_alternating_sum(self, monkeypatch):
        import pdpart.exact as ex

        for p in (ModelParams(0.25, 8.5), ModelParams(0.75, 13.0)):
            for r in (1, 3, 5):
                pos = factorial_moment_kstar(p, 1500, r)
                monkeypatch.setattr(ex, "POSITIVE_EXPANSION_MAX_M", 10)
                alt = factorial_moment_kstar(p, 1500, r)
                monkeypatch.undo()
                assert pos == pytest.approx(alt, rel=1e-11)

    def test_cancellation_guard(self):
        with pytest.raises(NumericGuardError):
            factorial_moment_kstar(ModelParams(0.05, 1000.0), 3000, 20)

    def test_requires_positive_alpha(self):
        with pytest.raises(DomainError):
            factorial_moment_kstar(ModelParams(0.0, 3.0), 5, 2)


class TestBinomialMoments:
    def test_examples(self):
        pm = [1.0, 0.5, 0.25, 0.125]
        assert binomial_moment(2, pm, 2) == pytest.approx(1.5)
        law = law_kn(ModelParams(0.5, 3.0), 9)
        assert binomial_moment(law, pm, 1) == pytest.approx(law.mean() * 0.5, rel=1e-13)

    def test_p_one_gives_raw_moments(self):
        law = law_kn(ModelParams(0.4, 2.0), 12)
        ones = [1.0] * 6
        for r in range(1, 6):
            raw = math.fsum(k ** r * p for k, p in zip(law.support, law.prob))
            assert binomial_moment(law, ones, r) == pytest.approx(raw, rel=1e-12)

    def test_short_moment_vector(self):
        with pytest.raises(DomainError):
            binomial_moment(3, [1.0, 0.5], 2)

    @given(n=st.integers(0, 30), p=st.floats(0.0, 1.0), r=st.integers(1, 5))
    def test_fixed_n_matches_binomial_law(self, n, p, r):
        want = math.fsum(math.comb(n, k) * p ** k * (1 - p) ** (n - k) * k ** r for k in range(n + 1))
        got = binomial_moment(n, [p ** t for t in range(r + 1)], r)
        assert got == pytest.approx(want, rel=1e-9, abs=1e-12)

    def test_beta_moments(self):
        b = beta_moments(1.0, 1.0, 3)
        assert b[0] == 1.0 and b[1] == pytest.approx(0.5) and b[2] == pytest.approx(1 / 3)
        b = beta_moments(2.5, 4.0, 1)
        assert b[1] == pytest.approx(2.5 / 6.5)

    def test_stirling_reconstruction(self):
        # sum_t S(r, t) (k)_t = k^r
        for k in range(8):
            for r in range(1, 6):
                assert sum(stirling2(r, t) * falling_factorial(k, t) for t in range(r + 1)) == k ** r
