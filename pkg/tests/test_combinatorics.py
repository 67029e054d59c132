import itertools
import math

import pytest
from hypothesis import given, strategies as st

from pdpart.combinatorics import (
    falling_factorial,
    gen_binom,
    log_binom_array,
    log_gen_binom,
    log_rising_factorial,
    noncentral_stirling2,
    rising_factorial,
    stirling2,
    stirling2_row,
)
from pdpart.errors import DomainError


def _set_partitions_by_blocks(n):
    """Count set partitions of {0..n-1} by number of blocks via restricted growth strings."""
    counts = [0] * (n + 1)
    if n == 0:
        counts[0] = 1
        return counts
    for rgs in itertools.product(range(n), repeat=n):
        if rgs[0] != 0:
            continue
        ok, top = True, 0
        for v in rgs[1:]:
            if v > top + 1:
                ok = False
                break
            top = max(top, v)
        if ok:
            counts[top + 1] += 1
    return counts


def _bell_triangle(n_max):
    bells, row = [1], [1]
    for _ in range(n_max):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
        bells.append(row[0])
    return bells


class TestFactorials:
    def test_examples(self):
        assert rising_factorial(2, 3, 1) == 24
        assert rising_factorial(0.7, 0, 1) == 1
        assert rising_factorial(0.5, 2, 1) == pytest.approx(0.75, rel=1e-15)
        assert falling_factorial(5, 2) == 20
        assert falling_factorial(1.234, 0) == 1
        assert falling_factorial(3, 4) == 0

    def test_falling_is_rising_with_negative_step(self):
        for c in (0.3, 4.0, 7.5):
            for j in range(6):
                assert falling_factorial(c, j) == pytest.approx(rising_factorial(c, j, -1.0), rel=1e-14)

    def test_log_variant_sign_and_zero(self):
        s, v = log_rising_factorial(-0.5, 3)  # (-0.5)(0.5)(1.5)
        assert s == -1 and math.exp(v) == pytest.approx(0.375, rel=1e-14)
        s, v = log_rising_factorial(-2.0, 4)
        assert s == 0 and v == -math.inf
        s, v = log_rising_factorial(3.0, 200)
        assert s == 1 and v == pytest.approx(math.lgamma(203) - math.lgamma(3), rel=1e-13)

    @given(a=st.floats(0.05, 20), b=st.floats(0.05, 3), j=st.integers(0, 15), m=st.integers(0, 15))
    def test_split_property(self, a, b, j, m):
        lhs = rising_factorial(a, j, b) * rising_factorial(a + j * b, m, b)
        rhs = rising_factorial(a, j + m, b)
        assert lhs == pytest.approx(rhs, rel=1e-12)


class TestStirling:
    def test_examples(self):
        assert stirling2(3, 2) == 3
        assert stirling2(4, 2) == 7
        assert stirling2(0, 0) == 1

    @pytest.mark.parametrize("n", range(0, 8))
    def test_against_set_partition_enumeration(self, n):
        assert list(stirling2_row(n)) == _set_partitions_by_blocks(n)

    def test_row_sums_are_bell_numbers(self):
        bells = _bell_triangle(20)
        for n in range(21):
            assert sum(stirling2_row(n)) == bells[n]

    def test_exact_integers_at_the_top(self):
        assert isinstance(stirling2(64, 32), int)
        assert stirling2(64, 63) == math.comb(64, 2)

    @pytest.mark.parametrize("n,k", [(65, 3), (3, 4), (-1, 0)])
    def test_out_of_range(self, n, k):
        with pytest.raises(DomainError):
            stirling2(n, k)


class TestNoncentralStirling:
    def test_examples(self):
        for n in range(7):
            for k in range(n + 1):
                assert noncentral_stirling2(n, k, 0.0) == stirling2(n, k)
        assert noncentral_stirling2(1, 1, 2.0) == 1
        assert noncentral_stirling2(2, 1, 2.0) == 5

    @pytest.mark.parametrize("a", [0.5, 1.0, 2.5])
    def test_polynomial_identity(self, a):
        for n in range(13):
            for x in range(4):
                lhs = math.fsum(noncentral_stirling2(n, k, a) * falling_factorial(x, k) for k in range(n + 1))
                assert lhs == pytest.approx((x + a) ** n, rel=1e-12, abs=1e-12)

    def test_k_above_n(self):
        with pytest.raises(DomainError):
            noncentral_stirling2(2, 3, 1.0)


class TestGeneralizedBinomial:
    def test_examples(self):
        assert log_gen_binom(5, 2) == pytest.approx(math.log(10), rel=1e-15)
        assert log_gen_binom(2.5, 2) == pytest.approx(math.log(1.875), rel=1e-15)
        assert log_gen_binom(3.7, 0) == 0.0

    def test_nonpositive_signalled(self):
        with pytest.raises(DomainError):
            log_gen_binom(1.0, 2)  # C(1, 2) = 0
        with pytest.raises(DomainError):
            log_gen_binom(0.5, 2)  # 0.5 * (-0.5) / 2 < 0
        assert gen_binom(0.5, 2) == pytest.approx(-0.125)

    @given(k=st.integers(0, 50), frac=st.floats(0.0, 100.0))
    def test_matches_direct_product(self, k, frac):
        x = k + frac
        direct = math.prod((x - i) / (i + 1) for i in range(k))
        assert math.exp(log_gen_binom(x, k)) == pytest.approx(direct, rel=1e-12)

    def test_array_form(self):
        import numpy as np

        x = np.array([5.0, 7.25, 40.5, 120.0])
        got = log_binom_array(x, 3)
        want = [log_gen_binom(v, 3) for v in x]
        assert np.allclose(got, want, rtol=1e-13)
