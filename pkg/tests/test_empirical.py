"""Joint types, empirical metrics, and their tail exponents."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vlf.empirical import (
    JointType,
    count_log_table,
    empirical_correlation,
    empirical_mi,
    joint_type,
    tail_exponents,
    type_class_log_bound,
    universal_gaussian_metric,
)
from vlf.errors import VlfError

_paired = st.integers(2, 30).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(0, 2), min_size=n, max_size=n),
        st.lists(st.integers(0, 2), min_size=n, max_size=n),
    )
)


class TestJointType:
    def test_counts_from_known_sequences(self):
        t = joint_type([0, 0, 1, 1, 0], [1, 0, 1, 1, 0])
        np.testing.assert_array_equal(t.counts, [[2, 1], [0, 2]])
        assert t.n == 5

    def test_explicit_alphabet_keeps_zero_rows(self):
        t = joint_type([0, 0], [1, 0], num_x=3, num_y=2)
        assert t.counts.shape == (3, 2)
        assert t.counts[2].sum() == 0

    def test_mismatched_lengths_raise(self):
        with pytest.raises(VlfError):
            joint_type([0, 1], [0])
        with pytest.raises(VlfError):
            joint_type([], [])
        with pytest.raises(VlfError):
            joint_type([0, 3], [0, 0], num_x=2)

    @given(_paired)
    @settings(max_examples=60, deadline=None)
    def test_marginals_sum_to_length(self, xy):
        xn, yn = xy
        t = joint_type(xn, yn, num_x=3, num_y=3)
        assert t.counts.sum() == len(xn)
        np.testing.assert_array_equal(
            t.counts.sum(axis=1), np.bincount(xn, minlength=3)
        )
        np.testing.assert_array_equal(
            t.counts.sum(axis=0), np.bincount(yn, minlength=3)
        )


class TestEmpiricalMi:
    def test_product_type_has_zero_information(self):
        t = JointType(np.array([[4, 4], [4, 4]]), 16)
        assert empirical_mi(t) == pytest.approx(0.0, abs=1e-12)

    def test_diagonal_type_has_full_information(self):
        t = JointType(np.array([[5, 0], [0, 5]]), 10)
        assert empirical_mi(t) == pytest.approx(math.log(2), abs=1e-12)

    def test_matches_plugin_mutual_information(self):
        counts = np.array([[3, 1], [2, 6]])
        t = JointType(counts, 12)
        p = counts / 12.0
        px, py = p.sum(axis=1), p.sum(axis=0)
        direct = sum(
            p[i, j] * math.log(p[i, j] / (px[i] * py[j]))
            for i in range(2)
            for j in range(2)
            if p[i, j] > 0
        )
        assert empirical_mi(t) == pytest.approx(direct, abs=1e-12)

    @given(_paired)
    @settings(max_examples=60, deadline=None)
    def test_nonnegative_and_bounded_by_log_alphabet(self, xy):
        xn, yn = xy
        v = empirical_mi(joint_type(xn, yn, num_x=3, num_y=3))
        assert 0.0 <= v <= math.log(3) + 1e-12

    @given(_paired)
    @settings(max_examples=40, deadline=None)
    def test_invariant_under_symbol_relabeling(self, xy):
        xn, yn = xy
        perm = np.array([2, 0, 1])
        a = empirical_mi(joint_type(xn, yn, num_x=3, num_y=3))
        b = empirical_mi(
            joint_type(perm[np.array(xn)], perm[np.array(yn)], num_x=3, num_y=3)
        )
        assert a == pytest.approx(b, abs=1e-12)

    def test_count_log_identity_reproduces_scaled_information(self):
        # sum c log c over cells - rows - cols + n log n == n * I(type)
        tbl = count_log_table(64)
        counts = np.array([[9, 3], [4, 16]])
        n = counts.sum()
        t = JointType(counts, int(n))
        via_table = (
            tbl[counts].sum()
            - tbl[counts.sum(axis=1)].sum()
            - tbl[counts.sum(axis=0)].sum()
            + tbl[n]
        )
        assert via_table == pytest.approx(n * empirical_mi(t), abs=1e-10)


class TestCountLogTable:
    def test_values_and_zero_convention(self):
        tbl = count_log_table(10)
        assert tbl.shape == (11,)
        assert tbl[0] == 0.0
        assert tbl[1] == 0.0
        assert tbl[3] == pytest.approx(3 * math.log(3))


class TestCorrelationMetric:
    def test_known_correlation(self):
        rho = empirical_correlation([1.0, 0.0], [1.0, 1.0])
        assert rho == pytest.approx(1 / math.sqrt(2), rel=1e-12)

    def test_aligned_sequences_have_unit_correlation(self):
        x = np.array([0.3, -1.2, 2.0])
        assert empirical_correlation(x, 2.5 * x) == pytest.approx(1.0)
        assert universal_gaussian_metric(x, 2.5 * x) == math.inf

    def test_metric_formula(self):
        x = np.array([1.0, 2.0, -1.0, 0.5])
        y = np.array([0.8, 1.1, -1.4, 2.0])
        rho = empirical_correlation(x, y)
        expect = -0.5 * 4 * math.log1p(-rho * rho)
        assert universal_gaussian_metric(x, y) == pytest.approx(expect)

    def test_zero_energy_raises(self):
        with pytest.raises(VlfError):
            empirical_correlation([0.0, 0.0], [1.0, 1.0])


class TestTailExponents:
    def test_known_alphabet_values(self):
        assert tail_exponents(2, 2) == (0.0, 1.0)
        assert tail_exponents(2, 3) == (0.5, 1.5)
        assert tail_exponents(3, 3) == (2.0, 3.0)

    def test_monotone_in_alphabet_size(self):
        k1, d1 = tail_exponents(2, 2)
        k2, d2 = tail_exponents(4, 4)
        assert k2 > k1 and d2 > d1

    def test_degenerate_alphabets_raise(self):
        with pytest.raises(VlfError):
            tail_exponents(1, 2)


class TestTypeClassBound:
    @given(
        st.integers(2, 12),
        st.lists(st.floats(0.05, 1.0), min_size=2, max_size=2),
    )
    @settings(max_examples=40, deadline=None)
    def test_bound_dominates_exact_multinomial_count(self, n, weights):
        # realize an integer composition of n from the weights
        w = np.array(weights)
        k0 = int(round(n * w[0] / w.sum()))
        counts = np.array([k0, n - k0])
        probs = counts / n
        exact = math.lgamma(n + 1) - sum(math.lgamma(c + 1) for c in counts)
        assert type_class_log_bound(probs, n) >= exact - 1e-9
