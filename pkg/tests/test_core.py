"""Summaries, scores, the decision rule, and scalar/matrix primitives."""

import numpy as np
import pytest

from eddr.core import (
    PI1,
    PI2,
    LabeledSample,
    NormalParams,
    TwoSampleSummary,
    cholesky,
    classify,
    discriminant_score,
    oracle_score,
    pooled_summary,
    std_normal_cdf,
    std_normal_pdf,
    std_normal_quantile,
    sym_sqrt,
)
from eddr.exceptions import DimensionError, NotPositiveDefiniteError

from conftest import random_orthogonal, random_spd

# high-precision references (30-digit arithmetic)
PHI_M125 = 0.105649773666855257688772764026
Z_975 = 1.95996398454005423552459443052


def summary_of(x1, x2):
    return pooled_summary(LabeledSample(np.asarray(x1, float), 1),
                          LabeledSample(np.asarray(x2, float), 2))


class TestPooledSummary:
    def test_identical_rows_give_zero_scatter(self):
        s = summary_of([[1.0, 2.0], [1.0, 2.0]], [[3.0, -1.0], [3.0, -1.0]])
        assert np.all(s.s == 0.0)

    def test_scalar_hand_example(self):
        # groups {0, 2} and {1, 3}: means 1 and 2, pooled scatter (2+2)/2
        s = summary_of([[0.0], [2.0]], [[1.0], [3.0]])
        assert s.xbar1[0] == pytest.approx(1.0)
        assert s.xbar2[0] == pytest.approx(2.0)
        assert s.s[0, 0] == pytest.approx(2.0)
        assert s.n == 2

    def test_column_permutation_equivariance(self, rng):
        x1 = rng.standard_normal((6, 4))
        x2 = rng.standard_normal((5, 4))
        perm = [2, 0, 3, 1]
        s = summary_of(x1, x2)
        sp = summary_of(x1[:, perm], x2[:, perm])
        assert np.allclose(sp.xbar1, s.xbar1[perm])
        assert np.allclose(sp.s, s.s[np.ix_(perm, perm)])

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionError):
            summary_of(rng.standard_normal((4, 3)), rng.standard_normal((4, 2)))

    def test_too_few_observations(self):
        with pytest.raises(DimensionError):
            LabeledSample(np.zeros((1, 3)), 1)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            LabeledSample(np.array([[1.0, np.inf], [0.0, 1.0]]), 1)

    def test_bad_group_label(self):
        with pytest.raises(ValueError):
            LabeledSample(np.zeros((2, 2)), 3)


class TestSummaryValidation:
    def test_asymmetric_covariance_rejected(self):
        s = np.array([[1.0, 0.5], [0.2, 1.0]])
        with pytest.raises(DimensionError):
            TwoSampleSummary(np.zeros(2), np.zeros(2), s, 3, 3)

    def test_indefinite_covariance_rejected(self):
        s = np.array([[1.0, 0.0], [0.0, -0.5]])
        with pytest.raises(NotPositiveDefiniteError):
            TwoSampleSummary(np.zeros(2), np.zeros(2), s, 3, 3)

    def test_zero_matrix_accepted(self):
        s = TwoSampleSummary(np.zeros(2), np.zeros(2), np.zeros((2, 2)), 3, 3)
        assert s.n == 4

    def test_singular_psd_accepted(self, rng):
        v = rng.standard_normal(5)
        s = TwoSampleSummary(np.zeros(5), np.zeros(5), np.outer(v, v), 3, 3)
        assert s.p == 5


class TestScores:
    def test_oracle_midpoint(self, rng):
        mu1 = rng.standard_normal(4)
        mu2 = rng.standard_normal(4)
        eye = np.eye(4)
        x = (mu1 + mu2) / 2
        val = oracle_score(x, NormalParams(mu1, eye), NormalParams(mu2, eye))
        assert val == pytest.approx(0.0, abs=1e-12)

    def test_oracle_at_centroid(self, rng):
        mu1 = rng.standard_normal(4)
        mu2 = rng.standard_normal(4)
        eye = np.eye(4)
        val = oracle_score(mu1, NormalParams(mu1, eye), NormalParams(mu2, eye))
        assert val == pytest.approx(float((mu1 - mu2) @ (mu1 - mu2)))

    def test_oracle_scalar_example(self):
        one = np.eye(1)
        val = oracle_score([0.5], NormalParams([1.0], one), NormalParams([-1.0], one))
        assert val == pytest.approx(2.0)

    def test_discriminant_balanced_midpoint(self):
        s = TwoSampleSummary(np.array([1.0, 0.0]), np.array([-1.0, 0.0]), np.eye(2), 5, 5)
        assert discriminant_score([0.0, 3.7], s) == pytest.approx(0.0, abs=1e-12)

    def test_discriminant_unbalanced_hand_example(self):
        s = TwoSampleSummary(np.array([1.0, 0.0]), np.array([-1.0, 0.0]), np.eye(2), 2, 1)
        # 1 - 1 - (1/2) * tr(I_2) = -1
        assert discriminant_score([0.0, 0.0], s) == pytest.approx(-1.0)

    def test_translation_invariance(self, rng):
        x = rng.standard_normal(3)
        shift = rng.standard_normal(3)
        cov = random_spd(3, rng)
        s = TwoSampleSummary(rng.standard_normal(3), rng.standard_normal(3), cov, 4, 7)
        s2 = TwoSampleSummary(s.xbar1 + shift, s.xbar2 + shift, cov, 4, 7)
        assert discriminant_score(x + shift, s2) == pytest.approx(
            discriminant_score(x, s), rel=1e-9
        )

    def test_rotation_invariance(self, rng):
        q = random_orthogonal(5, rng)
        x = rng.standard_normal(5)
        cov = random_spd(5, rng)
        s = TwoSampleSummary(rng.standard_normal(5), rng.standard_normal(5), cov, 6, 9)
        s2 = TwoSampleSummary(q @ s.xbar1, q @ s.xbar2, q @ cov @ q.T, 6, 9)
        assert discriminant_score(q @ x, s2) == pytest.approx(
            discriminant_score(x, s), rel=1e-9
        )

    def test_balanced_equals_oracle_at_sample_means(self, rng):
        cov = random_spd(3, rng)
        s = TwoSampleSummary(rng.standard_normal(3), rng.standard_normal(3), cov, 6, 6)
        x = rng.standard_normal(3)
        oracle = oracle_score(x, NormalParams(s.xbar1, np.eye(3)), NormalParams(s.xbar2, np.eye(3)))
        assert discriminant_score(x, s) == pytest.approx(oracle, rel=1e-12)


class TestClassify:
    def setup_method(self):
        self.s = TwoSampleSummary(np.array([1.0]), np.array([-1.0]), np.eye(1), 5, 5)

    def test_boundary_goes_to_group_two(self):
        # score at the midpoint is 0; with c = 0 the tie goes to group 2
        assert classify([0.0], self.s, 0.0) == PI2

    def test_clear_group_one(self):
        # score(1.5) = |1.5+1|^2 - |1.5-1|^2 = 6 > 2c
        assert classify([1.5], self.s, 1.0) == PI1

    def test_threshold_is_doubled(self):
        # score(x) = 4x; score = 1.9 at x = 0.475, below the 2c = 2 threshold
        assert discriminant_score([0.475], self.s) == pytest.approx(1.9)
        assert classify([0.475], self.s, 1.0) == PI2
        assert classify([0.525], self.s, 1.0) == PI1

    def test_monotone_in_cutoff(self, rng):
        xs = rng.standard_normal((20, 1))
        for x in xs:
            labels = [classify(x, self.s, c) for c in np.linspace(-3, 3, 13)]
            # raising c can only move points from group 1 to group 2
            assert sorted(labels) == labels

    def test_nonfinite_cutoff_rejected(self):
        with pytest.raises(ValueError):
            classify([0.0], self.s, np.nan)


class TestNormalCdf:
    def test_at_zero(self):
        assert std_normal_cdf(0.0) == pytest.approx(0.5, abs=1e-15)

    def test_symmetry(self, rng):
        for x in rng.standard_normal(50) * 3:
            assert std_normal_cdf(x) + std_normal_cdf(-x) == pytest.approx(1.0, abs=1e-14)

    def test_derived_value(self):
        assert std_normal_cdf(1.959964) == pytest.approx(0.975, abs=1e-6)
        assert std_normal_cdf(-1.25) == pytest.approx(PHI_M125, abs=1e-12)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            std_normal_cdf(float("inf"))

    def test_pdf_matches_cdf_derivative(self):
        h = 1e-6
        for x in (-2.0, -0.3, 0.0, 1.1, 2.5):
            fd = (std_normal_cdf(x + h) - std_normal_cdf(x - h)) / (2 * h)
            assert std_normal_pdf(x) == pytest.approx(fd, rel=1e-8)


class TestNormalQuantile:
    def test_median(self):
        assert std_normal_quantile(0.5) == 0.0

    def test_round_trip(self):
        for u in np.arange(0.01, 1.0, 0.01):
            assert std_normal_cdf(std_normal_quantile(u)) == pytest.approx(u, abs=1e-10)

    def test_derived_value(self):
        assert std_normal_quantile(0.975) == pytest.approx(Z_975, abs=1e-6)

    def test_accuracy(self):
        for u in (1e-6, 0.001, 0.3, 0.999, 1 - 1e-6):
            z = std_normal_quantile(u)
            assert abs(std_normal_cdf(z) - u) <= 1e-12

    @pytest.mark.parametrize("u", [0.0, 1.0, -0.1, 1.1])
    def test_domain(self, u):
        with pytest.raises(ValueError):
            std_normal_quantile(u)


class TestFactorizations:
    def test_cholesky_identity(self):
        assert np.allclose(cholesky(np.eye(3)), np.eye(3))

    def test_cholesky_diagonal(self):
        assert np.allclose(cholesky(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))

    def test_cholesky_reconstruction(self, rng):
        a = random_spd(8, rng)
        l_factor = cholesky(a)
        assert np.allclose(l_factor @ l_factor.T, a, rtol=1e-10, atol=1e-12)
        assert np.allclose(np.triu(l_factor, 1), 0.0)

    def test_cholesky_rejects_indefinite(self):
        with pytest.raises(NotPositiveDefiniteError):
            cholesky(np.diag([1.0, -1.0]))

    def test_sym_sqrt_identity(self):
        assert np.allclose(sym_sqrt(np.eye(4)), np.eye(4))

    def test_sym_sqrt_diagonal(self):
        assert np.allclose(sym_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))

    def test_sym_sqrt_reconstruction(self, rng):
        a = random_spd(7, rng)
        root = sym_sqrt(a)
        assert np.allclose(root, root.T)
        assert np.allclose(root @ root, a, rtol=1e-8, atol=1e-10)

    def test_sym_sqrt_rejects_indefinite(self):
        with pytest.raises(NotPositiveDefiniteError):
            sym_sqrt(np.diag([1.0, -0.5]))

    def test_sym_sqrt_allows_singular(self, rng):
        v = rng.standard_normal(4)
        a = np.outer(v, v)
        root = sym_sqrt(a)
        assert np.allclose(root @ root, a, atol=1e-10)


class TestNormalParams:
    def test_requires_strict_pd(self):
        with pytest.raises(NotPositiveDefiniteError):
            NormalParams(np.zeros(2), np.zeros((2, 2)))

    def test_dimension_check(self):
        with pytest.raises(DimensionError):
            NormalParams(np.zeros(3), np.eye(2))
