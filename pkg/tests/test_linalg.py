"""SVD oracle, truncation, tail bounds, norms, synthetic generators."""

import numpy as np
import numpy.testing as npt
import pytest

from maco.linalg import (best_rank_approx, fro_dist, fro_norm,
                         random_low_rank, svd, tail_bound)

# reference 3x3 instance used throughout the docs and the demo command
X3 = np.array([[68.16, 78.12, 24.04],
               [78.12, 90.09, 30.03],
               [24.04, 30.03, 20.01]])
X3_SIGMA = (167.9945, 10.2553, 0.0102)
X3_RANK2 = np.array([[68.1546, 78.1250, 24.0389],
                     [78.1250, 90.0853, 30.0310],
                     [24.0389, 30.0310, 20.0098]])


class TestSvd:
    def test_reference_singular_values(self):
        res = svd(X3)
        npt.assert_allclose(res.sigma, X3_SIGMA, atol=1e-3)

    def test_identity(self):
        res = svd(np.eye(4))
        npt.assert_allclose(res.sigma, np.ones(4), atol=1e-12)
        npt.assert_allclose(res.truncate(4), np.eye(4), atol=1e-12)

    def test_gram_eigenvalue_oracle(self, rng):
        for _ in range(10):
            m, n = int(rng.integers(2, 9)), int(rng.integers(2, 9))
            A = rng.standard_normal((m, n))
            sigma = svd(A).sigma
            gram = np.sqrt(np.maximum(np.linalg.eigvalsh(A.T @ A), 0.0))
            npt.assert_allclose(sigma, np.sort(gram)[::-1][:len(sigma)],
                                atol=1e-8)

    def test_reconstruction_and_orthonormality(self, rng):
        for _ in range(10):
            m, n = int(rng.integers(2, 10)), int(rng.integers(2, 10))
            A = rng.standard_normal((m, n))
            res = svd(A)
            k = len(res.sigma)
            npt.assert_allclose((res.U * res.sigma) @ res.Vt, A, atol=1e-8)
            npt.assert_allclose(res.U.T @ res.U, np.eye(k), atol=1e-8)
            npt.assert_allclose(res.Vt @ res.Vt.T, np.eye(k), atol=1e-8)

    def test_sigma_sorted_nonnegative(self, rng):
        A = rng.standard_normal((6, 4))
        s = svd(A).sigma
        assert np.all(s >= 0)
        assert np.all(np.diff(s) <= 1e-12)

    def test_deterministic_orientation(self, rng):
        A = rng.standard_normal((5, 5))
        r1, r2 = svd(A), svd(A.copy())
        npt.assert_array_equal(r1.U, r2.U)
        npt.assert_array_equal(r1.Vt, r2.Vt)
        # canonical orientation: leading nonzero of each left vector >= 0
        for col in r1.U.T:
            nz = col[np.abs(col) > 1e-12]
            if nz.size:
                assert nz[0] > 0

    @pytest.mark.parametrize("bad", [
        np.empty((0, 3)), np.ones(3), np.array([[1.0, np.nan]]),
        np.array([[np.inf, 1.0]])])
    def test_invalid_input_rejected(self, bad):
        with pytest.raises(ValueError):
            svd(bad)


class TestBestRankApprox:
    def test_reference_rank2(self):
        npt.assert_allclose(best_rank_approx(X3, 2), X3_RANK2, atol=1e-3)

    def test_full_rank_is_identity_map(self, rng):
        A = rng.standard_normal((5, 7))
        npt.assert_allclose(best_rank_approx(A, 5), A, atol=1e-10)

    def test_truncation_error_equals_tail_energy(self, rng):
        A = rng.standard_normal((8, 6))
        s = svd(A).sigma
        for r in range(1, 6):
            err = fro_dist(A, best_rank_approx(A, r))
            npt.assert_allclose(err, np.sqrt(np.sum(s[r:] ** 2)),
                                atol=1e-10)

    def test_beats_random_rank_r_candidates(self, rng):
        A = rng.standard_normal((7, 7))
        best = fro_dist(A, best_rank_approx(A, 2))
        for _ in range(20):
            cand = rng.standard_normal((7, 2)) @ rng.standard_normal((2, 7))
            assert best <= fro_dist(A, cand) + 1e-12

    def test_idempotent(self, rng):
        A = rng.standard_normal((6, 5))
        Y = best_rank_approx(A, 3)
        npt.assert_allclose(best_rank_approx(Y, 3), Y, atol=1e-9)

    @pytest.mark.parametrize("r", [0, -1, 4, 100])
    def test_rank_out_of_range_rejected(self, r):
        with pytest.raises(ValueError):
            best_rank_approx(np.ones((3, 5)), r)


class TestTailBound:
    def test_reference_value(self):
        assert tail_bound(np.array(X3_SIGMA), 2) == pytest.approx(0.0102,
                                                                  abs=1e-4)

    def test_zero_rank_sums_all(self):
        assert tail_bound([3.0, 2.0, 1.0], 0) == pytest.approx(6.0)

    def test_rank_at_or_past_length_is_zero(self):
        assert tail_bound([3.0, 2.0], 2) == 0.0
        assert tail_bound([3.0, 2.0], 5) == 0.0

    def test_negative_rank_rejected(self):
        with pytest.raises(ValueError):
            tail_bound([1.0], -1)

    @pytest.mark.parametrize("bad", [
        [1.0, -0.5], [1.0, 2.0], [[1.0, 0.5]], [np.nan, 0.0]])
    def test_invalid_spectrum_rejected(self, bad):
        with pytest.raises(ValueError):
            tail_bound(np.asarray(bad, dtype=float), 1)

    def test_elementwise_truncation_bound(self, rng):
        # every entry of the truncation residual is bounded by the tail sum
        for _ in range(10):
            m, n = int(rng.integers(3, 9)), int(rng.integers(3, 9))
            A = rng.standard_normal((m, n))
            s = svd(A).sigma
            for r in range(1, min(m, n)):
                gap = np.max(np.abs(A - best_rank_approx(A, r)))
                assert gap <= tail_bound(s, r) + 1e-8


class TestNorms:
    def test_fro_norm_345(self):
        assert fro_norm(np.array([[3.0, 4.0]])) == pytest.approx(5.0)

    def test_manual_oracle(self, rng):
        A = rng.standard_normal((4, 6))
        manual = np.sqrt(float(np.sum(A * A)))
        npt.assert_allclose(fro_norm(A), manual, rtol=1e-12)
        B = rng.standard_normal((4, 6))
        npt.assert_allclose(fro_dist(A, B),
                            np.sqrt(float(np.sum((A - B) ** 2))),
                            rtol=1e-12)

    def test_dist_zero_on_equal(self, rng):
        A = rng.standard_normal((3, 3))
        assert fro_dist(A, A.copy()) == 0.0


class TestRandomLowRank:
    def test_deterministic(self):
        A = random_low_rank(6, 5, 2, seed=7)
        B = random_low_rank(6, 5, 2, seed=7)
        npt.assert_array_equal(A, B)
        C = random_low_rank(6, 5, 2, seed=8)
        assert not np.array_equal(A, C)

    def test_exact_rank(self):
        A = random_low_rank(10, 12, 3, seed=1)
        s = svd(A).sigma
        assert s[2] > 1e-8
        npt.assert_allclose(s[3:], 0.0, atol=1e-10)

    def test_scale_is_linear(self):
        A = random_low_rank(4, 4, 2, seed=3)
        B = random_low_rank(4, 4, 2, seed=3, scale=2.5)
        npt.assert_allclose(B, 2.5 * A, rtol=1e-12)

    def test_shape(self):
        assert random_low_rank(3, 7, 2, seed=0).shape == (3, 7)
