"""SPD factorization, solves, and quadratic forms against hand and
brute-force oracles."""

import numpy as np
import pytest

from empbridge import cholesky, quadratic_form_inv, solve_spd
from empbridge.errors import NotPositiveDefinite


class TestCholesky:
    def test_identity(self):
        np.testing.assert_array_equal(cholesky(np.eye(2)), np.eye(2))

    def test_hand_expansion_2x2(self):
        # [[2,0],[1,2]] @ [[2,1],[0,2]] = [[4,2],[2,5]]
        lower = cholesky([[4.0, 2.0], [2.0, 5.0]])
        np.testing.assert_allclose(lower, [[2.0, 0.0], [1.0, 2.0]], atol=1e-14)

    def test_rank_one_rejected(self):
        with pytest.raises(NotPositiveDefinite):
            cholesky([[1.0, 1.0], [1.0, 1.0]])

    def test_negative_definite_rejected(self):
        with pytest.raises(NotPositiveDefinite):
            cholesky([[-1.0, 0.0], [0.0, -1.0]])

    def test_asymmetric_beyond_tolerance_rejected(self):
        with pytest.raises(ValueError, match="asymmetric"):
            cholesky([[4.0, 2.0], [2.1, 5.0]])

    def test_tiny_asymmetry_averaged_away(self):
        a = np.array([[4.0, 2.0 + 1e-13], [2.0, 5.0]])
        lower = cholesky(a)
        np.testing.assert_allclose(lower @ lower.T, [[4.0, 2.0], [2.0, 5.0]], rtol=1e-12)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            cholesky([[np.nan, 0.0], [0.0, 1.0]])

    @pytest.mark.parametrize("size", [1, 2, 5, 10, 25])
    def test_reconstruction_random_spd(self, size):
        rng = np.random.default_rng(size)
        m = rng.standard_normal((size, size))
        a = m.T @ m + size * np.eye(size)
        lower = cholesky(a)
        np.testing.assert_allclose(lower @ lower.T, a, rtol=1e-10)
        assert np.all(np.diag(lower) > 0)


class TestSolveSpd:
    def test_identity(self):
        np.testing.assert_array_equal(
            solve_spd(np.eye(2), [3.0, -1.0]), [3.0, -1.0]
        )

    def test_hand_elimination_2x2(self):
        x = solve_spd([[4.0, 2.0], [2.0, 5.0]], [10.0, 13.0])
        np.testing.assert_allclose(x, [1.5, 2.0], rtol=1e-14)

    def test_scalar(self):
        np.testing.assert_allclose(solve_spd([[2.0]], [6.0]), [3.0])

    def test_propagates_not_positive_definite(self):
        with pytest.raises(NotPositiveDefinite):
            solve_spd([[1.0, 1.0], [1.0, 1.0]], [1.0, 1.0])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            solve_spd(np.eye(3), [1.0, 2.0])

    @pytest.mark.parametrize("size", [2, 7, 20, 50])
    def test_multiply_back_random(self, size):
        rng = np.random.default_rng(100 + size)
        m = rng.standard_normal((size, size))
        a = m.T @ m + size * np.eye(size)
        b = rng.standard_normal(size)
        x = solve_spd(a, b)
        np.testing.assert_allclose(a @ x, b, rtol=1e-8, atol=1e-8)


class TestQuadraticFormInv:
    def test_identity(self):
        assert quadratic_form_inv(np.eye(3), [1.0, 2.0, 2.0]) == pytest.approx(9.0)

    def test_scalar(self):
        assert quadratic_form_inv([[4.0]], [2.0]) == pytest.approx(1.0)

    def test_matches_explicit_inverse_2x2(self):
        a = np.array([[4.0, 2.0], [2.0, 5.0]])
        v = np.array([2.0, 1.0])
        oracle = v @ np.linalg.inv(a) @ v
        assert quadratic_form_inv(a, v) == pytest.approx(oracle, abs=1e-12)

    def test_zero_vector_gives_zero(self):
        a = np.array([[4.0, 2.0], [2.0, 5.0]])
        assert quadratic_form_inv(a, np.zeros(2)) == 0.0

    @pytest.mark.parametrize("size", [1, 2, 3, 5, 8, 10])
    def test_nonnegative_and_matches_inverse_oracle(self, size):
        rng = np.random.default_rng(size + 7)
        for _ in range(20):
            m = rng.standard_normal((size, size))
            a = m.T @ m + size * np.eye(size)
            v = rng.standard_normal(size)
            value = quadratic_form_inv(a, v)
            assert value >= 0.0
            oracle = v @ np.linalg.inv(a) @ v
            np.testing.assert_allclose(value, oracle, rtol=1e-10, atol=1e-12)
