import numpy as np
import pytest
from numpy.testing import assert_allclose

from errors import DataError, SingularSystemError
from ridge import effective_dof, ridge_fit, ridge_fit_from_moments, ridge_predict


def test_intercept_only_recovers_the_mean():
    y = np.array([1.0, 2.0, 6.0])
    fit = ridge_fit(np.ones((3, 1)), y, lam=0.0)
    assert_allclose(fit.coefficients, [[3.0]], atol=1e-10)


def test_hand_computed_shrinkage():
    # (1/n) x'x = 1 and (1/n) x'y = 1, so the coefficient is 1 / (1 + lam)
    fit = ridge_fit([[1.0], [-1.0]], [1.0, -1.0], lam=1.0)
    assert_allclose(fit.coefficients, [[0.5]], atol=1e-10)


def test_residuals_orthogonal_to_features_without_penalty():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((60, 4))
    y = rng.standard_normal((60, 2))
    fit = ridge_fit(x, y, lam=0.0)
    residual = y - ridge_predict(fit, x)
    assert_allclose(x.T @ residual, 0.0, atol=1e-10)


def test_matches_eigendecomposition_on_random_instances():
    rng = np.random.default_rng(1)
    for _ in range(50):
        n, p, q = rng.integers(20, 80), rng.integers(1, 6), rng.integers(1, 3)
        x = rng.standard_normal((n, p))
        y = rng.standard_normal((n, q))
        lam = float(rng.uniform(0.0, 2.0))
        gram = x.T @ x / n
        eigvals, eigvecs = np.linalg.eigh(gram)
        expected = eigvecs @ np.diag(1.0 / (eigvals + lam)) @ eigvecs.T @ (x.T @ y / n)
        assert_allclose(ridge_fit(x, y, lam).coefficients, expected, atol=1e-10)


def test_larger_penalty_shrinks_coefficients():
    rng = np.random.default_rng(2)
    for _ in range(20):
        n, p, q = rng.integers(10, 60), rng.integers(1, 8), rng.integers(1, 3)
        x = rng.standard_normal((n, p))
        y = rng.standard_normal((n, q))
        small, large = np.sort(rng.uniform(0.0, 5.0, size=2))
        norm_small = np.linalg.norm(ridge_fit(x, y, small).coefficients)
        norm_large = np.linalg.norm(ridge_fit(x, y, large).coefficients)
        assert norm_large <= norm_small * (1 + 1e-10)


def test_huge_penalty_sends_coefficients_to_zero():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((50, 5))
    y = rng.standard_normal((50, 2))
    assert np.linalg.norm(ridge_fit(x, y, 1e12).coefficients) < 1e-6


def test_unpenalized_intercept_keeps_constant_outcome():
    x = np.column_stack([np.ones(5), np.arange(5.0) - 2.0])
    fit = ridge_fit(x, np.full(5, 7.0), lam=10.0, penalize_mask=[False, True])
    assert_allclose(fit.coefficients[:, 0], [7.0, 0.0], atol=1e-12)


def test_rank_deficient_gram_raises_at_zero_penalty():
    x = np.column_stack([np.arange(6.0), np.arange(6.0)])
    with pytest.raises(SingularSystemError) as e:
        ridge_fit(x, np.arange(6.0), lam=0.0, context="unit test")
    assert e.value.rank == 1
    assert e.value.size == 2


def test_pseudo_inverse_fallback_gives_minimum_norm_solution():
    x = np.column_stack([np.arange(6.0), np.arange(6.0)])
    y = 2.0 * np.arange(6.0)
    fit = ridge_fit(x, y, lam=0.0, allow_pseudo_inverse=True)
    assert fit.pseudo_inverse
    assert_allclose(fit.coefficients[:, 0], np.linalg.pinv(x) @ y, atol=1e-10)


def test_positive_penalty_regularizes_collinear_design():
    x = np.column_stack([np.arange(6.0), np.arange(6.0)])
    fit = ridge_fit(x, np.arange(6.0), lam=0.1)
    assert_allclose(fit.coefficients[0], fit.coefficients[1])


def test_moments_and_rows_agree():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((40, 3))
    y = rng.standard_normal(40)
    direct = ridge_fit(x, y, 0.3)
    from_moments = ridge_fit_from_moments(x.T @ x / 40, x.T @ y / 40, 40, 0.3)
    assert_allclose(direct.coefficients, from_moments.coefficients, atol=1e-12)


def test_effective_dof():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((50, 3))
    assert effective_dof(ridge_fit(x, rng.standard_normal(50), 0.0)) == pytest.approx(3.0)
    assert effective_dof(ridge_fit(x, rng.standard_normal(50), 1e6)) < 1e-3


@pytest.mark.parametrize("lam", [-1.0, np.inf, np.nan])
def test_invalid_penalty_rejected(lam):
    with pytest.raises(DataError):
        ridge_fit(np.ones((3, 1)), np.ones(3), lam)


def test_row_mismatch_rejected():
    with pytest.raises(DataError):
        ridge_fit(np.ones((3, 1)), np.ones(4), 0.1)
