import numpy as np
import pytest

from models.config import EstimatorConfig
from models.gaussian_dgp import GaussianLinearDGP
from simulate import (
    analytic_casf,
    analytic_distributional_casf,
    analytic_naive_casf,
    monte_carlo,
    sample_discrete,
    sample_gaussian,
)


def test_noiseless_proxies_coincide():
    dataset = sample_gaussian(GaussianLinearDGP(sigma_v=0.0, sigma_z=0.0), 100, seed=1)
    np.testing.assert_array_equal(dataset.v, dataset.z)


def test_outcome_is_noise_around_intercept_without_effects():
    dgp = GaussianLinearDGP(b0=2.0, b1=0.0, b2=0.0, sigma_y=1.5)
    n = 10_000
    dataset = sample_gaussian(dgp, n, seed=2)
    assert abs(dataset.y.mean() - 2.0) < 4 * 1.5 / np.sqrt(n)


def test_seeded_samples_are_bit_identical(gaussian_dgp):
    a = sample_gaussian(gaussian_dgp, 50, seed=3)
    b = sample_gaussian(gaussian_dgp, 50, seed=3)
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(a.v, b.v)


def test_treatment_margin_matches_design(gaussian_dgp):
    n = 40_000
    dataset = sample_gaussian(gaussian_dgp, n, seed=4)
    # Var(X) = alpha^2 + 1 and E[W* | X] has slope alpha / (alpha^2 + 1), seen through V
    assert dataset.x.var() == pytest.approx(2.0, abs=4 * 2.0 * np.sqrt(2.0 / n))
    slope = np.cov(dataset.x[:, 0], dataset.v[:, 0])[0, 1] / dataset.x.var()
    assert slope == pytest.approx(0.5, abs=0.03)


class TestAnalyticCasf:
    def test_reference_point(self, gaussian_dgp):
        assert analytic_casf(gaussian_dgp, 1.0, -1.0) == pytest.approx(1.5)

    def test_no_confounding_without_latent_effect(self):
        dgp = GaussianLinearDGP(b0=1.0, b1=2.0, b2=0.0)
        assert analytic_casf(dgp, 1.0, 5.0) == pytest.approx(3.0)
        assert analytic_casf(dgp, 1.0, -5.0) == pytest.approx(3.0)

    def test_uninformative_treatment(self):
        dgp = GaussianLinearDGP(b0=1.0, b1=2.0, b2=3.0, alpha=0.0)
        assert analytic_casf(dgp, 1.0, 4.0) == pytest.approx(3.0)

    def test_naive_limit(self, gaussian_dgp):
        assert analytic_naive_casf(gaussian_dgp, 1.0, -1.0) == pytest.approx(11.0 / 6.0)

    def test_naive_limit_is_exact_with_perfect_controls(self):
        dgp = GaussianLinearDGP(sigma_v=0.0)
        assert analytic_naive_casf(dgp, 0.3, -0.7) == pytest.approx(analytic_casf(dgp, 0.3, -0.7))

    def test_distributional_median(self, gaussian_dgp):
        assert analytic_distributional_casf(gaussian_dgp, 1.5, 1.0, -1.0) == pytest.approx(0.5)

    def test_against_numerical_integration(self, gaussian_dgp):
        # W* | X = x2 ~ N(slope * x2, 1 / (alpha^2 + 1)); integrate y0(x1, U) over it
        nodes, weights = np.polynomial.hermite_e.hermegauss(40)
        weights = weights / weights.sum()
        for x1, x2 in [(0.0, 0.0), (1.0, -1.0), (-0.5, 2.0)]:
            w = gaussian_dgp.posterior_slope * x2 + np.sqrt(gaussian_dgp.posterior_variance) * nodes
            integral = np.sum(weights * (gaussian_dgp.b0 + gaussian_dgp.b1 * x1 + gaussian_dgp.b2 * w))
            assert analytic_casf(gaussian_dgp, x1, x2) == pytest.approx(integral, abs=1e-3)


class TestDiscreteSampler:
    def test_empirical_pmf_converges(self, small_model):
        n = 100_000
        dataset, w = sample_discrete(small_model, n, seed=5, return_latent=True)
        counts = np.zeros(small_model.joint().shape)
        np.add.at(counts, (w, dataset.x[:, 0].astype(int), dataset.z[:, 0].astype(int), dataset.v[:, 0].astype(int)), 1)
        assert np.max(np.abs(counts / n - small_model.joint())) < 5 / np.sqrt(n)

    def test_noiseless_outcome_equals_structural_mean(self, small_model):
        dataset, w = sample_discrete(small_model, 200, seed=6, noise_sd=0.0, return_latent=True)
        np.testing.assert_array_equal(dataset.y, small_model.mu[dataset.x[:, 0].astype(int), w])

    def test_seeded_reproducibility(self, small_model):
        a = sample_discrete(small_model, 100, seed=7)
        b = sample_discrete(small_model, 100, seed=7)
        np.testing.assert_array_equal(a.y, b.y)
        np.testing.assert_array_equal(a.z, b.z)


def test_single_replication_is_reproducible(gaussian_dgp, quadratic_config):
    first = monte_carlo(gaussian_dgp, quadratic_config, n_list=[200], reps=1, seed=9)
    second = monte_carlo(gaussian_dgp, quadratic_config, n_list=[200], reps=1, seed=9)
    assert first.to_json() == second.to_json()


def test_results_do_not_depend_on_worker_count(gaussian_dgp, quadratic_config):
    serial = monte_carlo(gaussian_dgp, quadratic_config, n_list=[150, 300], reps=3, seed=10, workers=1)
    threaded = monte_carlo(gaussian_dgp, quadratic_config, n_list=[150, 300], reps=3, seed=10, workers=3)
    assert serial.records == threaded.records


def test_discrete_monte_carlo_uses_saturated_defaults(small_model):
    report = monte_carlo(small_model, n_list=[2000], reps=2, seed=11)
    summary = report.summary_for(2000)
    assert summary["failed"] == 0
    assert len(report.records[0]["estimates"]) == 4
    assert summary["median_abs_error"] < 1.0


def test_tiny_samples_count_failed_replications(small_model):
    # n=3 often misses a treatment level, so some target points are unseen
    report = monte_carlo(small_model, n_list=[3], reps=20, seed=12, workers=1)
    summary = report.summary_for(3)
    failed = [r for r in report.records if r["failed"]]
    assert summary["reps"] == 20
    assert summary["failed"] == len(failed) > 0
    assert all(r["error"] for r in failed)


@pytest.mark.slow
def test_consistency_and_naive_bias(gaussian_dgp):
    config = EstimatorConfig.default(1, 1, 1, degree=2)
    report = monte_carlo(gaussian_dgp, config, n_list=[400, 1600, 6400], reps=100, seed=0)
    errors = [report.summary_for(n)["median_abs_error"] for n in (400, 1600, 6400)]
    assert errors[2] <= errors[1] <= errors[0]
    assert errors[2] < 0.6 * errors[0]
    assert errors[2] < report.summary_for(6400)["naive_median_abs_error"]
