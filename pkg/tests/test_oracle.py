import numpy as np
import pytest

import oracle
from conftest import identity_channel_model
from errors import AbsoluteContinuityError, ConfigError, IdentificationError
from models.discrete_model import DiscreteModel
from simulate import sample_discrete


def random_models(count, seed=0):
    rng = np.random.default_rng(seed)
    models = []
    while len(models) < count:
        nw = int(rng.choice([2, 3]))
        model = DiscreteModel.generate(rng, nw=nw, nx=int(rng.choice([2, 3])), nz=nw + 1, nv=nw + 1)
        if oracle._fully_complete(model):
            models.append(model)
    return models


class TestTrueCasf:
    def test_constant_structural_mean(self, small_model):
        model = DiscreteModel(
            p_w=small_model.p_w,
            p_xz_given_w=small_model.p_xz_given_w,
            p_v_given_w=small_model.p_v_given_w,
            mu=np.full((2, 2), 3.0),
        )
        for x1 in range(2):
            for x2 in range(2):
                assert oracle.true_casf(model, x1, x2) == pytest.approx(3.0)

    def test_hand_computed_backdoor_sum(self, perfect_proxy_model):
        # p(w | x=1) = (0.3*0.4, 0.7*0.8) / p(x=1) = (0.12, 0.56) / 0.68
        expected = (1.0 * 0.12 + 3.0 * 0.56) / 0.68
        assert oracle.true_casf(perfect_proxy_model, 0, 1) == pytest.approx(expected)

    def test_matches_simulated_structural_means(self, small_model):
        dataset, w = sample_discrete(small_model, 200_000, seed=5, return_latent=True)
        at_x2 = dataset.x[:, 0] == 1.0
        draws = small_model.mu[0, w[at_x2]]
        se = draws.std() / np.sqrt(len(draws))
        assert abs(draws.mean() - oracle.true_casf(small_model, 0, 1)) < 3 * se + 1e-12


class TestGammaRoute:
    def test_perfect_proxies_recover_structural_means(self, perfect_proxy_model):
        for x in range(2):
            np.testing.assert_allclose(oracle.solve_gamma(perfect_proxy_model, x), perfect_proxy_model.mu[x], atol=1e-10)
        assert oracle.casf_via_gamma(perfect_proxy_model, 0, 1) == pytest.approx(
            oracle.true_casf(perfect_proxy_model, 0, 1), abs=1e-10
        )

    def test_random_complete_models(self):
        for model in random_models(30, seed=1):
            for x1 in range(model.nx):
                for x2 in range(model.nx):
                    assert abs(oracle.casf_via_gamma(model, x1, x2) - oracle.true_casf(model, x1, x2)) < 1e-8

    def test_rank_deficient_proxy_raises(self, small_model):
        degenerate = DiscreteModel(
            p_w=small_model.p_w,
            p_xz_given_w=small_model.p_xz_given_w,
            p_v_given_w=np.array([[0.5, 0.5], [0.5, 0.5]]),
            mu=small_model.mu,
        )
        with pytest.raises(IdentificationError):
            oracle.solve_gamma(degenerate, 0)


class TestPhiRoute:
    def test_same_treatment_gives_unit_ratio(self, small_model):
        law = small_model.observable_law()
        phi = oracle.solve_phi(small_model, 0, 0)
        np.testing.assert_allclose(phi, 1.0, atol=1e-10)
        expected = float(np.sum(law.ey_xz[0] * law.p_z_given_x(0)))
        assert oracle.casf_via_phi(small_model, 0, 0) == pytest.approx(expected, abs=1e-10)
        assert oracle.casf_via_phi(small_model, 0, 0) == pytest.approx(oracle.true_casf(small_model, 0, 0), abs=1e-10)

    def test_random_complete_models(self):
        for model in random_models(30, seed=2):
            for x1 in range(model.nx):
                for x2 in range(model.nx):
                    assert abs(oracle.casf_via_phi(model, x1, x2) - oracle.true_casf(model, x1, x2)) < 1e-8

    def test_support_violation_raises(self):
        # X reveals W* and V copies it, so p(v | x=0) puts no mass where p(v | x=1) does
        model = identity_channel_model(p_w=[0.5, 0.5], p_x_given_w=[[1.0, 0.0], [0.0, 1.0]], mu=[[0.0, 1.0], [2.0, 3.0]])
        with pytest.raises(AbsoluteContinuityError):
            oracle.solve_phi(model, 0, 1)
        with pytest.raises(AbsoluteContinuityError):
            oracle.picard_constant(model, 0, 1)


class TestCompleteness:
    def test_identity_channel_passes(self, perfect_proxy_model):
        report = oracle.completeness_check(perfect_proxy_model, 0, "Z")
        assert report == {"rank": 2, "required": 2, "pass": True}

    def test_duplicated_conditionals_fail(self, small_model):
        # both z values carry the same information about W*
        p_xz = np.array([[[0.3, 0.3], [0.2, 0.2]], [[0.1, 0.1], [0.4, 0.4]]])
        model = DiscreteModel(p_w=small_model.p_w, p_xz_given_w=p_xz, p_v_given_w=small_model.p_v_given_w, mu=small_model.mu)
        report = oracle.completeness_check(model, 0, "Z")
        assert report["rank"] == 1
        assert not report["pass"]

    def test_fewer_proxy_values_than_latent_values_fail(self):
        model = DiscreteModel.generate(np.random.default_rng(0), nw=3, nx=2, nz=2, nv=2)
        assert not oracle.completeness_check(model, 0, "Z")["pass"]
        assert not oracle.completeness_check(model, 0, "V")["pass"]

    def test_unknown_side(self, small_model):
        with pytest.raises(ConfigError):
            oracle.completeness_check(small_model, 0, "W")


@pytest.mark.parametrize("sizes", [{"nw": 0}, {"nx": 0}, {"nv": -1}])
def test_random_model_needs_positive_sizes(sizes):
    shape = {"nw": 2, "nx": 2, "nz": 3, "nv": 3, **sizes}
    with pytest.raises(ConfigError, match="sizes"):
        DiscreteModel.generate(np.random.default_rng(0), **shape)


class TestPicard:
    def test_same_treatment_constant_is_one(self, small_model):
        assert oracle.picard_constant(small_model, 1, 1) == pytest.approx(1.0, abs=1e-10)

    def test_perfect_proxies_give_chi_square_sum(self, perfect_proxy_model):
        law = perfect_proxy_model.observable_law()
        p1, p2 = law.p_v_given_x(0), law.p_v_given_x(1)
        assert oracle.picard_constant(perfect_proxy_model, 0, 1) == pytest.approx(np.sum(p2 ** 2 / p1), abs=1e-10)

    def test_equals_squared_norm_of_minimal_phi(self):
        for model in random_models(20, seed=3):
            law = model.observable_law()
            for x1 in range(model.nx):
                for x2 in range(model.nx):
                    phi = oracle.solve_phi(model, x1, x2)
                    norm = float(np.sum(law.p_z_given_x(x1) * phi ** 2))
                    assert norm == pytest.approx(oracle.picard_constant(model, x1, x2), abs=1e-8)

    def test_dual_constant_equals_squared_norm_of_minimal_gamma(self):
        for model in random_models(20, seed=4):
            law = model.observable_law()
            for x in range(model.nx):
                gamma = oracle.solve_gamma(model, x)
                norm = float(np.sum(law.p_v_given_x(x) * gamma ** 2))
                assert norm == pytest.approx(oracle.dual_picard_constant(model, x), rel=1e-8, abs=1e-8)

    def test_singular_functions_orthonormal(self):
        for model in random_models(10, seed=5):
            for x in range(model.nx):
                system = oracle.singular_system(model, x)
                assert system.rank == model.nw
                assert system.gram_deviation() < 1e-10


class TestWellposedness:
    def test_exact_gamma_has_zero_error(self, small_model):
        report = oracle.wellposedness_check(small_model, 0, 1, oracle.solve_gamma(small_model, 0))
        assert report["lhs"] == pytest.approx(0.0, abs=1e-12)
        assert report["holds"]

    def test_zero_gamma(self, small_model):
        law = small_model.observable_law()
        report = oracle.wellposedness_check(small_model, 0, 1, np.zeros(2))
        assert report["lhs"] == pytest.approx(oracle.true_casf(small_model, 0, 1) ** 2)
        expected_rhs = oracle.picard_constant(small_model, 0, 1) * np.sum(law.p_z_given_x(0) * law.ey_xz[0] ** 2)
        assert report["rhs"] == pytest.approx(expected_rhs)
        assert report["holds"]

    def test_random_draws(self):
        rng = np.random.default_rng(6)
        for model in random_models(10, seed=7):
            for _ in range(20):
                x1, x2 = rng.integers(model.nx, size=2)
                assert oracle.wellposedness_check(model, int(x1), int(x2), rng.standard_normal(model.nv))["holds"]
                assert oracle.dual_wellposedness_check(model, int(x1), int(x2), rng.standard_normal(model.nz))["holds"]

    def test_wrong_length_rejected(self, small_model):
        with pytest.raises(ConfigError):
            oracle.wellposedness_check(small_model, 0, 1, np.zeros(3))


def test_oracle_suite_passes_with_default_seed():
    report = oracle.run_oracle_suite(seed=0)
    assert report.passed, report.checks
    equivalence = next(c for c in report.checks if c["name"] == "triple_equivalence")
    assert equivalence["models"] + equivalence["skipped"] == 100


def test_model_json_round_trip(small_model):
    restored = DiscreteModel.from_json(small_model.to_json())
    np.testing.assert_array_equal(restored.p_xz_given_w, small_model.p_xz_given_w)
    np.testing.assert_array_equal(restored.mu, small_model.mu)


def test_observable_law_from_sample(small_model):
    dataset = sample_discrete(small_model, 50_000, seed=8)
    empirical = oracle.ObservableLaw.from_sample(dataset)
    truth = small_model.observable_law()
    assert empirical.p_xzv.shape == (2, 2, 2)
    assert np.max(np.abs(empirical.p_xzv - truth.p_xzv)) < 5 / np.sqrt(50_000)
    assert empirical.x_index(1.0) == 1
