import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from basis import (
    BasisTransform,
    apply_standardizer,
    enumerate_monomials,
    evaluate_basis,
    fit_standardizer,
    kron_index,
    kron_pair,
    kron_rows,
)
from errors import BasisError, ConfigError, DataError
from models.config import BasisSpec


def test_monomials_are_graded_with_intercept_first():
    assert enumerate_monomials(2, 2) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


@pytest.mark.parametrize("dim", [1, 2, 3, 4])
@pytest.mark.parametrize("degree", range(7))
def test_monomial_count(dim, degree):
    monomials = enumerate_monomials(dim, degree)
    assert len(monomials) == math.comb(dim + degree, degree)
    assert len(set(monomials)) == len(monomials)


def test_evaluation_is_row_by_row():
    rng = np.random.default_rng(0)
    first, second = rng.standard_normal((7, 3)), rng.standard_normal((4, 3))
    spec = BasisSpec.power_series(3, 4, standardize=False)
    stacked = np.vstack([evaluate_basis(first, spec).values, evaluate_basis(second, spec).values])
    assert_allclose(evaluate_basis(np.vstack([first, second]), spec).values, stacked)

    levels = rng.integers(0, 3, size=(11, 1)).astype(float)
    saturated = BasisSpec.saturated(1).with_support([[0.0], [1.0], [2.0]])
    assert_allclose(
        evaluate_basis(levels, saturated).values,
        np.vstack([evaluate_basis(levels[:5], saturated).values, evaluate_basis(levels[5:], saturated).values]),
    )


def test_power_series_values():
    design = evaluate_basis([[2.0, 3.0]], BasisSpec.power_series(2, 2, standardize=False))
    assert_allclose(design.values, [[1.0, 2.0, 3.0, 4.0, 6.0, 9.0]])
    assert design.intercept_index == 0


def test_saturated_basis_is_one_hot():
    spec = BasisSpec.saturated(1).with_support([[0.0], [2.0], [1.0]])
    design = evaluate_basis([[1.0], [0.0], [2.0], [1.0]], spec)
    assert spec.support == ((0.0,), (1.0,), (2.0,))
    assert_allclose(design.values, [[0, 1, 0], [1, 0, 0], [0, 0, 1], [0, 1, 0]])
    assert design.intercept_index is None


def test_saturated_basis_rejects_unseen_level():
    spec = BasisSpec.saturated(1).with_support([[0.0], [1.0]])
    with pytest.raises(BasisError):
        evaluate_basis([[3.0]], spec)


def test_saturated_basis_cannot_be_standardized():
    with pytest.raises(ConfigError):
        BasisSpec(input_dim=1, kind="indicator_saturated", standardize=True)


def test_unknown_kind_rejected():
    with pytest.raises(ConfigError):
        BasisSpec(input_dim=1, kind="splines")


def test_kron_rows_layout():
    a = np.array([[1.0, 2.0]])
    b = np.array([[10.0, 20.0, 30.0]])
    assert_allclose(kron_rows(a, b), [[10, 20, 30, 20, 40, 60]])
    # 1-based (a, b) -> (a - 1) * l + b and back
    assert kron_index(2, 3, 3) == 6
    assert kron_pair(6, 3) == (2, 3)
    assert kron_pair(kron_index(1, 2, 3), 3) == (1, 2)


def test_kron_rows_needs_equal_rows():
    with pytest.raises(DataError):
        kron_rows(np.ones((2, 2)), np.ones((3, 2)))


def test_standardizer_centres_and_scales_all_but_intercept():
    rng = np.random.default_rng(3)
    points = rng.normal(2.0, 3.0, size=(500, 1))
    raw = evaluate_basis(points, BasisSpec.power_series(1, 3))
    design = apply_standardizer(fit_standardizer(raw), raw)
    assert_allclose(design.values[:, 0], 1.0)
    assert_allclose(design.values[:, 1:].mean(axis=0), 0.0, atol=1e-10)
    # population sd (divisor n)
    assert_allclose(design.values[:, 1:].std(axis=0), 1.0, atol=1e-10)


def test_constant_columns_are_dropped():
    points = np.column_stack([np.arange(10.0), np.full(10, 4.0)])
    transform = BasisTransform.fit(points, BasisSpec.power_series(2, 1))
    # columns 1, x1, x2 with x2 constant
    assert transform.width == 2
    assert transform.standardizer.dropped_columns == (2,)
    assert transform(points).shape == (10, 2)


def test_transform_applies_training_statistics_to_new_points():
    train = np.linspace(-1.0, 1.0, 21).reshape(-1, 1)
    transform = BasisTransform.fit(train, BasisSpec.power_series(1, 1))
    sd = train.std()
    assert_allclose(transform([[0.5]]), [[1.0, 0.5 / sd]])


def test_saturated_transform_resolves_support_from_training_points():
    transform = BasisTransform.fit([[1.0], [0.0], [1.0]], BasisSpec.saturated(1))
    assert transform.spec.support == ((0.0,), (1.0,))
    assert transform.width == 2


def test_basis_rejects_non_finite_points():
    with pytest.raises(DataError):
        evaluate_basis([[np.nan]], BasisSpec.power_series(1, 2))
