"""
Power-series and saturated-indicator bases, column standardization and the
row-wise Kronecker product used to build phi(x, v) = rho(v) (x) chi(x).
"""
import itertools
import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from errors import BasisError, DataError
from models.config import BasisSpec
from utils import as_matrix

logger = logging.getLogger("proxycasf.basis")


@dataclass(frozen=True)
class DesignMatrix:
    """Evaluated basis: n x K values plus the exponent vector (or support point) of each column"""
    values: np.ndarray
    spec: BasisSpec
    column_multiindices: Tuple[Tuple, ...]
    intercept_index: Optional[int] = None

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def penalize_mask(self, penalize_intercept=False):
        """True for every penalized column; the intercept is left out unless asked for"""
        mask = np.ones(self.width, dtype=bool)
        if self.intercept_index is not None and not penalize_intercept:
            mask[self.intercept_index] = False
        return mask


@dataclass(frozen=True)
class Standardizer:
    """Column means and sds fitted on a training design; intercept passes through as 1"""
    column_means: np.ndarray
    column_sds: np.ndarray
    dropped_columns: Tuple[int, ...] = field(default_factory=tuple)
    intercept_index: Optional[int] = None

    @property
    def width(self) -> int:
        return len(self.column_means)

    @property
    def kept_columns(self):
        dropped = set(self.dropped_columns)
        return [j for j in range(self.width) if j not in dropped]

    @classmethod
    def identity(cls, width, intercept_index=None):
        return cls(
            column_means=np.zeros(width),
            column_sds=np.ones(width),
            dropped_columns=(),
            intercept_index=intercept_index,
        )


def enumerate_monomials(dim, max_degree):
    """All exponent vectors with total degree <= max_degree, graded, zero vector first"""
    if dim < 1 or max_degree < 0:
        raise BasisError(f"need dim >= 1 and max_degree >= 0, got ({dim}, {max_degree})")
    exponents = []
    for degree in range(max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(dim), degree):
            exponent = [0] * dim
            for j in combo:
                exponent[j] += 1
            exponents.append(tuple(exponent))
    return exponents


def evaluate_basis(points, spec):
    """Evaluate the basis described by spec at each row of points"""
    points = as_matrix(points, "basis points", columns=spec.input_dim)

    if spec.kind == "indicator_saturated":
        if spec.support is None:
            raise BasisError("indicator_saturated basis has no support; call spec.with_support(points) first")
        lookup = {point: j for j, point in enumerate(spec.support)}
        values = np.zeros((len(points), len(spec.support)))
        for i, row in enumerate(points):
            j = lookup.get(tuple(float(c) for c in row))
            if j is None:
                raise BasisError(f"value {tuple(row.tolist())} is not a support point of the saturated basis")
            values[i, j] = 1.0
        return DesignMatrix(values=values, spec=spec, column_multiindices=tuple(spec.support))

    exponents = enumerate_monomials(spec.input_dim, spec.max_total_degree)
    powers = np.asarray(exponents, dtype=float)
    values = np.prod(points[:, None, :] ** powers[None, :, :], axis=2)
    return DesignMatrix(values=values, spec=spec, column_multiindices=tuple(exponents), intercept_index=0)


def kron_rows(a, b):
    """Row-wise Kronecker product: column (i * l + j) holds a[:, i] * b[:, j] (0-based)"""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    if b.ndim == 1:
        b = b[None, :]
    if a.shape[0] != b.shape[0]:
        raise DataError(f"kron_rows needs equal row counts, got {a.shape[0]} and {b.shape[0]}")
    return (a[:, :, None] * b[:, None, :]).reshape(a.shape[0], a.shape[1] * b.shape[1])


def kron_index(a, b, l):
    """1-based flat column of the pair (a, b) with b ranging over l columns"""
    return (a - 1) * l + b


def kron_pair(index, l):
    """Inverse of kron_index"""
    return (index - 1) // l + 1, (index - 1) % l + 1


def fit_standardizer(design):
    """Means and population sds (divisor n) of each column; zero-sd columns other than the intercept dropped"""
    values = design.values
    if values.size == 0:
        raise DataError("cannot standardize an empty design")
    means = values.mean(axis=0)
    sds = values.std(axis=0)
    intercept = design.intercept_index

    dropped = []
    for j in range(values.shape[1]):
        if j == intercept:
            continue
        if sds[j] <= 1e-12 * max(1.0, abs(means[j])):
            dropped.append(j)
    if intercept is None and len(dropped) == values.shape[1]:
        raise DataError("every column of the design is constant and there is no intercept; nothing is estimable")
    if dropped:
        logger.info(f"Dropping {len(dropped)} constant column(s) from the design: {dropped}")

    if intercept is not None:
        means[intercept] = 0.0
        sds[intercept] = 1.0
    for j in dropped:
        sds[j] = 1.0
    return Standardizer(column_means=means, column_sds=sds, dropped_columns=tuple(dropped), intercept_index=intercept)


def apply_standardizer(standardizer, design):
    """Standardized copy of design with dropped columns removed"""
    if design.width != standardizer.width:
        raise DataError(f"design has {design.width} columns, standardizer expects {standardizer.width}")
    kept = standardizer.kept_columns
    values = (design.values - standardizer.column_means) / standardizer.column_sds
    intercept = standardizer.intercept_index
    if intercept is not None:
        values[:, intercept] = design.values[:, intercept]
    new_intercept = kept.index(intercept) if intercept is not None else None
    return DesignMatrix(
        values=values[:, kept],
        spec=design.spec,
        column_multiindices=tuple(design.column_multiindices[j] for j in kept),
        intercept_index=new_intercept,
    )


@dataclass(frozen=True)
class BasisTransform:
    """A basis fitted to training points: spec (with support resolved) plus its standardizer"""
    spec: BasisSpec
    standardizer: Standardizer

    @classmethod
    def fit(cls, points, spec):
        if spec.kind == "indicator_saturated" and spec.support is None:
            spec = spec.with_support(as_matrix(points, "basis points", columns=spec.input_dim))
        raw = evaluate_basis(points, spec)
        if spec.standardize:
            standardizer = fit_standardizer(raw)
        else:
            standardizer = Standardizer.identity(raw.width, raw.intercept_index)
        return cls(spec=spec, standardizer=standardizer)

    @property
    def width(self) -> int:
        return len(self.standardizer.kept_columns)

    def design(self, points):
        return apply_standardizer(self.standardizer, evaluate_basis(points, self.spec))

    def __call__(self, points):
        return self.design(points).values
