"""
Closed-form penalized least squares.

Every first stage and the PSMD step solve
    ((1/n) X'X + lam * diag(mask)) C = (1/n) X'Y
so penalties are comparable across sample sizes.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from consts import EIGEN_RELATIVE_CUTOFF
from errors import DataError, SingularSystemError
from utils import as_matrix

logger = logging.getLogger("proxycasf.ridge")


@dataclass(frozen=True)
class RidgeFit:
    """Coefficients of a multi-target ridge regression and the Gram matrix they came from"""
    coefficients: np.ndarray  # p x q
    lam: float
    penalize_mask: np.ndarray
    gram: np.ndarray  # (1/n) X'X
    n: int
    pseudo_inverse: bool = False

    @property
    def width(self) -> int:
        return self.coefficients.shape[0]

    def system_matrix(self):
        return self.gram + self.lam * np.diag(self.penalize_mask.astype(float))


def _check_lambda(lam):
    lam = float(lam)
    if not np.isfinite(lam) or lam < 0:
        raise DataError(f"ridge penalty must be a nonnegative real, got {lam}")
    return lam


def _solve(system, cross, allow_pseudo_inverse, context, strictly_positive=False):
    """Cholesky solve; eigendecomposition with a relative cutoff when the system is rank deficient"""
    size = system.shape[0]
    if strictly_positive:
        # lam > 0 on every column: positive definite in exact arithmetic
        try:
            factor = linalg.cho_factor(system, lower=True, check_finite=False)
            return linalg.cho_solve(factor, cross, check_finite=False), False
        except linalg.LinAlgError:
            pass

    eigvals, eigvecs = linalg.eigh(system)
    top = max(float(eigvals[-1]), 0.0)
    cutoff = EIGEN_RELATIVE_CUTOFF * top if top > 0 else np.inf
    rank = int(np.sum(eigvals > cutoff))

    if rank == size:
        try:
            factor = linalg.cho_factor(system, lower=True, check_finite=False)
            return linalg.cho_solve(factor, cross, check_finite=False), False
        except linalg.LinAlgError:
            pass

    if not allow_pseudo_inverse:
        raise SingularSystemError(rank=rank, size=size, context=context)

    logger.warning(f"Gram matrix{' in ' + context if context else ''} has rank {rank} of {size}; using pseudo-inverse")
    inverse = np.where(eigvals > cutoff, 1.0 / np.where(eigvals > cutoff, eigvals, 1.0), 0.0)
    return eigvecs @ (inverse[:, None] * (eigvecs.T @ cross)), True


def ridge_fit_from_moments(gram, cross, n, lam, penalize_mask=None, allow_pseudo_inverse=False, context=""):
    """Ridge solve from precomputed (1/n) X'X and (1/n) X'Y"""
    lam = _check_lambda(lam)
    gram = np.asarray(gram, dtype=float)
    cross = np.asarray(cross, dtype=float)
    if cross.ndim == 1:
        cross = cross[:, None]
    p = gram.shape[0]
    mask = np.ones(p, dtype=bool) if penalize_mask is None else np.asarray(penalize_mask, dtype=bool)
    if mask.shape != (p,):
        raise DataError(f"penalize_mask has length {mask.shape}, expected {p}")

    system = gram + lam * np.diag(mask.astype(float))
    coefficients, used_pinv = _solve(
        system, cross, allow_pseudo_inverse, context, strictly_positive=lam > 0 and bool(mask.all())
    )
    return RidgeFit(
        coefficients=coefficients,
        lam=lam,
        penalize_mask=mask,
        gram=gram,
        n=int(n),
        pseudo_inverse=used_pinv,
    )


def ridge_fit(features, targets, lam, penalize_mask=None, allow_pseudo_inverse=False, context=""):
    """Unique minimizer of (1/n) sum ||y_i - x_i'C||^2 + lam ||mask * C||_F^2"""
    x = as_matrix(features, "ridge features")
    y = as_matrix(targets, "ridge targets")
    if len(x) < 1:
        raise DataError("ridge regression needs at least one observation")
    if len(x) != len(y):
        raise DataError(f"ridge features have {len(x)} rows but targets have {len(y)}")
    n = len(x)
    return ridge_fit_from_moments(
        x.T @ x / n,
        x.T @ y / n,
        n,
        lam,
        penalize_mask=penalize_mask,
        allow_pseudo_inverse=allow_pseudo_inverse,
        context=context,
    )


def ridge_predict(fit, features):
    """features @ coefficients"""
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != fit.width:
        raise DataError(f"prediction features have {x.shape[1]} columns, fit expects {fit.width}")
    return x @ fit.coefficients


def effective_dof(fit):
    """trace of the hat matrix: tr((G + lam D)^-1 G)"""
    system = fit.system_matrix()
    if fit.pseudo_inverse:
        return float(np.trace(np.linalg.pinv(system, rcond=EIGEN_RELATIVE_CUTOFF) @ fit.gram))
    return float(np.trace(linalg.solve(system, fit.gram, assume_a="pos")))
