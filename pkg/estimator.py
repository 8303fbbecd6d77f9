"""
Two-stage penalized sieve minimum-distance estimator of the conditional
average structural function (CASF) y(x1 | x2) = E[y0(x1, U) | X = x2].

First stage (series ridge, penalties lambda1..lambda3):
    g_i      = psi_i' B_g                          (Y on psi)
    pi_i     = (psi_i' B_rho) (x) chi_i            (rho columns on psi)
    alpha    = (chi(x2)' A) (x) chi(x1)            (rho columns on chi)
Second stage (ridge, lambda0):
    theta    = (S + lambda0 D)^-1 (1/n) sum pi_i g_i,  S = (1/n) sum pi_i pi_i'
Estimate:
    y(x1 | x2) = alpha(x1, x2)' theta

Features are standardized, the outcome never is, so every CASF is in Y units.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from basis import BasisTransform, kron_rows
from consts import (
    GCV_LAMBDA_GRID,
    GRID_LOWER_QUANTILE,
    GRID_POINTS,
    GRID_UPPER_QUANTILE,
    PI_CHUNK_ROWS,
    SCALED_EFFECT_FACTOR,
)
from errors import BasisError, DataError, SingularSystemError
from models.config import BasisSpec, EstimatorConfig
from models.dataset import Dataset
from ridge import RidgeFit, effective_dof, ridge_fit, ridge_fit_from_moments, ridge_predict
from utils import as_matrix

logger = logging.getLogger("proxycasf.estimator")


@dataclass(frozen=True)
class FittedEstimator:
    """Everything needed to evaluate y(x1 | x2); immutable and safe to share across threads"""
    theta_hat: np.ndarray
    theta_stage: RidgeFit
    alpha_stage: RidgeFit
    rho: BasisTransform
    chi: BasisTransform
    psi: Optional[BasisTransform]
    g_stage: Optional[RidgeFit]
    pi_stage: Optional[RidgeFit]
    config: EstimatorConfig
    lambdas: Dict[str, float]
    n: int
    x_train: np.ndarray
    moment_cross: np.ndarray  # (1/n) sum pi_i g_i
    kind: str = "proxy"
    notes: List[str] = field(default_factory=list)

    @property
    def dx(self) -> int:
        return self.x_train.shape[1]

    @property
    def standardizers(self):
        blocks = {"rho": self.rho, "chi": self.chi, "psi": self.psi}
        return {name: block.standardizer for name, block in blocks.items() if block is not None}

    def normal_equation_residual(self):
        """||S_lambda theta - (1/n) sum pi g|| relative to ||(1/n) sum pi g||"""
        lhs = self.theta_stage.system_matrix() @ self.theta_hat
        scale = np.linalg.norm(self.moment_cross)
        return float(np.linalg.norm(lhs - self.moment_cross) / (scale if scale > 0 else 1.0))


# ----------------------------------------------------------------------------
# Penalty selection


def gcv_penalty(features, targets, penalize_mask, grid=GCV_LAMBDA_GRID, context=""):
    """Generalized cross-validation over a penalty grid; targets may have several columns"""
    x = as_matrix(features, "features")
    y = as_matrix(targets, "targets")
    n = len(x)
    gram = x.T @ x / n
    cross = x.T @ y / n

    best_lam, best_score = None, np.inf
    for lam in sorted(grid):
        try:
            fit = ridge_fit_from_moments(gram, cross, n, lam, penalize_mask, context=context)
        except SingularSystemError:
            continue
        residual = y - x @ fit.coefficients
        rss = float(np.mean(np.sum(residual ** 2, axis=1)))
        denom = (1.0 - effective_dof(fit) / n) ** 2
        if denom <= 0:
            continue
        score = rss / denom
        if score < best_score:
            best_lam, best_score = lam, score
    if best_lam is None:
        raise SingularSystemError(rank=0, size=x.shape[1], context=f"{context} (no admissible GCV penalty)")
    logger.debug(f"GCV chose lambda={best_lam:.3g} for {context} (score {best_score:.6g})")
    return best_lam


def scaled_lambda0(gram, n):
    """trace(S) / dim(theta) * n^(-1/2): scale-aware, slowly shrinking PSMD penalty"""
    return float(np.trace(gram) / gram.shape[0] / np.sqrt(n))


def _first_stage_lambda(value, features, targets, mask, context):
    if value is not None:
        return float(value)
    return gcv_penalty(features, targets, mask, context=context)


# ----------------------------------------------------------------------------
# Fitting


def _resolve_chi_spec(config, x):
    """Switch chi to saturated indicators when every treatment column has few support points"""
    spec = config.chi_spec
    if not config.detect_discrete or spec.kind != "power_series":
        return spec
    support_sizes = [len(np.unique(x[:, j])) for j in range(x.shape[1])]
    if max(support_sizes) <= config.discrete_threshold:
        logger.info(f"Treatment support sizes {support_sizes} <= {config.discrete_threshold}; using saturated chi basis")
        return BasisSpec.saturated(spec.input_dim)
    return spec


def _pi_moments(rho_part, chi_part, target):
    """(1/n) sum pi_i pi_i' and (1/n) sum pi_i target_i with pi_i = rho_part_i (x) chi_part_i, by row chunks"""
    n = len(target)
    width = rho_part.shape[1] * chi_part.shape[1]
    gram = np.zeros((width, width))
    cross = np.zeros(width)
    for start in range(0, n, PI_CHUNK_ROWS):
        stop = min(start + PI_CHUNK_ROWS, n)
        block = kron_rows(rho_part[start:stop], chi_part[start:stop])
        gram += block.T @ block
        cross += block.T @ target[start:stop]
    return gram / n, cross / n


def _theta_mask(rho_design, chi_design, penalize_intercept):
    rho_free = ~rho_design.penalize_mask(penalize_intercept)
    chi_free = ~chi_design.penalize_mask(penalize_intercept)
    return ~np.kron(rho_free, chi_free).astype(bool)


def _check_dataset(dataset, config):
    if dataset.n < 2:
        raise DataError(f"estimation needs n >= 2, got {dataset.n}")
    config.check_dimensions(dataset.dx, dataset.dz, dataset.dv)


def fit(dataset: Dataset, config: EstimatorConfig) -> FittedEstimator:
    """Three first-stage ridge regressions and the closed-form PSMD coefficient"""
    _check_dataset(dataset, config)
    n = dataset.n
    xz = np.hstack([dataset.x, dataset.z])
    allow_pinv = config.singular_fallback
    penalize_intercept = config.penalize_intercept

    rho = BasisTransform.fit(dataset.v, config.rho_spec)
    chi = BasisTransform.fit(dataset.x, _resolve_chi_spec(config, dataset.x))
    psi = BasisTransform.fit(xz, config.psi_spec)
    rho_design = rho.design(dataset.v)
    chi_design = chi.design(dataset.x)
    psi_design = psi.design(xz)
    psi_mask = psi_design.penalize_mask(penalize_intercept)
    chi_mask = chi_design.penalize_mask(penalize_intercept)

    lam1 = _first_stage_lambda(config.lambda1, psi_design.values, dataset.y, psi_mask, "g stage")
    lam2 = _first_stage_lambda(config.lambda2, psi_design.values, rho_design.values, psi_mask, "pi stage")
    lam3 = _first_stage_lambda(config.lambda3, chi_design.values, rho_design.values, chi_mask, "alpha stage")

    g_stage = ridge_fit(psi_design.values, dataset.y, lam1, psi_mask, allow_pinv, context="g stage")
    g_hat = ridge_predict(g_stage, psi_design.values)[:, 0]
    pi_stage = ridge_fit(psi_design.values, rho_design.values, lam2, psi_mask, allow_pinv, context="pi stage")
    rho_hat = ridge_predict(pi_stage, psi_design.values)
    alpha_stage = ridge_fit(chi_design.values, rho_design.values, lam3, chi_mask, allow_pinv, context="alpha stage")

    gram, cross = _pi_moments(rho_hat, chi_design.values, g_hat)
    lam0 = float(config.lambda0) if config.lambda0 is not None else scaled_lambda0(gram, n)
    theta_stage = ridge_fit_from_moments(
        gram,
        cross,
        n,
        lam0,
        _theta_mask(rho_design, chi_design, penalize_intercept),
        allow_pseudo_inverse=allow_pinv,
        context="PSMD stage",
    )

    lambdas = {"lambda0": lam0, "lambda1": lam1, "lambda2": lam2, "lambda3": lam3}
    logger.info(
        f"Fitted proxy estimator: n={n} k={rho.width} l={chi.width} m={psi.width} "
        + " ".join(f"{k}={v:.3g}" for k, v in lambdas.items())
    )
    return FittedEstimator(
        theta_hat=theta_stage.coefficients[:, 0],
        theta_stage=theta_stage,
        alpha_stage=alpha_stage,
        rho=rho,
        chi=chi,
        psi=psi,
        g_stage=g_stage,
        pi_stage=pi_stage,
        config=config,
        lambdas=lambdas,
        n=n,
        x_train=dataset.x.copy(),
        moment_cross=cross,
        kind="proxy",
    )


def fit_naive(dataset: Dataset, config: EstimatorConfig) -> FittedEstimator:
    """Comparator that treats V as perfect controls: ridge of Y on rho(V) (x) chi(X), averaged over V | X"""
    _check_dataset(dataset, config)
    n = dataset.n
    allow_pinv = config.singular_fallback
    penalize_intercept = config.penalize_intercept

    rho = BasisTransform.fit(dataset.v, config.rho_spec)
    chi = BasisTransform.fit(dataset.x, _resolve_chi_spec(config, dataset.x))
    rho_design = rho.design(dataset.v)
    chi_design = chi.design(dataset.x)
    chi_mask = chi_design.penalize_mask(penalize_intercept)

    lam3 = _first_stage_lambda(config.lambda3, chi_design.values, rho_design.values, chi_mask, "alpha stage")
    alpha_stage = ridge_fit(chi_design.values, rho_design.values, lam3, chi_mask, allow_pinv, context="alpha stage")

    gram, cross = _pi_moments(rho_design.values, chi_design.values, dataset.y)
    lam0 = float(config.lambda0) if config.lambda0 is not None else scaled_lambda0(gram, n)
    theta_stage = ridge_fit_from_moments(
        gram,
        cross,
        n,
        lam0,
        _theta_mask(rho_design, chi_design, penalize_intercept),
        allow_pseudo_inverse=allow_pinv,
        context="naive regression",
    )
    return FittedEstimator(
        theta_hat=theta_stage.coefficients[:, 0],
        theta_stage=theta_stage,
        alpha_stage=alpha_stage,
        rho=rho,
        chi=chi,
        psi=None,
        g_stage=None,
        pi_stage=None,
        config=config,
        lambdas={"lambda0": lam0, "lambda3": lam3},
        n=n,
        x_train=dataset.x.copy(),
        moment_cross=cross,
        kind="naive",
    )


# ----------------------------------------------------------------------------
# Evaluation


def _treatment_points(fit, points):
    points = as_matrix(points, "treatment points", columns=fit.dx)
    if fit.chi.spec.kind == "power_series":
        low = fit.x_train.min(axis=0)
        high = fit.x_train.max(axis=0)
        outside = np.any((points < low) | (points > high), axis=1)
        if np.any(outside):
            logger.warning(f"{int(outside.sum())} evaluation point(s) lie outside the observed treatment range")
    return points


def extrapolated(fit, points):
    """True where a point lies outside the training treatment range"""
    points = as_matrix(points, "treatment points", columns=fit.dx)
    low = fit.x_train.min(axis=0)
    high = fit.x_train.max(axis=0)
    return np.any((points < low) | (points > high), axis=1)


def casf_pairs(fit, x1, x2):
    """Vectorized y(x1_j | x2_j) over matched rows of x1 and x2"""
    x1 = _treatment_points(fit, x1)
    x2 = _treatment_points(fit, x2)
    if len(x1) != len(x2):
        raise DataError(f"x1 has {len(x1)} points but x2 has {len(x2)}")
    try:
        chi1 = fit.chi(x1)
        chi2 = fit.chi(x2)
    except BasisError as e:
        raise BasisError(f"cannot evaluate the CASF: {e}") from e
    alpha = kron_rows(chi2 @ fit.alpha_stage.coefficients, chi1)
    return alpha @ fit.theta_hat


def casf(fit, x1, x2):
    """y(x1 | x2) = alpha(x1, x2)' theta"""
    x1 = np.atleast_1d(np.asarray(x1, dtype=float)).reshape(1, -1)
    x2 = np.atleast_1d(np.asarray(x2, dtype=float)).reshape(1, -1)
    return float(casf_pairs(fit, x1, x2)[0])


def asf_average(fit, x_grid):
    """(1/n) sum_i y(x | X_i) for each grid point x"""
    grid = _treatment_points(fit, x_grid)
    rho_mean = (fit.chi(fit.x_train) @ fit.alpha_stage.coefficients).mean(axis=0)
    alpha = kron_rows(np.tile(rho_mean, (len(grid), 1)), fit.chi(grid))
    return alpha @ fit.theta_hat


def effect_table(fit, levels, baseline, populations=None):
    """
    Entry (r, c): y(level_r | pop_c) - y(baseline | pop_c), the effect of level_r
    versus baseline for units observed at pop_c. Populations default to the
    levels followed by the baseline.
    """
    levels = [np.atleast_1d(np.asarray(level, dtype=float)) for level in levels]
    baseline = np.atleast_1d(np.asarray(baseline, dtype=float))
    if populations is None:
        populations = levels + [baseline]
    else:
        populations = [np.atleast_1d(np.asarray(p, dtype=float)) for p in populations]

    table = np.zeros((len(levels), len(populations)))
    for c, population in enumerate(populations):
        base = casf(fit, baseline, population)
        for r, level in enumerate(levels):
            table[r, c] = casf(fit, level, population) - base
    return table


def treated_effects(fit, levels, baseline):
    """Effect of each level versus baseline on the units observed at that level (ATT per level)"""
    return np.array([casf(fit, level, level) - casf(fit, baseline, level) for level in levels])


def default_grid(x, points=GRID_POINTS, lower=GRID_LOWER_QUANTILE, upper=GRID_UPPER_QUANTILE):
    """Evenly spaced grid between two sample quantiles of a scalar treatment"""
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        if x.shape[1] != 1:
            raise DataError("default grids are defined for scalar treatments only")
        x = x[:, 0]
    return np.linspace(np.quantile(x, lower), np.quantile(x, upper), int(points))


def scaled_effect_curve(fit, x_grid, scale=SCALED_EFFECT_FACTOR):
    """y(scale * x | x) - y(x | x) at each grid point of a scalar treatment"""
    if fit.dx != 1:
        raise DataError("scaled effect curves are defined for scalar treatments only")
    grid = np.asarray(x_grid, dtype=float).reshape(-1, 1)
    return casf_pairs(fit, scale * grid, grid) - casf_pairs(fit, grid, grid)


def casf_diagonal(fit, x_grid):
    """y(x | x) at each grid point"""
    grid = as_matrix(x_grid, "grid", columns=fit.dx)
    return casf_pairs(fit, grid, grid)


# ----------------------------------------------------------------------------
# Transformed outcomes and the comparator


def distributional_casf(dataset, config, y_threshold, x1, x2):
    """Raw estimate of P(y0(x1, U) <= y | X = x2) from the outcome 1{Y <= y}"""
    indicator = (dataset.y <= float(y_threshold)).astype(float)
    return casf(fit(dataset.with_outcome(indicator), config), x1, x2)


def distributional_curve(dataset, config, thresholds, x1, x2):
    """Raw distributional CASF at several thresholds; not monotonized"""
    return np.array([distributional_casf(dataset, config, t, x1, x2) for t in thresholds])


def clamp_probability(value):
    return float(np.clip(value, 0.0, 1.0))


def naive_control_estimate(dataset, config, x1, x2):
    """Backdoor estimate that treats V as perfect controls"""
    return casf(fit_naive(dataset, config), x1, x2)
