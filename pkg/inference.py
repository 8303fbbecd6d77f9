"""
Pairs bootstrap over whole observation rows and sup-t uniform bands.

Every draw refits the full pipeline (bases, standardizers, penalties) on a
resample drawn from the stream (seed, draw index), so results do not depend
on the worker count.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

import estimator
from consts import MAX_FAILED_DRAW_SHARE
from errors import BootstrapFailureError, ConfigError, ProxyCasfError
from models.config import BootstrapConfig, EstimatorConfig
from models.dataset import Dataset
from utils import as_matrix, stream_rng

logger = logging.getLogger("proxycasf.inference")


@dataclass(frozen=True)
class BootstrapResult:
    estimate: np.ndarray  # statistic on the full sample
    draws: np.ndarray  # successful draws x statistic length
    failed: int

    @property
    def se(self):
        return self.draws.std(axis=0, ddof=1)


@dataclass(frozen=True)
class BandResult:
    estimate: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    se: np.ndarray
    critical_value: float
    draws_used: int
    failed: int

    def to_dict(self):
        return {
            "estimate": self.estimate.tolist(),
            "lo": self.lo.tolist(),
            "hi": self.hi.tolist(),
            "se": self.se.tolist(),
            "critical_value": self.critical_value,
            "draws_used": self.draws_used,
            "failed_draws": self.failed,
        }


def _one_draw(dataset, config, statistic, seed, b):
    rows = stream_rng(seed, b).integers(0, dataset.n, dataset.n)
    try:
        return np.asarray(statistic(estimator.fit(dataset.take(rows), config)), dtype=float)
    except ProxyCasfError as e:
        logger.debug(f"Bootstrap draw {b} discarded: {e}")
        return None


def run_bootstrap(
    dataset: Dataset,
    config: EstimatorConfig,
    statistic: Callable,
    boot_config: BootstrapConfig,
    full_fit: Optional[estimator.FittedEstimator] = None,
):
    """Statistic on the full sample and on boot_config.draws resamples; failed draws are discarded and counted"""
    full_fit = full_fit or estimator.fit(dataset, config)
    point = np.atleast_1d(np.asarray(statistic(full_fit), dtype=float))

    with ThreadPoolExecutor(max_workers=max(1, int(boot_config.workers))) as pool:
        results = list(
            pool.map(
                lambda b: _one_draw(dataset, config, statistic, boot_config.seed, b),
                range(boot_config.draws),
            )
        )

    kept = [np.atleast_1d(r) for r in results if r is not None]
    failed = len(results) - len(kept)
    if failed:
        logger.warning(f"{failed} of {boot_config.draws} bootstrap draws failed and were discarded")
    if failed > MAX_FAILED_DRAW_SHARE * boot_config.draws or len(kept) < 2:
        raise BootstrapFailureError(
            f"{failed} of {boot_config.draws} bootstrap draws failed (limit {MAX_FAILED_DRAW_SHARE:.0%})"
        )
    logger.info(f"Bootstrap finished: {len(kept)} draws kept, {failed} discarded")
    return BootstrapResult(estimate=point, draws=np.vstack(kept), failed=failed)


def bootstrap_se(dataset, config, targets, boot_config):
    """Bootstrap standard deviation of y(x1 | x2) at each (x1, x2) target"""
    if not len(targets):
        raise ConfigError("bootstrap_se needs at least one target")
    x1, x2 = _split_pairs(targets, dataset.dx)
    result = run_bootstrap(dataset, config, lambda fit: estimator.casf_pairs(fit, x1, x2), boot_config)
    return result.se


def sup_t_band(result: BootstrapResult, level):
    """est +/- c* se with c* the level-quantile of max_g |draw - est| / se over points with se > 0"""
    se = result.se
    spread = se > 0
    if np.any(spread):
        deviations = np.abs(result.draws[:, spread] - result.estimate[spread]) / se[spread]
        critical = float(np.quantile(deviations.max(axis=1), level))
    else:
        critical = 0.0
    half_width = np.where(spread, critical * se, 0.0)
    return BandResult(
        estimate=result.estimate,
        lo=result.estimate - half_width,
        hi=result.estimate + half_width,
        se=se,
        critical_value=critical,
        draws_used=len(result.draws),
        failed=result.failed,
    )


def uniform_bands_for(dataset, config, statistic, boot_config, full_fit=None):
    """Sup-t band for any vector-valued statistic of a fitted estimator"""
    result = run_bootstrap(dataset, config, statistic, boot_config, full_fit=full_fit)
    return sup_t_band(result, boot_config.level)


def uniform_bands(dataset, config, grid, boot_config):
    """Sup-t band for y(x1 | x2) over a grid of (x1, x2) pairs"""
    if not len(grid):
        raise ConfigError("uniform_bands needs a nonempty grid")
    x1, x2 = _split_pairs(grid, dataset.dx)
    return uniform_bands_for(dataset, config, lambda fit: estimator.casf_pairs(fit, x1, x2), boot_config)


def _split_pairs(pairs, dx):
    """List of (x1, x2) into two point matrices"""
    x1 = as_matrix([np.atleast_1d(np.asarray(p[0], dtype=float)) for p in pairs], "x1", columns=dx)
    x2 = as_matrix([np.atleast_1d(np.asarray(p[1], dtype=float)) for p in pairs], "x2", columns=dx)
    return x1, x2
