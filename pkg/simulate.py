"""
Synthetic designs with known CASF and the Monte Carlo harness that compares
the proxy estimator with the naive backdoor comparator.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import orjson
import psutil
from scipy.stats import norm

import estimator
from consts import (
    DISCRETE_NOISE_SD,
    MONTE_CARLO_N_LIST,
    MONTE_CARLO_POINTS,
    MONTE_CARLO_REPS,
    SUMMARY_LOG_EVERY_REPS,
    VERSION,
)
from errors import ConfigError, ProxyCasfError
from models.config import EstimatorConfig
from models.dataset import Dataset
from models.discrete_model import DiscreteModel
from models.gaussian_dgp import GaussianLinearDGP
from models.report import MonteCarloReport
from oracle import true_casf
from utils import stream_rng, worker_count

logger = logging.getLogger("proxycasf.simulate")


# ----------------------------------------------------------------------------
# Gaussian-linear design


def sample_gaussian(dgp: GaussianLinearDGP, n, seed=0, rng=None):
    """n iid rows of (Y, X, Z, V); pass rng to draw from an existing stream"""
    rng = stream_rng(seed) if rng is None else rng
    w = rng.standard_normal(n)
    x = dgp.alpha * w + rng.standard_normal(n)
    v = w + dgp.sigma_v * rng.standard_normal(n)
    z = w + dgp.sigma_z * rng.standard_normal(n)
    y = dgp.b0 + dgp.b1 * x + dgp.b2 * w + dgp.sigma_y * rng.standard_normal(n)
    return Dataset(y=y, x=x, z=z, v=v)


def analytic_casf(dgp: GaussianLinearDGP, x1, x2):
    return dgp.b0 + dgp.b1 * x1 + dgp.b2 * dgp.posterior_slope * x2


def analytic_naive_casf(dgp: GaussianLinearDGP, x1, x2):
    """
    Probability limit of the comparator that conditions on V as if it were W*:
    E[E[Y | X=x1, V] | X=x2], with E[W* | X, V] = c_x X + c_v V.
    """
    det = (dgp.alpha ** 2 + 1.0) * (1.0 + dgp.sigma_v ** 2) - dgp.alpha ** 2
    c_x = dgp.alpha * dgp.sigma_v ** 2 / det
    c_v = 1.0 / det
    return dgp.b0 + dgp.b1 * x1 + dgp.b2 * (c_x * x1 + c_v * dgp.posterior_slope * x2)


def analytic_distributional_casf(dgp: GaussianLinearDGP, y, x1, x2):
    """P(y0(x1, U) <= y | X = x2)"""
    mean = analytic_casf(dgp, x1, x2)
    sd = np.sqrt(dgp.b2 ** 2 * dgp.posterior_variance + dgp.sigma_y ** 2)
    if sd == 0:
        return float(y >= mean)
    return float(norm.cdf((y - mean) / sd))


# ----------------------------------------------------------------------------
# Finite-support design


def sample_discrete(model: DiscreteModel, n, seed=0, noise_sd=DISCRETE_NOISE_SD, rng=None, return_latent=False):
    """
    n iid rows from the model's joint law; X, Z and V hold level indices and
    Y = mu(X, W*) + noise_sd * N(0, 1).
    """
    if noise_sd < 0:
        raise ConfigError("noise_sd must be nonnegative")
    rng = stream_rng(seed) if rng is None else rng
    joint = model.joint()
    cdf = np.cumsum(joint.ravel())
    cells = np.minimum(np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right"), cdf.size - 1)
    w, x, z, v = np.unravel_index(cells, joint.shape)
    y = model.mu[x, w] + noise_sd * rng.standard_normal(n)
    dataset = Dataset(y=y, x=x.astype(float), z=z.astype(float), v=v.astype(float))
    if return_latent:
        return dataset, w
    return dataset


# ----------------------------------------------------------------------------
# Monte Carlo


class MonteCarloExperiment:
    """Independent replications over a list of sample sizes, one RNG stream per (seed, rep, n)"""

    def __init__(
        self,
        target,
        config=None,
        n_list=None,
        reps=MONTE_CARLO_REPS,
        seed=0,
        points=None,
        workers=None,
        noise_sd=DISCRETE_NOISE_SD,
    ):
        """Initialize the experiment

        Args:
            target: GaussianLinearDGP or DiscreteModel to sample from
            config: EstimatorConfig; defaults to power series for Gaussian targets, saturated bases for discrete ones
            n_list: Sample sizes
            reps: Replications per sample size
            seed: Base seed; replication rep at size n draws from the stream (seed, rep, n)
            points: (x1, x2) pairs to evaluate; defaults to the reference points or every level pair
            workers: Thread pool size; defaults to PROXYCASF_WORKERS
            noise_sd: Outcome noise for discrete targets
        """
        if isinstance(target, GaussianLinearDGP):
            self.kind = "gaussian"
            default_config = EstimatorConfig.default(1, 1, 1)
            default_points = MONTE_CARLO_POINTS
        elif isinstance(target, DiscreteModel):
            self.kind = "discrete"
            default_config = EstimatorConfig.saturated(1, 1, 1)
            default_points = [[x1, x2] for x1 in range(target.nx) for x2 in range(target.nx)]
        else:
            raise ConfigError(f"cannot simulate from {type(target).__name__}")
        if int(reps) < 1:
            raise ConfigError("reps must be >= 1")

        self.target = target
        self.config = config or default_config
        self.n_list = [int(n) for n in (n_list or MONTE_CARLO_N_LIST)]
        self.reps = int(reps)
        self.seed = int(seed)
        self.points = [[float(p[0]), float(p[1])] for p in (points or default_points)]
        self.workers = workers or worker_count()
        self.noise_sd = float(noise_sd)
        self.truth = [self._truth(x1, x2) for x1, x2 in self.points]

        # Tracking stats
        self.completed = 0
        self.failed = 0
        self.start_time = None
        self.last_summary_at = 0

        logger.info(
            f"Initialized {self.kind} Monte Carlo: n={self.n_list} reps={self.reps} seed={self.seed} workers={self.workers}"
        )

    def _truth(self, x1, x2):
        if self.kind == "gaussian":
            return analytic_casf(self.target, x1, x2)
        return true_casf(self.target, int(x1), int(x2))

    def _sample(self, n, rep):
        rng = stream_rng(self.seed, rep, n)
        if self.kind == "gaussian":
            return sample_gaussian(self.target, n, rng=rng)
        return sample_discrete(self.target, n, noise_sd=self.noise_sd, rng=rng)

    def _run_one(self, n, rep):
        dataset = self._sample(n, rep)
        record = {"n": n, "rep": rep}
        try:
            proxy_fit = estimator.fit(dataset, self.config)
            naive_fit = estimator.fit_naive(dataset, self.config)
            # small samples can miss a target level; that fails the replication, not the run
            proxy = [estimator.casf(proxy_fit, x1, x2) for x1, x2 in self.points]
            naive = [estimator.casf(naive_fit, x1, x2) for x1, x2 in self.points]
        except ProxyCasfError as e:
            logger.warning(f"Replication n={n} rep={rep} failed: {e}")
            record.update({"failed": True, "error": type(e).__name__})
            return record

        record.update(
            {
                "failed": False,
                "estimates": proxy,
                "naive": naive,
                "abs_errors": [abs(e - t) for e, t in zip(proxy, self.truth)],
                "naive_abs_errors": [abs(e - t) for e, t in zip(naive, self.truth)],
                "lambdas": proxy_fit.lambdas,
            }
        )
        return record

    def _log_summary(self, n):
        """One-line progress summary with throughput and resident memory"""
        seconds_elapsed = time.time() - self.start_time
        reps_per_sec = self.completed / seconds_elapsed if seconds_elapsed > 0 else 0

        try:
            memory_mb = psutil.Process().memory_info().rss / 1024 / 1024
            memory_str = f" | {memory_mb:.1f}MB"
        except psutil.Error:
            memory_str = ""

        logger.info(
            f"[n={n}] Replications: {self.completed} done {self.failed} failed | "
            f"Rate: {reps_per_sec:.2f} reps/s{memory_str}"
        )

    def _summarize(self, n, records):
        good = [r for r in records if not r["failed"]]
        summary = {"n": n, "reps": len(records), "failed": len(records) - len(good)}
        if not good:
            return summary
        errors = np.array([r["abs_errors"] for r in good])
        naive = np.array([r["naive_abs_errors"] for r in good])
        summary.update(
            {
                "median_abs_error": float(np.median(errors)),
                "mean_abs_error": float(np.mean(errors)),
                "naive_median_abs_error": float(np.median(naive)),
                "naive_mean_abs_error": float(np.mean(naive)),
                "point_median_abs_error": np.median(errors, axis=0).tolist(),
                "point_naive_median_abs_error": np.median(naive, axis=0).tolist(),
            }
        )
        return summary

    def _config_echo(self):
        if self.kind == "gaussian":
            dgp = self.target.to_dict()
        else:
            dgp = {"kind": "discrete", "noise_sd": self.noise_sd, "model": orjson.loads(self.target.to_json())}
        return {
            "dgp": dgp,
            "estimator": self.config.to_dict(),
            "n_list": self.n_list,
            "reps": self.reps,
            "points": self.points,
            "truth": self.truth,
        }

    def run(self):
        self.start_time = time.time()
        records, summary = [], []
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            for n in self.n_list:
                futures = [pool.submit(self._run_one, n, rep) for rep in range(self.reps)]
                batch = []
                for future in futures:
                    record = future.result()
                    batch.append(record)
                    self.completed += 1
                    self.failed += int(record["failed"])
                    if self.completed - self.last_summary_at >= SUMMARY_LOG_EVERY_REPS:
                        self._log_summary(n)
                        self.last_summary_at = self.completed
                batch.sort(key=lambda r: r["rep"])
                records.extend(batch)
                summary.append(self._summarize(n, batch))
                self._log_summary(n)

        return MonteCarloReport(
            records=records,
            summary=summary,
            config=self._config_echo(),
            seed=self.seed,
            version=VERSION,
        )


def monte_carlo(
    target,
    config=None,
    n_list=None,
    reps=MONTE_CARLO_REPS,
    seed=0,
    points=None,
    workers=None,
    noise_sd=DISCRETE_NOISE_SD,
):
    """Proxy and naive errors over reps independent samples at each n"""
    return MonteCarloExperiment(target, config, n_list, reps, seed, points, workers, noise_sd).run()
