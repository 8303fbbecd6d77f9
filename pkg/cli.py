"""
Batch front door.

    python cli.py estimate --config run.toml
    python cli.py panel-estimate --data panel.csv --role id=id --role t=period --role y=y --role d=x:1
    python cli.py simulate --config mc.toml --output out
    python cli.py oracle-suite --seed 7
    python cli.py bands --config expenditure.toml
"""
import argparse
import logging
import sys
from dataclasses import dataclass, field
from typing import Any, Dict

import numpy as np
import orjson

import estimator
import inference
import panel as panel_proxies
from consts import (
    BOOTSTRAP_CAVEAT,
    BOOTSTRAP_DRAWS,
    BOOTSTRAP_LEVEL,
    COMMANDS,
    DEFAULT_MAX_TOTAL_DEGREE,
    DISCRETE_NOISE_SD,
    DISCRETE_SUPPORT_THRESHOLD,
    EXIT_NUMERICAL,
    EXIT_OK,
    GRID_CURVES,
    GRID_LOWER_QUANTILE,
    GRID_POINTS,
    GRID_UPPER_QUANTILE,
    MONTE_CARLO_N_LIST,
    MONTE_CARLO_REPS,
    ORACLE_SUITE_GAMMA_DRAWS,
    ORACLE_SUITE_MODELS,
    PENALTY_RULES,
    SCALED_EFFECT_FACTOR,
    STANDARDIZE_DEFAULT,
    VERSION,
)
from errors import ConfigError, ProxyCasfError
from models.config import BasisSpec, BootstrapConfig, EstimatorConfig
from models.dataset import Dataset, PanelDataset
from models.discrete_model import DiscreteModel
from models.gaussian_dgp import GaussianLinearDGP
from models.report import EstimateReport
from oracle import run_oracle_suite
from simulate import monte_carlo
from storage.csv_backend import OutputBackend, load_config, load_csv
from utils import configure_logging, stream_rng, worker_count

logger = logging.getLogger("proxycasf.cli")

CONFIG_KEYS = {
    "data": {"path", "roles"},
    "estimator": {
        "rho_degree", "chi_degree", "psi_degree", "rho_kind", "chi_kind", "psi_kind",
        "standardize", "lambda0", "lambda1", "lambda2", "lambda3", "penalty_rule",
        "penalize_intercept", "detect_discrete", "discrete_threshold", "singular_fallback",
    },
    "bootstrap": {"draws", "level"},
    "targets": {"points", "levels", "baseline", "thresholds"},
    "grid": {"curve", "points", "lower_quantile", "upper_quantile", "scale", "values"},
    "panel": {"period", "with_outcomes", "latent_dim"},
    "dgp": {
        "kind", "b0", "b1", "b2", "alpha", "sigma_v", "sigma_z", "sigma_y",
        "nw", "nx", "nz", "nv", "noise_sd", "model_path",
    },
    "simulate": {"n_list", "reps", "points"},
    "oracle": {"models", "gamma_draws"},
    "output": {"dir"},
}

INTEGER_KEYS = {
    "estimator": {"rho_degree", "chi_degree", "psi_degree", "discrete_threshold"},
    "bootstrap": {"draws"},
    "grid": {"points"},
    "panel": {"period", "latent_dim"},
    "dgp": {"nw", "nx", "nz", "nv"},
    "simulate": {"reps"},
    "oracle": {"models", "gamma_draws"},
}
REAL_KEYS = {
    "bootstrap": {"level"},
    "grid": {"lower_quantile", "upper_quantile", "scale"},
    "dgp": {"b0", "b1", "b2", "alpha", "sigma_v", "sigma_z", "sigma_y", "noise_sd"},
}
INTEGER_LIST_KEYS = {"simulate": {"n_list"}}
REAL_LIST_KEYS = {"targets": {"thresholds"}, "grid": {"values"}}
# scalars, or lists of scalars for a vector treatment
POINT_KEYS = {"targets": {"baseline"}}
POINT_LIST_KEYS = {"targets": {"levels"}}
PAIR_LIST_KEYS = {"simulate": {"points"}}


def _is_integer(value):
    return isinstance(value, int) and not isinstance(value, bool)


def _is_real(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _is_point(value):
    if isinstance(value, list):
        return bool(value) and all(_is_real(v) for v in value)
    return _is_real(value)


def _is_pair(value):
    return isinstance(value, list) and len(value) == 2 and all(_is_real(v) for v in value)


def _check_types(section, body):
    """Reject wrong-typed values before anything is computed"""
    checks = (
        (INTEGER_KEYS, _is_integer, "an integer"),
        (REAL_KEYS, _is_real, "a number"),
        (POINT_KEYS, _is_point, "a number or a list of numbers"),
    )
    for table, ok, expected in checks:
        for key in table.get(section, set()) & set(body):
            if not ok(body[key]):
                raise ConfigError(f"[{section}].{key} must be {expected}, got {body[key]!r}")

    list_checks = (
        (INTEGER_LIST_KEYS, _is_integer, "a list of integers"),
        (REAL_LIST_KEYS, _is_real, "a list of numbers"),
        (POINT_LIST_KEYS, _is_point, "a list of treatment points"),
        (PAIR_LIST_KEYS, _is_pair, "a list of [x1, x2] pairs"),
    )
    for table, ok, expected in list_checks:
        for key in table.get(section, set()) & set(body):
            value = body[key]
            if not isinstance(value, list) or not all(ok(v) for v in value):
                raise ConfigError(f"[{section}].{key} must be {expected}, got {value!r}")


def _lambda(value, name):
    if value is None or value == "auto":
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number or 'auto', got {value!r}")
    return float(value)


@dataclass
class RunConfig:
    """Validated run configuration; sections mirror the TOML file"""
    seed: int = 0
    sections: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw):
        raw = dict(raw or {})
        seed = raw.pop("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigError(f"seed must be a nonnegative integer, got {seed!r}")
        sections = {}
        for name, body in raw.items():
            if name not in CONFIG_KEYS:
                raise ConfigError(f"unknown config section [{name}]; expected one of {sorted(CONFIG_KEYS)}")
            if not isinstance(body, dict):
                raise ConfigError(f"[{name}] must be a table")
            unknown = set(body) - CONFIG_KEYS[name]
            if unknown:
                raise ConfigError(f"unknown key(s) {sorted(unknown)} in [{name}]")
            sections[name] = dict(body)
        config = cls(seed=seed, sections=sections)
        config._validate()
        return config

    def section(self, name):
        return self.sections.get(name, {})

    def _validate(self):
        for name, body in self.sections.items():
            _check_types(name, body)
        estimator_section = self.section("estimator")
        rule = estimator_section.get("penalty_rule")
        if rule is not None and rule not in PENALTY_RULES:
            raise ConfigError(f"unknown penalty_rule {rule!r}")
        curve = self.section("grid").get("curve")
        if curve is not None and curve not in GRID_CURVES:
            raise ConfigError(f"unknown grid curve {curve!r}; expected one of {GRID_CURVES}")
        kind = self.section("dgp").get("kind")
        if kind is not None and kind not in ("gaussian", "discrete"):
            raise ConfigError(f"unknown dgp kind {kind!r}")
        roles = self.section("data").get("roles", {})
        if not isinstance(roles, dict):
            raise ConfigError("[data].roles must be a table of column = role")

    def with_overrides(self, data=None, roles=None, output=None, seed=None):
        sections = {name: dict(body) for name, body in self.sections.items()}
        if data is not None:
            sections.setdefault("data", {})["path"] = data
        if roles:
            sections.setdefault("data", {}).setdefault("roles", {}).update(roles)
        if output is not None:
            sections.setdefault("output", {})["dir"] = output
        return RunConfig.from_dict({"seed": self.seed if seed is None else seed, **sections})

    def to_dict(self):
        return {"seed": self.seed, **self.sections}

    # ------------------------------------------------------------------
    # Builders

    @property
    def output_dir(self):
        return self.section("output").get("dir", "output")

    def estimator_config(self, dx, dz, dv):
        s = self.section("estimator")
        standardize = bool(s.get("standardize", STANDARDIZE_DEFAULT))

        def spec(block, dim):
            kind = s.get(f"{block}_kind", "power_series")
            if kind == "indicator_saturated":
                return BasisSpec.saturated(dim)
            return BasisSpec(
                input_dim=dim,
                max_total_degree=int(s.get(f"{block}_degree", DEFAULT_MAX_TOTAL_DEGREE)),
                kind=kind,
                standardize=standardize,
            )

        try:
            return EstimatorConfig(
                rho_spec=spec("rho", dv),
                chi_spec=spec("chi", dx),
                psi_spec=spec("psi", dx + dz),
                lambda0=_lambda(s.get("lambda0"), "lambda0"),
                lambda1=_lambda(s.get("lambda1"), "lambda1"),
                lambda2=_lambda(s.get("lambda2"), "lambda2"),
                lambda3=_lambda(s.get("lambda3"), "lambda3"),
                penalty_rule=s.get("penalty_rule", PENALTY_RULES[1]),
                penalize_intercept=bool(s.get("penalize_intercept", False)),
                detect_discrete=bool(s.get("detect_discrete", True)),
                discrete_threshold=int(s.get("discrete_threshold", DISCRETE_SUPPORT_THRESHOLD)),
                singular_fallback=bool(s.get("singular_fallback", False)),
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid [estimator] value: {e}") from e

    def bootstrap_config(self):
        """None when the run has no [bootstrap] section"""
        if "bootstrap" not in self.sections:
            return None
        s = self.section("bootstrap")
        return BootstrapConfig(
            draws=int(s.get("draws", BOOTSTRAP_DRAWS)),
            seed=self.seed,
            level=float(s.get("level", BOOTSTRAP_LEVEL)),
            workers=worker_count(),
        )

    def simulation_target(self):
        s = self.section("dgp")
        kind = s.get("kind", "gaussian")
        if kind == "gaussian":
            params = {k: float(s[k]) for k in ("b0", "b1", "b2", "alpha", "sigma_v", "sigma_z", "sigma_y") if k in s}
            return GaussianLinearDGP(**params)
        if "model_path" in s:
            try:
                with open(s["model_path"], "rb") as f:
                    return DiscreteModel.from_json(f.read())
            except (OSError, orjson.JSONDecodeError, KeyError) as e:
                raise ConfigError(f"cannot read discrete model {s['model_path']}: {e}") from e
        nw = int(s.get("nw", 2))
        return DiscreteModel.generate(
            stream_rng(self.seed, 0),
            nw=nw,
            nx=int(s.get("nx", 2)),
            nz=int(s.get("nz", nw + 1)),
            nv=int(s.get("nv", nw + 1)),
        )


# ----------------------------------------------------------------------------
# Commands


def _require(dataset, kind, command):
    if not isinstance(dataset, kind):
        raise ConfigError(f"{command} needs a {kind.__name__} input; check the id/period roles")
    return dataset


def _load(config, command):
    path = config.section("data").get("path")
    if path is None:
        raise ConfigError(f"{command} needs [data].path or --data")
    return load_csv(path, config.section("data").get("roles", {}))


def _pairs(values, name):
    try:
        return [(np.atleast_1d(np.asarray(p[0], dtype=float)), np.atleast_1d(np.asarray(p[1], dtype=float))) for p in values]
    except (TypeError, IndexError, ValueError) as e:
        raise ConfigError(f"{name} must be a list of [x1, x2] pairs") from e


def _estimate_results(dataset, config, est_config, warnings, caveats):
    """Point estimates, effect contrasts, distributional values and bootstrap SEs/bands for [targets]"""
    targets = config.section("targets")
    points = _pairs(targets.get("points", []), "[targets].points")
    levels = targets.get("levels", [])
    baseline = targets.get("baseline")
    thresholds = targets.get("thresholds", [])
    if not points and not levels:
        raise ConfigError("nothing to estimate: set [targets].points or [targets].levels")
    if levels and baseline is None:
        raise ConfigError("[targets].levels needs [targets].baseline")

    fit = estimator.fit(dataset, est_config)
    results = {"n": dataset.n, "lambdas": fit.lambdas}
    x1 = np.array([p[0] for p in points]).reshape(len(points), -1) if points else None
    x2 = np.array([p[1] for p in points]).reshape(len(points), -1) if points else None

    def statistic(f):
        parts = []
        if points:
            parts.append(estimator.casf_pairs(f, x1, x2))
        if levels:
            parts.append(estimator.effect_table(f, levels, baseline).ravel())
            parts.append(estimator.treated_effects(f, levels, baseline))
        return np.concatenate(parts)

    point_values = statistic(fit)
    boot_config = config.bootstrap_config()
    boot = None
    if boot_config is not None:
        boot = inference.run_bootstrap(dataset, est_config, statistic, boot_config, full_fit=fit)
        caveats.append(BOOTSTRAP_CAVEAT)
        if boot.failed:
            warnings.append(f"{boot.failed} bootstrap draws failed and were discarded")
        results["bootstrap"] = {"draws": boot_config.draws, "kept": len(boot.draws), "failed": boot.failed}

    offset = 0
    if points:
        m = len(points)
        flagged = estimator.extrapolated(fit, np.vstack([x1, x2])) if fit.chi.spec.kind == "power_series" else []
        if np.any(flagged):
            warnings.append("some target points lie outside the observed treatment range")
        naive_fit = estimator.fit_naive(dataset, est_config)
        results["points"] = {
            "x1": x1.tolist(),
            "x2": x2.tolist(),
            "estimate": point_values[:m].tolist(),
            "naive_estimate": estimator.casf_pairs(naive_fit, x1, x2).tolist(),
        }
        if boot is not None:
            band = inference.sup_t_band(
                inference.BootstrapResult(boot.estimate[:m], boot.draws[:, :m], boot.failed), boot_config.level
            )
            results["points"].update({"se": band.se.tolist(), "lo": band.lo.tolist(), "hi": band.hi.tolist(),
                                      "critical_value": band.critical_value})
        offset = m

    if levels:
        rows, cols = len(levels), len(levels) + 1
        table = point_values[offset:offset + rows * cols].reshape(rows, cols)
        treated = point_values[offset + rows * cols:]
        results["effects"] = {
            "levels": levels,
            "baseline": baseline,
            "table": table.tolist(),
            "treated": treated.tolist(),
        }
        if boot is not None:
            se = boot.se
            results["effects"]["table_se"] = se[offset:offset + rows * cols].reshape(rows, cols).tolist()
            results["effects"]["treated_se"] = se[offset + rows * cols:].tolist()

    if thresholds:
        if not points:
            raise ConfigError("[targets].thresholds needs [targets].points")
        raw = [estimator.distributional_curve(dataset, est_config, thresholds, a, b) for a, b in points]
        results["distributional"] = {
            "thresholds": thresholds,
            "raw": [r.tolist() for r in raw],
            "clamped": [[estimator.clamp_probability(v) for v in r] for r in raw],
        }
    return results


def _estimate_report(command, dataset, config, extra=None, warnings=None):
    warnings = list(warnings or [])
    caveats = []
    est_config = config.estimator_config(dataset.dx, dataset.dz, dataset.dv)
    results = _estimate_results(dataset, config, est_config, warnings, caveats)
    results.update(extra or {})
    return EstimateReport(
        command=command,
        results=results,
        config={"run": config.to_dict(), "estimator": est_config.to_dict()},
        seed=config.seed,
        version=VERSION,
        warnings=warnings,
        caveats=caveats,
    )


def cmd_estimate(config, backend):
    dataset = _require(_load(config, "estimate"), Dataset, "estimate")
    backend.StoreReport("estimate", _estimate_report("estimate", dataset, config))
    return EXIT_OK


def cmd_panel_estimate(config, backend):
    panel_data = _require(_load(config, "panel-estimate"), PanelDataset, "panel-estimate")
    s = config.section("panel")
    if "period" in s:
        panel_data = panel_data.at_period(int(s["period"]))
    with_outcomes = bool(s.get("with_outcomes", False))
    split_fn = panel_proxies.split_with_outcomes if with_outcomes else panel_proxies.split_predetermined
    dataset, split = split_fn(panel_data)

    extra = {"split": split.to_dict()}
    warnings = []
    if "latent_dim" in s:
        order = panel_proxies.order_condition(int(s["latent_dim"]), panel_data, with_outcomes)
        extra["order_condition"] = order
        if not order["pass"]:
            warnings.append(
                f"latent dimension {s['latent_dim']} exceeds the {order['max_dim']} the proxies can support"
            )
    backend.StoreReport("panel-estimate", _estimate_report("panel-estimate", dataset, config, extra, warnings))
    return EXIT_OK


def cmd_simulate(config, backend):
    target = config.simulation_target()
    s = config.section("simulate")
    est_config = None
    if config.section("estimator"):
        est_config = config.estimator_config(1, 1, 1)
    elif isinstance(target, DiscreteModel):
        est_config = EstimatorConfig.saturated(1, 1, 1)
    report = monte_carlo(
        target,
        config=est_config,
        n_list=s.get("n_list", MONTE_CARLO_N_LIST),
        reps=int(s.get("reps", MONTE_CARLO_REPS)),
        seed=config.seed,
        points=s.get("points"),
        noise_sd=float(config.section("dgp").get("noise_sd", DISCRETE_NOISE_SD)),
    )
    backend.StoreReport("simulate", report)
    return EXIT_OK


def cmd_oracle_suite(config, backend):
    s = config.section("oracle")
    report = run_oracle_suite(
        seed=config.seed,
        models=int(s.get("models", ORACLE_SUITE_MODELS)),
        gamma_draws=int(s.get("gamma_draws", ORACLE_SUITE_GAMMA_DRAWS)),
    )
    backend.StoreReport("oracle-suite", report)
    return EXIT_OK if report.passed else EXIT_NUMERICAL


def cmd_bands(config, backend):
    dataset = _require(_load(config, "bands"), Dataset, "bands")
    if dataset.dx != 1:
        raise ConfigError("bands are drawn over a scalar treatment")
    s = config.section("grid")
    curve = s.get("curve", "asf")
    if "values" in s:
        grid = np.asarray(s["values"], dtype=float)
    else:
        grid = estimator.default_grid(
            dataset.x,
            points=int(s.get("points", GRID_POINTS)),
            lower=float(s.get("lower_quantile", GRID_LOWER_QUANTILE)),
            upper=float(s.get("upper_quantile", GRID_UPPER_QUANTILE)),
        )
    scale = float(s.get("scale", SCALED_EFFECT_FACTOR))
    statistics = {
        "asf": lambda f: estimator.asf_average(f, grid),
        "casf_diagonal": lambda f: estimator.casf_diagonal(f, grid),
        "scaled_effect": lambda f: estimator.scaled_effect_curve(f, grid, scale),
    }

    est_config = config.estimator_config(dataset.dx, dataset.dz, dataset.dv)
    boot_config = config.bootstrap_config() or BootstrapConfig(seed=config.seed, workers=worker_count())
    band = inference.uniform_bands_for(dataset, est_config, statistics[curve], boot_config)

    warnings = []
    if band.failed:
        warnings.append(f"{band.failed} bootstrap draws failed and were discarded")
    report = EstimateReport(
        command="bands",
        results={"curve": curve, "x": grid.tolist(), **band.to_dict()},
        config={"run": config.to_dict(), "estimator": est_config.to_dict(), "bootstrap": boot_config.to_dict()},
        seed=config.seed,
        version=VERSION,
        warnings=warnings,
        caveats=[BOOTSTRAP_CAVEAT],
    )
    backend.StoreReport("bands", report)
    backend.StorePlotData("bands.csv", grid, band.estimate, band.lo, band.hi)
    return EXIT_OK


HANDLERS = {
    "estimate": cmd_estimate,
    "panel-estimate": cmd_panel_estimate,
    "simulate": cmd_simulate,
    "oracle-suite": cmd_oracle_suite,
    "bands": cmd_bands,
}


def _emit_error(error, backend):
    record = error.to_record()
    sys.stderr.write(orjson.dumps(record, option=orjson.OPT_SORT_KEYS).decode() + "\n")
    if backend is not None:
        backend.StoreError(record)
    return error.exit_code


def run(command, config: RunConfig):
    """Execute one command; returns the process exit status"""
    backend = None
    try:
        if command not in HANDLERS:
            raise ConfigError(f"unknown command {command!r}; expected one of {COMMANDS}")
        backend = OutputBackend(config.output_dir)
        logger.info(f"Running {command} with seed {config.seed}")
        return HANDLERS[command](config, backend)
    except ProxyCasfError as e:
        logger.error(f"{command} failed: {e}")
        return _emit_error(e, backend)


def _parse_roles(pairs):
    roles = {}
    for pair in pairs or []:
        column, sep, role = pair.partition("=")
        if not sep or not column or not role:
            raise ConfigError(f"--role expects COLUMN=ROLE, got {pair!r}")
        roles[column] = role
    return roles


def build_parser():
    parser = argparse.ArgumentParser(prog="proxycasf", description="CASF estimation under proxy controls")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="TOML run configuration")
    parser.add_argument("--data", help="input CSV (overrides [data].path)")
    parser.add_argument("--role", action="append", metavar="COLUMN=ROLE", help="column role, repeatable")
    parser.add_argument("--output", help="output directory (overrides [output].dir)")
    parser.add_argument("--seed", type=int, help="top-level seed (overrides the config file)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging()
    try:
        raw = load_config(args.config) if args.config else {}
        config = RunConfig.from_dict(raw).with_overrides(
            data=args.data,
            roles=_parse_roles(args.role),
            output=args.output,
            seed=args.seed,
        )
    except ProxyCasfError as e:
        return _emit_error(e, None)
    return run(args.command, config)


if __name__ == "__main__":
    sys.exit(main())
