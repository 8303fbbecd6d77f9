"""
Configuration records for bases, the estimator and the bootstrap.
"""
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from consts import (
    BASIS_KINDS,
    BOOTSTRAP_DRAWS,
    BOOTSTRAP_LEVEL,
    DEFAULT_MAX_TOTAL_DEGREE,
    DISCRETE_SUPPORT_THRESHOLD,
    PENALTY_RULES,
)
from errors import ConfigError


@dataclass(frozen=True)
class BasisSpec:
    """Which basis to build on a block of variables"""
    input_dim: int
    max_total_degree: int = DEFAULT_MAX_TOTAL_DEGREE
    kind: str = "power_series"
    standardize: bool = True
    # Support points of an indicator_saturated basis, one tuple per point
    support: Optional[Tuple[Tuple[float, ...], ...]] = None

    def __post_init__(self):
        if self.kind not in BASIS_KINDS:
            raise ConfigError(f"unknown basis kind {self.kind!r}; expected one of {BASIS_KINDS}")
        if int(self.input_dim) < 1:
            raise ConfigError(f"basis input_dim must be >= 1, got {self.input_dim}")
        if int(self.max_total_degree) < 0:
            raise ConfigError(f"basis max_total_degree must be >= 0, got {self.max_total_degree}")
        if self.kind == "indicator_saturated" and self.standardize:
            # centring indicator columns removes the constant from their span
            raise ConfigError("indicator_saturated bases already span the constant and are not standardized")
        if self.support is not None:
            for point in self.support:
                if len(point) != self.input_dim:
                    raise ConfigError(f"support point {point} does not have dimension {self.input_dim}")

    @classmethod
    def power_series(cls, input_dim, degree=DEFAULT_MAX_TOTAL_DEGREE, standardize=True):
        return cls(input_dim=input_dim, max_total_degree=degree, kind="power_series", standardize=standardize)

    @classmethod
    def saturated(cls, input_dim):
        return cls(input_dim=input_dim, max_total_degree=0, kind="indicator_saturated", standardize=False)

    def with_support(self, points):
        """Copy whose indicator support is the set of distinct rows in points (lexicographic order)"""
        points = np.asarray(points, dtype=float).reshape(len(points), -1)
        unique = np.unique(points, axis=0)
        return replace(self, support=tuple(tuple(float(c) for c in row) for row in unique))

    def to_dict(self):
        data = asdict(self)
        data["support"] = None if self.support is None else [list(p) for p in self.support]
        return data


@dataclass(frozen=True)
class EstimatorConfig:
    """Basis choices and penalties for the two-stage estimator; a None penalty means 'auto'"""
    rho_spec: BasisSpec
    chi_spec: BasisSpec
    psi_spec: BasisSpec
    lambda0: Optional[float] = None
    lambda1: Optional[float] = None
    lambda2: Optional[float] = None
    lambda3: Optional[float] = None
    penalty_rule: str = "gcv_first_stages_plus_scaled_lambda0"
    penalize_intercept: bool = False
    detect_discrete: bool = True
    discrete_threshold: int = DISCRETE_SUPPORT_THRESHOLD
    singular_fallback: bool = False

    def __post_init__(self):
        if self.penalty_rule not in PENALTY_RULES:
            raise ConfigError(f"unknown penalty_rule {self.penalty_rule!r}; expected one of {PENALTY_RULES}")
        for name in ("lambda0", "lambda1", "lambda2", "lambda3"):
            value = getattr(self, name)
            if value is None:
                if self.penalty_rule == "fixed":
                    raise ConfigError(f"{name} is 'auto' but penalty_rule is 'fixed'")
                continue
            if not np.isfinite(value) or value < 0:
                raise ConfigError(f"{name} must be a nonnegative real, got {value}")
        if self.discrete_threshold < 1:
            raise ConfigError("discrete_threshold must be >= 1")

    @classmethod
    def default(cls, dx, dz, dv, degree=DEFAULT_MAX_TOTAL_DEGREE, **overrides):
        """Power series of the same total degree on every block, auto penalties"""
        return cls(
            rho_spec=BasisSpec.power_series(dv, degree),
            chi_spec=BasisSpec.power_series(dx, degree),
            psi_spec=BasisSpec.power_series(dx + dz, degree),
            **overrides,
        )

    @classmethod
    def saturated(cls, dx, dz, dv, lam=1e-10, **overrides):
        """Indicator bases on every block with a common fixed penalty"""
        return cls(
            rho_spec=BasisSpec.saturated(dv),
            chi_spec=BasisSpec.saturated(dx),
            psi_spec=BasisSpec.saturated(dx + dz),
            lambda0=lam,
            lambda1=lam,
            lambda2=lam,
            lambda3=lam,
            penalty_rule="fixed",
            detect_discrete=False,
            **overrides,
        )

    def check_dimensions(self, dx, dz, dv):
        if self.rho_spec.input_dim != dv:
            raise ConfigError(f"rho basis input_dim {self.rho_spec.input_dim} != dim(V) {dv}")
        if self.chi_spec.input_dim != dx:
            raise ConfigError(f"chi basis input_dim {self.chi_spec.input_dim} != dim(X) {dx}")
        if self.psi_spec.input_dim != dx + dz:
            raise ConfigError(f"psi basis input_dim {self.psi_spec.input_dim} != dim(X)+dim(Z) {dx + dz}")

    def to_dict(self):
        data = {k: v for k, v in asdict(self).items() if not k.endswith("_spec")}
        for name in ("rho_spec", "chi_spec", "psi_spec"):
            data[name] = getattr(self, name).to_dict()
        return data


@dataclass(frozen=True)
class BootstrapConfig:
    """Pairs bootstrap settings"""
    draws: int = BOOTSTRAP_DRAWS
    seed: int = 0
    level: float = BOOTSTRAP_LEVEL
    workers: int = field(default=1, compare=False)

    def __post_init__(self):
        if int(self.draws) < 2:
            raise ConfigError(f"bootstrap needs at least 2 draws, got {self.draws}")
        if not 0.0 < float(self.level) < 1.0:
            raise ConfigError(f"bootstrap level must lie in (0, 1), got {self.level}")

    def to_dict(self):
        return {"draws": self.draws, "seed": self.seed, "level": self.level}
