"""
Gaussian-linear structural model with scalar treatment and scalar proxies.
"""
from dataclasses import asdict, dataclass

from errors import ConfigError


@dataclass(frozen=True)
class GaussianLinearDGP:
    """
    W* ~ N(0, 1), X = alpha W* + e_x, V = W* + sigma_v e_v, Z = W* + sigma_z e_z,
    Y = b0 + b1 X + b2 W* + sigma_y e_y, all noises independent standard normal.
    """
    b0: float = 1.0
    b1: float = 1.0
    b2: float = 1.0
    alpha: float = 1.0
    sigma_v: float = 0.5
    sigma_z: float = 0.5
    sigma_y: float = 1.0

    def __post_init__(self):
        for name in ("sigma_v", "sigma_z", "sigma_y"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")

    @property
    def posterior_slope(self) -> float:
        """E[W* | X = x] = posterior_slope * x"""
        return self.alpha / (self.alpha ** 2 + 1.0)

    @property
    def posterior_variance(self) -> float:
        """Var(W* | X)"""
        return 1.0 / (self.alpha ** 2 + 1.0)

    def to_dict(self):
        return {"kind": "gaussian", **asdict(self)}
