"""
Finite-support structural models and observable laws.

A DiscreteModel fixes the latent law: p(w*), p(x, z | w*), p(v | w*) and the
structural means mu(x, w*) = E[y0(x, U) | W* = w*]. V is independent of (X, Z)
given W*, and Y depends on (X, W*) plus mean-zero noise. An ObservableLaw holds
only what a researcher could see: the joint pmf of (X, Z, V) and E[Y | X, Z].
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import orjson

from consts import PMF_SUM_TOL, RANDOM_MODEL_FLOOR
from errors import ConfigError, DataError


def _check_pmf(table, name, axis=-1):
    table = np.asarray(table, dtype=float)
    if np.any(table < 0) or not np.all(np.isfinite(table)):
        raise ConfigError(f"{name} must be a nonnegative finite pmf")
    sums = table.sum(axis=axis)
    if np.max(np.abs(sums - 1.0)) > PMF_SUM_TOL:
        raise ConfigError(f"{name} does not sum to 1 (max deviation {np.max(np.abs(sums - 1.0)):.3e})")
    return table


def _random_pmf(rng, size, floor, rows=None):
    """Dirichlet(1) draws lifted so every entry is at least floor"""
    if floor * size >= 1.0:
        raise ConfigError(f"floor {floor} too large for a pmf with {size} cells")
    shape = (size,) if rows is None else (rows, size)
    raw = rng.dirichlet(np.ones(size), size=rows)
    return (floor + (1.0 - floor * size) * raw).reshape(shape)


@dataclass(frozen=True)
class DiscreteModel:
    """Latent finite-support model used by the identification oracle"""
    p_w: np.ndarray  # (nw,)
    p_xz_given_w: np.ndarray  # (nw, nx, nz)
    p_v_given_w: np.ndarray  # (nw, nv)
    mu: np.ndarray  # (nx, nw)

    def __post_init__(self):
        object.__setattr__(self, "p_w", _check_pmf(self.p_w, "p_w"))
        p_xz = np.asarray(self.p_xz_given_w, dtype=float)
        if p_xz.ndim != 3:
            raise ConfigError("p_xz_given_w must have shape (nw, nx, nz)")
        _check_pmf(p_xz.reshape(p_xz.shape[0], -1), "p_xz_given_w")
        object.__setattr__(self, "p_xz_given_w", p_xz)
        object.__setattr__(self, "p_v_given_w", _check_pmf(self.p_v_given_w, "p_v_given_w"))
        mu = np.asarray(self.mu, dtype=float)
        object.__setattr__(self, "mu", mu)

        nw = len(self.p_w)
        if p_xz.shape[0] != nw or self.p_v_given_w.shape[0] != nw:
            raise ConfigError("conditional tables must have one row per latent value")
        if mu.shape != (p_xz.shape[1], nw):
            raise ConfigError(f"mu must have shape (nx, nw) = {(p_xz.shape[1], nw)}, got {mu.shape}")
        if np.any(self.p_x() <= 0):
            raise ConfigError("every treatment level needs positive probability")

    @property
    def nw(self) -> int:
        return len(self.p_w)

    @property
    def nx(self) -> int:
        return self.p_xz_given_w.shape[1]

    @property
    def nz(self) -> int:
        return self.p_xz_given_w.shape[2]

    @property
    def nv(self) -> int:
        return self.p_v_given_w.shape[1]

    @classmethod
    def generate(cls, rng, nw, nx, nz, nv, floor=RANDOM_MODEL_FLOOR, mu_scale=2.0):
        """Random model with every pmf entry >= floor"""
        sizes = {"nw": nw, "nx": nx, "nz": nz, "nv": nv}
        if any(int(size) < 1 for size in sizes.values()):
            raise ConfigError(f"model sizes must be >= 1, got {sizes}")
        p_w = _random_pmf(rng, nw, floor)
        p_xz = _random_pmf(rng, nx * nz, floor, rows=nw).reshape(nw, nx, nz)
        p_v = _random_pmf(rng, nv, floor, rows=nw)
        mu = mu_scale * rng.standard_normal((nx, nw))
        # renormalise away rounding so the sum checks hold to 1e-12
        p_w = p_w / p_w.sum()
        p_xz = p_xz / p_xz.sum(axis=(1, 2), keepdims=True)
        p_v = p_v / p_v.sum(axis=1, keepdims=True)
        return cls(p_w=p_w, p_xz_given_w=p_xz, p_v_given_w=p_v, mu=mu)

    def joint(self):
        """p(w, x, z, v) with shape (nw, nx, nz, nv)"""
        return (
            self.p_w[:, None, None, None]
            * self.p_xz_given_w[:, :, :, None]
            * self.p_v_given_w[:, None, None, :]
        )

    def p_x(self):
        return np.einsum("w,wxz->x", self.p_w, self.p_xz_given_w)

    def p_w_given_x(self):
        """(nx, nw)"""
        joint = self.p_w[None, :] * self.p_xz_given_w.sum(axis=2).T
        return joint / joint.sum(axis=1, keepdims=True)

    def p_w_given_xz(self, x):
        """(nz, nw); rows for cells of zero probability are zero"""
        joint = (self.p_w[:, None] * self.p_xz_given_w[:, x, :]).T
        return _normalise_rows(joint)

    def p_w_given_xv(self, x):
        """(nv, nw)"""
        p_x_given_w = self.p_xz_given_w[:, x, :].sum(axis=1)
        joint = (self.p_w[:, None] * p_x_given_w[:, None] * self.p_v_given_w).T
        return _normalise_rows(joint)

    def observable_law(self):
        joint = self.joint()
        p_xzv = joint.sum(axis=0)
        p_wxz = joint.sum(axis=3)
        p_xz = p_wxz.sum(axis=0)
        ey = np.einsum("xw,wxz->xz", self.mu, p_wxz)
        ey = np.divide(ey, p_xz, out=np.zeros_like(ey), where=p_xz > 0)
        return ObservableLaw(p_xzv=p_xzv, ey_xz=ey)

    def to_json(self):
        """Plain JSON pmf tables, for regression-test fixtures"""
        return orjson.dumps(
            {
                "p_w": self.p_w.tolist(),
                "p_xz_given_w": self.p_xz_given_w.tolist(),
                "p_v_given_w": self.p_v_given_w.tolist(),
                "mu": self.mu.tolist(),
            },
            option=orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2,
        )

    @classmethod
    def from_json(cls, data):
        record = orjson.loads(data)
        return cls(**{k: np.asarray(record[k], dtype=float) for k in ("p_w", "p_xz_given_w", "p_v_given_w", "mu")})


def _normalise_rows(table):
    sums = table.sum(axis=1, keepdims=True)
    return np.divide(table, sums, out=np.zeros_like(table), where=sums > 0)


@dataclass(frozen=True)
class ObservableLaw:
    """Joint pmf of (X, Z, V) and E[Y | X, Z]; the observable side of a model or a sample"""
    p_xzv: np.ndarray  # (nx, nz, nv)
    ey_xz: np.ndarray  # (nx, nz)
    # Values of each discrete level, when the law was tabulated from data
    x_levels: Optional[np.ndarray] = field(default=None, compare=False)
    z_levels: Optional[np.ndarray] = field(default=None, compare=False)
    v_levels: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        p = np.asarray(self.p_xzv, dtype=float)
        if p.ndim != 3:
            raise ConfigError("p_xzv must have shape (nx, nz, nv)")
        object.__setattr__(self, "p_xzv", _check_pmf(p.reshape(-1), "p_xzv").reshape(p.shape))
        object.__setattr__(self, "ey_xz", np.asarray(self.ey_xz, dtype=float))

    @property
    def nx(self) -> int:
        return self.p_xzv.shape[0]

    @property
    def nz(self) -> int:
        return self.p_xzv.shape[1]

    @property
    def nv(self) -> int:
        return self.p_xzv.shape[2]

    @classmethod
    def from_sample(cls, dataset):
        """Empirical contingency table of a sample with scalar discrete X, Z and V"""
        if dataset.dx != 1 or dataset.dz != 1 or dataset.dv != 1:
            raise DataError("empirical laws need scalar X, Z and V")
        x_levels, xi = np.unique(dataset.x[:, 0], return_inverse=True)
        z_levels, zi = np.unique(dataset.z[:, 0], return_inverse=True)
        v_levels, vi = np.unique(dataset.v[:, 0], return_inverse=True)
        counts = np.zeros((len(x_levels), len(z_levels), len(v_levels)))
        np.add.at(counts, (xi, zi, vi), 1.0)
        y_sums = np.zeros((len(x_levels), len(z_levels)))
        np.add.at(y_sums, (xi, zi), dataset.y)
        n_xz = counts.sum(axis=2)
        ey = np.divide(y_sums, n_xz, out=np.zeros_like(y_sums), where=n_xz > 0)
        return cls(
            p_xzv=counts / dataset.n,
            ey_xz=ey,
            x_levels=x_levels,
            z_levels=z_levels,
            v_levels=v_levels,
        )

    def x_index(self, value):
        """Position of a treatment value; plain indices when the law has no level values"""
        if self.x_levels is None:
            index = int(value)
            if not 0 <= index < self.nx:
                raise DataError(f"treatment level {value} outside 0..{self.nx - 1}")
            return index
        hits = np.nonzero(np.isclose(self.x_levels, float(value)))[0]
        if len(hits) == 0:
            raise DataError(f"treatment level {value} not in the support {self.x_levels.tolist()}")
        return int(hits[0])

    def p_x(self):
        return self.p_xzv.sum(axis=(1, 2))

    def p_xz(self, x):
        return self.p_xzv[x].sum(axis=1)

    def p_z_given_x(self, x):
        p = self.p_xz(x)
        return p / p.sum()

    def p_v_given_x(self, x):
        p = self.p_xzv[x].sum(axis=0)
        return p / p.sum()

    def p_zv_given_x(self, x):
        """(nz, nv)"""
        return self.p_xzv[x] / self.p_xzv[x].sum()

    def p_v_given_xz(self, x):
        """(nz, nv); rows of empty cells are zero"""
        return _normalise_rows(self.p_xzv[x])

    def p_z_given_xv(self, x):
        """(nv, nz); rows of empty cells are zero"""
        return _normalise_rows(self.p_xzv[x].T)
