"""
Proxy construction from panel histories.

For target period t (1-based) with h = floor(t / 2):
    predetermined treatments:  V = (X_1..X_h),            Z = (X_h..X_{t-1})
    with lagged outcomes:      V = (X_1..X_h, Y_1..Y_h),  Z = (X_h..X_{t-1}, Y_h..Y_{t-1})
Period h appears in both blocks; it is the shared component.
"""
import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from errors import DataError
from models.dataset import Dataset, PanelDataset

logger = logging.getLogger("proxycasf.panel")

# (variable, period, component): variable "x" or "y", period 1-based, component 0-based within x
ColumnLabel = Tuple[str, int, int]


@dataclass(frozen=True)
class ProxySplit:
    """Column provenance of the flattened V and Z blocks"""
    v_columns: List[ColumnLabel]
    z_columns: List[ColumnLabel]
    shared_columns: List[ColumnLabel]
    period: int
    with_outcomes: bool

    @property
    def shared_period(self) -> int:
        return self.period // 2

    def to_dict(self):
        return {
            "v_columns": [list(c) for c in self.v_columns],
            "z_columns": [list(c) for c in self.z_columns],
            "shared_columns": [list(c) for c in self.shared_columns],
            "period": self.period,
            "with_outcomes": self.with_outcomes,
        }


def column_values(panel, label):
    """The panel slice a column label points at"""
    variable, period, component = label
    if variable == "x":
        return panel.x[:, period - 1, component]
    if variable == "y":
        return panel.y[:, period - 1]
    raise DataError(f"unknown panel variable {variable!r}")


def _labels(periods, dx, with_outcomes):
    labels = [("x", p, j) for p in periods for j in range(dx)]
    if with_outcomes:
        labels += [("y", p, 0) for p in periods]
    return labels


def _split(panel: PanelDataset, with_outcomes):
    t = panel.period
    if t < 2:
        raise DataError(f"target period {t} has no history; proxy construction needs t >= 2")
    h = t // 2
    v_columns = _labels(range(1, h + 1), panel.dx, with_outcomes)
    z_columns = _labels(range(h, t), panel.dx, with_outcomes)
    z_set = set(z_columns)
    shared = [c for c in v_columns if c in z_set]
    split = ProxySplit(
        v_columns=v_columns,
        z_columns=z_columns,
        shared_columns=shared,
        period=t,
        with_outcomes=with_outcomes,
    )

    v = np.column_stack([column_values(panel, c) for c in v_columns])
    z = np.column_stack([column_values(panel, c) for c in z_columns])
    dataset = Dataset(
        y=panel.y[:, t - 1],
        x=panel.x[:, t - 1, :],
        z=z,
        v=v,
        unit_ids=panel.unit_ids,
    )
    logger.info(f"Panel split at t={t}: dim(V)={v.shape[1]} dim(Z)={z.shape[1]} shared period {h}")
    return dataset, split


def split_predetermined(panel: PanelDataset):
    """V and Z from predetermined treatment lags"""
    return _split(panel, with_outcomes=False)


def split_with_outcomes(panel: PanelDataset):
    """V and Z from treatment and outcome lags"""
    return _split(panel, with_outcomes=True)


def order_condition(dim_latent, panel: PanelDataset, with_outcomes=False):
    """
    Largest latent dimension the proxies can support: (h - 1) periods of
    dx columns (plus one outcome column per period when lagged outcomes are used).
    For vector treatments this multiplies the scalar count by the per-period width.
    """
    if int(dim_latent) < 0:
        raise DataError(f"latent dimension must be nonnegative, got {dim_latent}")
    width = panel.dx + (1 if with_outcomes else 0)
    max_dim = max(panel.period // 2 - 1, 0) * width
    return {"pass": int(dim_latent) <= max_dim, "max_dim": max_dim}
