"""
Observed samples: cross-sectional and panel.
"""
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from errors import DataError
from utils import as_matrix


@dataclass
class Dataset:
    """Sample {(Y_i, X_i, Z_i, V_i)}: outcome, treatments and the two proxy blocks"""
    y: np.ndarray
    x: np.ndarray
    z: np.ndarray
    v: np.ndarray
    unit_ids: Optional[np.ndarray] = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim == 2 and y.shape[1] == 1:
            y = y[:, 0]
        if y.ndim != 1:
            raise DataError(f"y must be a vector, got shape {y.shape}")
        self.y = as_matrix(y, "y")[:, 0]
        self.x = as_matrix(self.x, "x")
        self.z = as_matrix(self.z, "z")
        self.v = as_matrix(self.v, "v")

        lengths = {"y": len(self.y), "x": len(self.x), "z": len(self.z), "v": len(self.v)}
        if self.unit_ids is not None:
            self.unit_ids = np.asarray(self.unit_ids)
            lengths["unit_ids"] = len(self.unit_ids)
        if len(set(lengths.values())) != 1:
            raise DataError(f"row-count mismatch between blocks: {lengths}")

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def dx(self) -> int:
        return self.x.shape[1]

    @property
    def dz(self) -> int:
        return self.z.shape[1]

    @property
    def dv(self) -> int:
        return self.v.shape[1]

    def take(self, rows):
        """Row subset (or resample, rows may repeat) keeping whole observations together"""
        rows = np.asarray(rows, dtype=int)
        return Dataset(
            y=self.y[rows],
            x=self.x[rows],
            z=self.z[rows],
            v=self.v[rows],
            unit_ids=None if self.unit_ids is None else self.unit_ids[rows],
        )

    def with_outcome(self, y):
        """Same design blocks, new outcome vector"""
        return replace(self, y=np.asarray(y, dtype=float))


@dataclass
class PanelDataset:
    """Balanced panel: y is n x T, x is n x T x dx; period is the 1-based target period t"""
    y: np.ndarray
    x: np.ndarray
    period: int
    unit_ids: Optional[np.ndarray] = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 2:
            x = x[:, :, None]
        self.x = x
        if self.y.ndim != 2 or self.x.ndim != 3:
            raise DataError(
                f"panel needs y of shape (n, T) and x of shape (n, T, dx); got {self.y.shape} and {self.x.shape}"
            )
        if self.y.shape != self.x.shape[:2]:
            raise DataError(f"panel y {self.y.shape} and x {self.x.shape[:2]} disagree on (n, T)")
        if not (np.all(np.isfinite(self.y)) and np.all(np.isfinite(self.x))):
            raise DataError("panel contains missing or non-finite values; unbalanced panels are not imputed")
        self.period = int(self.period)
        if not 1 <= self.period <= self.n_periods:
            raise DataError(f"target period {self.period} outside 1..{self.n_periods}")
        if self.unit_ids is not None:
            self.unit_ids = np.asarray(self.unit_ids)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def n_periods(self) -> int:
        return self.y.shape[1]

    @property
    def dx(self) -> int:
        return self.x.shape[2]

    def at_period(self, period):
        """Same panel, different target period"""
        return replace(self, period=period)
