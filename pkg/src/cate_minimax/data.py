"""Observation container shared by samplers, estimators and I/O."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ConfigError

__all__ = ["Dataset"]


@dataclass(frozen=True)
class Dataset:
    """``n`` observations of (covariates, binary treatment, outcome)."""

    x: NDArray[np.float64]
    a: NDArray[np.float64]
    y: NDArray[np.float64]

    def __init__(self, x: ArrayLike, a: ArrayLike, y: ArrayLike):
        x_arr = np.asarray(x, dtype=float)
        if x_arr.ndim == 1:
            x_arr = x_arr[:, None]
        a_arr = np.asarray(a, dtype=float).reshape(-1)
        y_arr = np.asarray(y, dtype=float).reshape(-1)
        if x_arr.ndim != 2 or not (x_arr.shape[0] == a_arr.size == y_arr.size):
            raise ConfigError(
                f"inconsistent shapes x={x_arr.shape}, a={a_arr.shape}, y={y_arr.shape}"
            )
        if a_arr.size and not np.all((a_arr == 0) | (a_arr == 1)):
            raise ConfigError("treatment must be binary")
        object.__setattr__(self, "x", x_arr)
        object.__setattr__(self, "a", a_arr)
        object.__setattr__(self, "y", y_arr)

    @classmethod
    def empty(cls, d: int) -> "Dataset":
        return cls(np.empty((0, d)), np.empty(0), np.empty(0))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def __len__(self) -> int:
        return self.n

    def subset(self, index: ArrayLike) -> "Dataset":
        idx = np.asarray(index)
        return Dataset(self.x[idx], self.a[idx], self.y[idx])
