"""Time-indexed containers for returns and variance estimates."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class ReturnSeries:
    """Arithmetic returns ``X_t`` with optional ISO dates."""

    values: np.ndarray
    dates: tuple[str, ...] | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(v)):
            raise DataError("returns must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.dates is not None:
            dates = tuple(self.dates)
            if len(dates) != v.size:
                raise DataError(f"{len(dates)} dates for {v.size} returns")
            object.__setattr__(self, "dates", dates)

    def __len__(self) -> int:
        return self.values.size

    def squared(self) -> np.ndarray:
        return self.values * self.values

    def scaled(self, a: float) -> "ReturnSeries":
        return ReturnSeries(a * self.values, self.dates)


def as_returns(returns) -> ReturnSeries:
    if isinstance(returns, ReturnSeries):
        return returns
    return ReturnSeries(np.asarray(returns, dtype=float))


@dataclass(frozen=True)
class VolSeries:
    """Variance estimates aligned to the return index.

    Entries outside ``valid`` (priming windows) hold NaN. ``meta`` records
    the method name and its parameters; ``tau`` holds the per-point
    robustification level where the method has one.
    """

    values: np.ndarray
    valid: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)
    tau: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        ok = np.asarray(self.valid, dtype=bool)
        if v.shape != ok.shape:
            raise DataError("values and valid mask differ in shape")
        v = np.where(ok, v, np.nan)
        v.setflags(write=False)
        ok.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "valid", ok)

    def __len__(self) -> int:
        return self.values.size

    @property
    def name(self) -> str:
        return str(self.meta.get("name", self.meta.get("method", "series")))

    def scaled(self, a: float) -> "VolSeries":
        return VolSeries(self.values * a, self.valid, dict(self.meta), self.tau)

    def renamed(self, name: str) -> "VolSeries":
        return VolSeries(self.values, self.valid, {**self.meta, "name": name}, self.tau)


def truth_series(sigma2, name: str = "truth") -> VolSeries:
    """Wrap a known variance path as an always-valid series."""
    s = np.asarray(sigma2, dtype=float)
    return VolSeries(s, np.ones(s.shape, dtype=bool), {"name": name, "method": "truth"})
