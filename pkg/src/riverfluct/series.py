"""Regularly gridded time series with explicit missing markers.

NaN is the missing marker and never a valid value; every operation treats it
as "no observation here", not as a number.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, List

import numpy as np
import pandas as pd

from .errors import ParameterError

DEFAULT_STEP = pd.Timedelta(minutes=15)


@dataclass
class TimeSeries:
    """One indicator sampled on a regular grid.

    Parameters
    ----------
    indicator : str
        Canonical indicator name (e.g. ``DOO-MGL``).
    start : timestamp-like
        Instant of ``values[0]``.
    values : array-like of float
        Observations in grid order; NaN marks a missing slot.
    step : timedelta-like, optional
        Grid spacing, default 15 minutes.
    unit : str, optional
        Physical unit of the values.
    """

    indicator: str
    start: pd.Timestamp
    values: np.ndarray
    step: pd.Timedelta = field(default=DEFAULT_STEP)
    unit: str = ""

    def __post_init__(self):
        self.start = pd.Timestamp(self.start)
        self.step = pd.Timedelta(self.step)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 1:
            raise ParameterError("a series needs at least one value")
        if self.step <= pd.Timedelta(0):
            raise ParameterError("step must be positive")

    def __len__(self) -> int:
        return self.values.size

    @property
    def timestamps(self) -> pd.DatetimeIndex:
        return pd.date_range(self.start, periods=len(self), freq=self.step)

    @property
    def end(self) -> pd.Timestamp:
        return self.start + (len(self) - 1) * self.step

    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.values)

    @property
    def n_missing(self) -> int:
        return int(np.isnan(self.values).sum())

    def is_contiguous(self) -> bool:
        return not np.isnan(self.values).any()

    def with_values(self, values: np.ndarray, indicator: str | None = None) -> "TimeSeries":
        """Same grid, different payload."""
        return replace(self, values=np.asarray(values, dtype=float),
                       indicator=self.indicator if indicator is None else indicator)

    def slice(self, i: int, j: int) -> "TimeSeries":
        if not 0 <= i < j <= len(self):
            raise ParameterError(f"bad slice [{i}:{j}] for length {len(self)}")
        return TimeSeries(self.indicator, self.start + i * self.step,
                          self.values[i:j].copy(), self.step, self.unit)

    def to_pandas(self) -> pd.Series:
        return pd.Series(self.values, index=self.timestamps, name=self.indicator)

    @classmethod
    def from_pandas(cls, s: pd.Series, indicator: str | None = None,
                    step: pd.Timedelta | None = None, unit: str = "") -> "TimeSeries":
        if len(s) == 0:
            raise ParameterError("empty series")
        if step is None:
            step = pd.Timedelta(s.index[1] - s.index[0]) if len(s) > 1 else DEFAULT_STEP
        return cls(indicator or (s.name or "value"), s.index[0],
                   s.to_numpy(dtype=float), step, unit)


def as_values(series) -> np.ndarray:
    """Accept a TimeSeries or a bare array; return the float value array."""
    if isinstance(series, TimeSeries):
        return series.values
    return np.asarray(series, dtype=float)


def wrap_like(template, values: np.ndarray, indicator: str | None = None):
    """Re-wrap values with the template's grid, or pass arrays through."""
    if isinstance(template, TimeSeries):
        return template.with_values(values, indicator=indicator)
    return np.asarray(values, dtype=float)


@dataclass
class SegmentationResult:
    """Gap-free segments plus the bookkeeping needed for the count identity:

    real + interpolated + dropped == grid length, where real + interpolated
    is the total sample count across segments.
    """

    segments: List[TimeSeries]
    interpolated: int
    dropped: int
    grid_length: int

    def __iter__(self) -> Iterator[TimeSeries]:
        return iter(self.segments)

    def __len__(self) -> int:
        return len(self.segments)

    def __getitem__(self, i):
        return self.segments[i]

    @property
    def total_samples(self) -> int:
        return sum(len(s) for s in self.segments)


def segment_contiguous(series: TimeSeries, max_gap: int = 0) -> SegmentationResult:
    """Split a gridded series into gap-free segments.

    Interior gaps of at most ``max_gap`` samples are closed by linear
    interpolation; longer gaps (and gaps touching either end, which have no
    anchor on one side) split the series.
    """
    if max_gap < 0:
        raise ParameterError("max_gap must be >= 0")
    vals = series.values.copy()
    n = vals.size
    missing = np.isnan(vals)
    interpolated = 0
    if missing.any() and max_gap > 0:
        idx = np.flatnonzero(missing)
        # group consecutive missing indices into runs
        splits = np.flatnonzero(np.diff(idx) > 1) + 1
        for run in np.split(idx, splits):
            a, b = run[0], run[-1]
            if a == 0 or b == n - 1 or run.size > max_gap:
                continue
            lo, hi = vals[a - 1], vals[b + 1]
            t = np.arange(1, run.size + 1) / (run.size + 1)
            vals[a:b + 1] = lo + t * (hi - lo)
            interpolated += run.size
    still_missing = np.isnan(vals)
    segments = []
    if (~still_missing).any():
        good = np.flatnonzero(~still_missing)
        splits = np.flatnonzero(np.diff(good) > 1) + 1
        for run in np.split(good, splits):
            a, b = run[0], run[-1]
            segments.append(TimeSeries(series.indicator, series.start + int(a) * series.step,
                                       vals[a:b + 1].copy(), series.step, series.unit))
    return SegmentationResult(segments, interpolated, int(still_missing.sum()), n)
