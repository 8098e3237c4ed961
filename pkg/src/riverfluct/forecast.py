"""Forecasting protocol: chronological splits, train-only normalization, the
fourteen-covariate feature matrix, FFT periodicity detection, sliding windows,
the Last/Repeat/Linear baselines, a same-time linear regressor, and MAE/SMAPE
evaluation tables.

Covariate order (column 0 is always the forecast target DO):

    DOO-MGL, TEMP, COND, PH, AMMONIUM, TURBIDITY, RAINFALL,
    hour, dow, month (each scaled into [-0.5, 0.5]),
    sin/cos of the half-day phase, sin/cos of the year phase.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from .errors import (DataError, GapError, InsufficientDataError, NumericalError,
                     ParameterError, RiverfluctError)
from .series import TimeSeries, as_values

COVARIATES = ("DOO-MGL", "TEMP", "COND", "PH", "AMMONIUM", "TURBIDITY", "RAINFALL",
              "hour", "dow", "month", "halfday_sin", "halfday_cos", "year_sin", "year_cos")
INDICATOR_COVARIATES = COVARIATES[:7]
DO_COL = 0
HALF_DAY_SECONDS = 43200.0
YEAR_SECONDS = 365.2425 * 86400.0

PAPER_INPUT_LENS = (48, 96, 192)
PAPER_HORIZONS = (1, 12, 24, 48)


@dataclass(frozen=True)
class SplitSpec:
    """Chronological (train, val, test) fractions; blocks are never shuffled."""

    fractions: Tuple[float, float, float] = (0.70, 0.20, 0.10)

    def __post_init__(self):
        if len(self.fractions) != 3 or any(f < 0 for f in self.fractions):
            raise ParameterError("fractions must be three non-negative numbers")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ParameterError(f"fractions must sum to 1, got {sum(self.fractions)}")


FORECAST_SPLIT = SplitSpec((0.70, 0.20, 0.10))
REGRESSION_SPLIT = SplitSpec((0.80, 0.0, 0.20))
_BLOCK_NAMES = ("train", "val", "test")


def split_indices(n: int, spec: SplitSpec) -> Tuple[int, int]:
    # n*f1 + n*f2 rather than n*(f1+f2): the pre-summed fractions can land a
    # hair under the exact cumulative value and floor one row short
    f1, f2, _ = spec.fractions
    return math.floor(n * f1), math.floor(n * f1 + n * f2)


def chronological_split(x, spec: SplitSpec = FORECAST_SPLIT,
                        min_block: Optional[int] = None):
    """Cut rows into contiguous train/val/test blocks, in time order.

    With min_block set, any block whose fraction is positive but whose length
    falls short raises, naming the block.
    """
    n = len(x)
    i1, i2 = split_indices(n, spec)
    blocks = (x[:i1], x[i1:i2], x[i2:])
    if min_block is not None:
        for name, frac, block in zip(_BLOCK_NAMES, spec.fractions, blocks):
            if frac > 0 and len(block) < min_block:
                raise InsufficientDataError(
                    f"{name} block has {len(block)} samples, needs {min_block}")
    return blocks


def _time_features(idx: pd.DatetimeIndex) -> np.ndarray:
    secs_of_day = ((idx - idx.normalize()).total_seconds()).to_numpy(dtype=float)
    hour = secs_of_day / 86400.0 - 0.5
    dow = idx.dayofweek.to_numpy(dtype=float) / 7.0 - 0.5
    month = (idx.month.to_numpy(dtype=float) - 1.0) / 12.0 - 0.5
    theta = 2.0 * np.pi * np.mod(secs_of_day, HALF_DAY_SECONDS) / HALF_DAY_SECONDS
    year_start = pd.to_datetime(idx.year.astype(str))
    secs_of_year = ((idx - pd.DatetimeIndex(year_start)).total_seconds()).to_numpy(dtype=float)
    phi = 2.0 * np.pi * secs_of_year / YEAR_SECONDS
    return np.column_stack([hour, dow, month,
                            np.sin(theta), np.cos(theta), np.sin(phi), np.cos(phi)])


def build_covariates(timestamp, indicator_values: Mapping[str, float]) -> np.ndarray:
    """One 14-entry covariate vector for a single instant."""
    idx = pd.DatetimeIndex([pd.Timestamp(timestamp)])
    tf = _time_features(idx)[0]
    ind = np.array([float(indicator_values.get(k, np.nan)) for k in INDICATOR_COVARIATES])
    return np.concatenate([ind, tf])


def covariate_matrix(series_set: Dict[str, TimeSeries]) -> Tuple[pd.DatetimeIndex, np.ndarray]:
    """Stack the 7 indicator series and the 7 calendar/phase encodings into an
    (n, 14) matrix on the shared grid."""
    missing = [k for k in INDICATOR_COVARIATES if k not in series_set]
    if missing:
        raise DataError(f"series set lacks indicators: {', '.join(missing)}")
    ref = series_set[INDICATOR_COVARIATES[0]]
    idx = ref.timestamps
    cols = []
    for k in INDICATOR_COVARIATES:
        s = series_set[k]
        if len(s) != len(ref) or s.start != ref.start:
            raise DataError(f"indicator {k} is not on the shared grid")
        cols.append(s.values)
    return idx, np.column_stack(cols + [_time_features(idx)])


@dataclass
class NormStats:
    """Per-covariate mean/std from the training split only. Constant covariates
    are flagged and passed through unscaled."""

    mean: np.ndarray
    std: np.ndarray
    constant_mask: np.ndarray

    @property
    def effective_std(self) -> np.ndarray:
        return np.where(self.constant_mask, 1.0, self.std)


def fit_norm_stats(train: np.ndarray) -> NormStats:
    # all-NaN columns warn and yield NaN here; the finite-mask fallback below
    # is the intended handling, so the warnings carry no information
    with np.errstate(invalid="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mean = np.nanmean(train, axis=0)
        std = np.nanstd(train, axis=0)
    mean = np.where(np.isfinite(mean), mean, 0.0)
    # constant columns have std 0 up to accumulation noise from nanmean
    constant = ~np.isfinite(std) | (std <= 1e-12 * np.maximum(np.abs(mean), 1.0))
    std = np.where(np.isfinite(std), std, 0.0)
    return NormStats(mean=mean, std=std, constant_mask=constant)


def zscore(x: np.ndarray, stats: NormStats) -> np.ndarray:
    return (x - stats.mean) / stats.effective_std


def inverse_zscore(z: np.ndarray, stats: NormStats) -> np.ndarray:
    return z * stats.effective_std + stats.mean


def fft_dominant_periods(series, top_k: int = 5) -> List[Tuple[float, float]]:
    """Ranked local maxima of the magnitude spectrum of the mean-removed
    series; returns (period in samples, magnitude), strongest first."""
    y = as_values(series)
    if np.isnan(y).any():
        raise GapError("series has gaps; interpolate or split with segment_contiguous first")
    n = y.size
    if n < 4:
        raise DataError("series too short for a spectrum")
    if top_k < 1:
        raise ParameterError("top_k must be >= 1")
    mag = np.abs(np.fft.rfft(y - y.mean()))
    interior = np.arange(1, mag.size - 1)
    is_peak = (mag[interior] > mag[interior - 1]) & (mag[interior] > mag[interior + 1])
    peaks = interior[is_peak]
    order = peaks[np.argsort(-mag[peaks], kind="stable")][:top_k]
    return [(n / float(k), float(mag[k])) for k in order]


@dataclass
class WindowSet:
    """Stride-1 sliding windows over contiguous stretches of finite rows.

    inputs: (n, input_len, 14); targets: (n, horizon) of the DO column;
    end_times holds the timestamp of each window's last input step (the
    forecast origin). ``order`` is the seed-shuffled iteration order used by
    batches(). Windows containing any missing covariate are never built.
    """

    inputs: np.ndarray
    targets: np.ndarray
    end_times: np.ndarray
    input_len: int
    horizon: int
    batch_size: int
    seed: int
    order: np.ndarray
    skipped_segments: int
    paper_grid: bool

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def batches(self):
        for i in range(0, len(self), self.batch_size):
            sel = self.order[i:i + self.batch_size]
            yield self.inputs[sel], self.targets[sel]


def _finite_runs(finite: np.ndarray) -> List[Tuple[int, int]]:
    runs = []
    idx = np.flatnonzero(finite)
    if idx.size == 0:
        return runs
    splits = np.flatnonzero(np.diff(idx) > 1) + 1
    for run in np.split(idx, splits):
        runs.append((int(run[0]), int(run[-1]) + 1))
    return runs


def make_windows(x: np.ndarray, timestamps, input_len: int, horizon: int,
                 batch_size: int = 32, seed: int = 0, do_col: int = DO_COL) -> WindowSet:
    if input_len < 1 or horizon < 1:
        raise ParameterError("input_len and horizon must be >= 1")
    paper_grid = input_len in PAPER_INPUT_LENS and horizon in PAPER_HORIZONS
    x = np.asarray(x, dtype=float)
    ts = np.asarray(timestamps)
    finite = np.isfinite(x).all(axis=1)
    need = input_len + horizon
    ins, tgts, ends = [], [], []
    skipped = 0
    for a, b in _finite_runs(finite):
        if b - a < need:
            skipped += 1
            continue
        seg = x[a:b]
        wins = sliding_window_view(seg, (input_len, x.shape[1]))[:, 0]
        n_w = (b - a) - need + 1
        ins.append(wins[:n_w])
        do = seg[:, do_col]
        tgt = sliding_window_view(do, horizon)[input_len:input_len + n_w]
        tgts.append(tgt)
        ends.append(ts[a + input_len - 1: a + input_len - 1 + n_w])
    if ins:
        inputs = np.concatenate(ins).copy()
        targets = np.concatenate(tgts).copy()
        end_times = np.concatenate(ends)
    else:
        inputs = np.empty((0, input_len, x.shape[1]))
        targets = np.empty((0, horizon))
        end_times = np.empty((0,), dtype=ts.dtype if ts.size else object)
    order = np.random.default_rng(seed).permutation(inputs.shape[0])
    return WindowSet(inputs=inputs, targets=targets, end_times=end_times,
                     input_len=input_len, horizon=horizon, batch_size=batch_size,
                     seed=seed, order=order, skipped_segments=skipped,
                     paper_grid=paper_grid)


def predict_last(inputs: np.ndarray, horizon: int, do_col: int = DO_COL) -> np.ndarray:
    """Repeat the final observed DO value across the horizon."""
    last = inputs[:, -1, do_col]
    return np.repeat(last[:, None], horizon, axis=1)


def predict_repeat(inputs: np.ndarray, horizon: int, do_col: int = DO_COL) -> np.ndarray:
    """Replay the previous half-day: DO inputs at [L-48, L-48+horizon)."""
    input_len = inputs.shape[1]
    if input_len < 48:
        raise ParameterError(f"repeat baseline needs input_len >= 48, got {input_len}")
    if horizon > 48:
        raise ParameterError("repeat baseline replays at most one half-day (horizon <= 48)")
    return inputs[:, input_len - 48:input_len - 48 + horizon, do_col]


def _ridge_solve(a: np.ndarray, y: np.ndarray, ridge: float) -> np.ndarray:
    gram = a.T @ a + ridge * np.eye(a.shape[1])
    try:
        w = np.linalg.solve(gram, a.T @ y)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"normal equations are singular: {exc}")
    if not np.isfinite(w).all():
        raise NumericalError("least-squares solution is non-finite")
    return w


@dataclass
class LinearForecaster:
    """Least-squares map from the last input step's 14 covariates (+bias) to
    the horizon outputs, solved via ridge-stabilized normal equations."""

    weights: np.ndarray   # (15, horizon)
    horizon: int

    @classmethod
    def fit(cls, windows: WindowSet, ridge: float = 1e-6) -> "LinearForecaster":
        n = len(windows)
        k = windows.inputs.shape[2]
        if n < k + 1:
            raise InsufficientDataError(f"linear baseline needs >= {k + 1} windows, got {n}")
        a = np.hstack([windows.inputs[:, -1, :], np.ones((n, 1))])
        w = _ridge_solve(a, windows.targets, ridge)
        return cls(weights=w, horizon=windows.horizon)

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        a = np.hstack([inputs[:, -1, :], np.ones((inputs.shape[0], 1))])
        return a @ self.weights


def mae(y, yhat) -> float:
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape:
        raise DataError(f"shape mismatch {y.shape} vs {yhat.shape}")
    if y.size == 0:
        raise DataError("empty inputs")
    return float(np.mean(np.abs(y - yhat)))


def smape(y, yhat) -> float:
    """100 * mean(|y - yhat| / (|y| + |yhat|)); 0/0 pairs contribute 0."""
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape:
        raise DataError(f"shape mismatch {y.shape} vs {yhat.shape}")
    if y.size == 0:
        raise DataError("empty inputs")
    denom = np.abs(y) + np.abs(yhat)
    with np.errstate(invalid="ignore", divide="ignore"):
        terms = np.where(denom > 0, np.abs(y - yhat) / denom, 0.0)
    return float(100.0 * np.mean(terms))


BASELINES = ("last", "repeat", "linear")


@dataclass
class MetricsTable:
    """Rows keyed (input_len, horizon, model). Each row carries physical-unit
    and normalized MAE/SMAPE, averaged over the evaluation repetitions."""

    rows: Dict[Tuple[int, int, str], Dict[str, float]]
    repetitions: int
    errors: Dict[Tuple[int, int, str], str] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        cells = sorted({(lh[0], lh[1]) for lh in self.rows})
        models = sorted({k[2] for k in self.rows})
        index = [f"{l}_{h}" for l, h in cells]
        frame = pd.DataFrame(index=index)
        frame.index.name = "input_pred"
        for m in models:
            for metric in ("mae", "smape", "mae_norm", "smape_norm"):
                frame[f"{m}_{metric}"] = [
                    self.rows.get((l, h, m), {}).get(metric, np.nan) for l, h in cells]
        return frame


def evaluate_baselines(x: np.ndarray, timestamps,
                       input_lens: Sequence[int] = PAPER_INPUT_LENS,
                       horizons: Sequence[int] = PAPER_HORIZONS,
                       models: Sequence[str] = BASELINES,
                       repetitions: int = 5, seed: int = 0,
                       spec: SplitSpec = FORECAST_SPLIT,
                       batch_size: int = 32) -> MetricsTable:
    """Full protocol: split chronologically, normalize with train-only stats,
    window each block, run every model over the evaluation grid, and average
    metrics over the repetitions (deterministic baselines repeat identically).

    Metrics are computed on de-normalized DO (physical units) and, alongside,
    on the normalized scale (the *_norm columns).
    """
    x = np.asarray(x, dtype=float)
    ts = np.asarray(timestamps)
    train, _, test = chronological_split(x, spec)
    i1, i2 = split_indices(len(x), spec)
    stats = fit_norm_stats(train)
    z = zscore(x, stats)
    do_mean = stats.mean[DO_COL]
    do_std = stats.effective_std[DO_COL]

    rows: Dict[Tuple[int, int, str], Dict[str, float]] = {}
    errors: Dict[Tuple[int, int, str], str] = {}
    for input_len in input_lens:
        for horizon in horizons:
            train_ws = make_windows(z[:i1], ts[:i1], input_len, horizon,
                                    batch_size=batch_size, seed=seed)
            test_ws = make_windows(z[i2:], ts[i2:], input_len, horizon,
                                   batch_size=batch_size, seed=seed)
            for model in models:
                acc: List[Tuple[float, float, float, float]] = []
                try:
                    for _ in range(repetitions):
                        if model == "last":
                            pred = predict_last(test_ws.inputs, horizon)
                        elif model == "repeat":
                            pred = predict_repeat(test_ws.inputs, horizon)
                        elif model == "linear":
                            lf = LinearForecaster.fit(train_ws)
                            pred = lf.predict(test_ws.inputs)
                        else:
                            raise ParameterError(f"unknown model {model!r}")
                        tgt = test_ws.targets
                        y_phys = tgt * do_std + do_mean
                        p_phys = pred * do_std + do_mean
                        acc.append((mae(y_phys, p_phys), smape(y_phys, p_phys),
                                    mae(tgt, pred), smape(tgt, pred)))
                except RiverfluctError as exc:
                    errors[(input_len, horizon, model)] = str(exc)
                    continue
                arr = np.array(acc)
                rows[(input_len, horizon, model)] = {
                    "mae": float(arr[:, 0].mean()), "smape": float(arr[:, 1].mean()),
                    "mae_norm": float(arr[:, 2].mean()), "smape_norm": float(arr[:, 3].mean()),
                }
    return MetricsTable(rows=rows, repetitions=repetitions, errors=errors)


@dataclass
class RegressionResult:
    smape: float
    mae: float
    n_train: int
    n_test: int
    coef: np.ndarray   # 13 covariate weights + bias


def same_time_regression(x: np.ndarray, spec: SplitSpec = REGRESSION_SPLIT,
                         ridge: float = 1e-6) -> RegressionResult:
    """OLS of same-time DO on the 13 non-DO covariates plus bias, evaluated as
    SMAPE (percent) on the chronological test block."""
    x = np.asarray(x, dtype=float)
    rows = x[np.isfinite(x).all(axis=1)]
    if rows.shape[0] < 20:
        raise InsufficientDataError("too few complete rows for the regression")
    train, _, test = chronological_split(rows, spec)
    if len(test) == 0:
        raise InsufficientDataError("test block is empty")
    a_train = np.hstack([train[:, 1:], np.ones((len(train), 1))])
    w = _ridge_solve(a_train, train[:, DO_COL], ridge)
    a_test = np.hstack([test[:, 1:], np.ones((len(test), 1))])
    pred = a_test @ w
    return RegressionResult(smape=smape(test[:, DO_COL], pred),
                            mae=mae(test[:, DO_COL], pred),
                            n_train=len(train), n_test=len(test), coef=w)
