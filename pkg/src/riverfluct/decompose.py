"""Trend/fluctuation decomposition: centered moving average or empirical mode
decomposition, in additive or multiplicative mode.

Conventions. A decomposition always satisfies trend (op) fluctuation == input,
with (op) = + or *. Unexplained remainder is never split out; the fluctuation
carries it. IMFs are emitted slowest first, so an m-mode detrend keeps
IMF_1..IMF_{N-m} as the trend and assigns the m fastest modes plus the sifting
residue to the fluctuation. Multiplicative EMD is the additive EMD of log(y),
exponentiated.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd
from scipy.interpolate import CubicSpline

from .errors import DomainError, GapError, InvalidWindowError, ParameterError
from .series import TimeSeries, as_values, wrap_like


@dataclass
class Decomposition:
    mode: str                 # additive | multiplicative
    method: str               # seasonal | emd
    trend: object             # TimeSeries or ndarray, matching the input
    fluctuation: object
    params: dict

    def recompose(self) -> np.ndarray:
        t, f = as_values(self.trend), as_values(self.fluctuation)
        return t + f if self.mode == "additive" else t * f


@dataclass
class EmdConfig:
    sd_threshold: float = 0.2
    max_sift_iters: int = 100
    max_imfs: int = 12
    boundary: str = "mirror"  # 2 extrema reflected per end

    def __post_init__(self):
        if not self.sd_threshold > 0:
            raise ParameterError("sd_threshold must be positive")
        if self.max_sift_iters < 1:
            raise ParameterError("max_sift_iters must be >= 1")
        if self.boundary != "mirror":
            raise ParameterError(f"unsupported boundary {self.boundary!r}")


@dataclass
class IMFSet:
    imfs: List           # slowest first; entries match the input type
    residue: object
    sift_stats: List[dict] = field(default_factory=list)
    degenerate: bool = False

    def __len__(self) -> int:
        return len(self.imfs)


_MODES = ("additive", "multiplicative")


def _check_mode(mode: str):
    if mode not in _MODES:
        raise ParameterError(f"mode must be one of {_MODES}, got {mode!r}")


def _check_contiguous(y: np.ndarray):
    if np.isnan(y).any():
        raise GapError("series has gaps; run segment_contiguous first")


def _check_positive(y: np.ndarray):
    bad = np.flatnonzero(~(y > 0.0))
    if bad.size:
        raise DomainError(
            f"multiplicative mode needs positive values; first offense at index {bad[0]} "
            f"(value {y[bad[0]]})", index=int(bad[0]))


def _window_samples(series, f) -> int:
    if isinstance(series, TimeSeries):
        f = pd.Timedelta(f)
        if f < series.step:
            raise InvalidWindowError(f"window {f} is shorter than the sampling step {series.step}")
        ratio = f / series.step
        w = round(ratio)
        if abs(ratio - w) > 1e-9:
            raise InvalidWindowError(f"window {f} is not a whole number of {series.step} steps")
        return int(w)
    w = int(f)
    if w != f or w < 1:
        raise InvalidWindowError(f"array input needs an integer window >= 1, got {f!r}")
    return w


def _centered_ma(y: np.ndarray, w: int) -> np.ndarray:
    n = y.size
    if w == 1:
        return y.copy()
    k = w // 2
    if w % 2 == 1:
        kernel = np.full(w, 1.0 / w)
    else:
        # even window: average of the two centered placements, i.e. half
        # weights on the outermost samples of a (w+1)-point stencil
        kernel = np.full(w + 1, 1.0 / w)
        kernel[0] = kernel[-1] = 0.5 / w
    if n < kernel.size:
        # series shorter than the stencil: every index is an end, the two
        # shrink loops below cover all of [0, n)
        out = np.empty(n)
    else:
        out = np.convolve(y, kernel, mode="same")
    for i in range(min(k, n)):
        kk = min(i, n - 1 - i)
        out[i] = y[i - kk:i + kk + 1].mean()
    for i in range(max(n - k, 0), n):
        kk = min(i, n - 1 - i)
        out[i] = y[i - kk:i + kk + 1].mean()
    return out


def moving_average_trend(series, f):
    """Centered moving average of window f.

    f is a duration for TimeSeries input (must be a whole positive number of
    grid steps) or an integer sample count for bare arrays. Ends are filled by
    shrinking the window symmetrically, so a constant series maps to itself
    everywhere.
    """
    y = as_values(series)
    _check_contiguous(y)
    w = _window_samples(series, f)
    return wrap_like(series, _centered_ma(y, w))


def seasonal_detrend(series, f, mode: str = "additive") -> Decomposition:
    _check_mode(mode)
    y = as_values(series)
    _check_contiguous(y)
    if mode == "multiplicative":
        _check_positive(y)
    trend = _centered_ma(y, _window_samples(series, f))
    fluct = y - trend if mode == "additive" else y / trend
    return Decomposition(mode=mode, method="seasonal",
                         trend=wrap_like(series, trend, indicator="trend"),
                         fluctuation=wrap_like(series, fluct, indicator="fluctuation"),
                         params={"f": str(f)})


def _extrema(x: np.ndarray):
    """Strict sign-change extrema of the first difference; a plateau counts
    once, at its midpoint. Returns (maxima_idx, minima_idx)."""
    d = np.diff(x)
    nz = np.flatnonzero(d)
    empty = np.empty(0, dtype=int)
    if nz.size < 2:
        return empty, empty
    s = np.sign(d[nz])
    chg = np.flatnonzero(s[:-1] != s[1:])
    if chg.size == 0:
        return empty, empty
    left = nz[chg]
    right = nz[chg + 1]
    mid = (left + 1 + right) // 2
    return mid[s[chg] > 0], mid[s[chg] < 0]


def _envelope(locs: np.ndarray, vals: np.ndarray, n: int) -> np.ndarray:
    # mirror-extend up to 2 extrema per end so the spline does not sag at the borders
    lpad = min(2, locs.size)
    ex_locs = np.concatenate([(-locs[:lpad])[::-1], locs, (2 * (n - 1) - locs[-lpad:])[::-1]])
    ex_vals = np.concatenate([vals[:lpad][::-1], vals, vals[-lpad:][::-1]])
    if ex_locs.size >= 4:
        spline = CubicSpline(ex_locs, ex_vals)
        return spline(np.arange(n))
    # too few knots for a cubic; degrade to linear interpolation
    return np.interp(np.arange(n), ex_locs, ex_vals)


def _sift(h0: np.ndarray, cfg: EmdConfig):
    """Extract one IMF by iterated envelope-mean subtraction; stops on the
    Cauchy criterion sum((h_prev - h_cur)^2) / sum(h_prev^2) < sd_threshold."""
    h = h0.copy()
    for it in range(1, cfg.max_sift_iters + 1):
        mx, mn = _extrema(h)
        if mx.size < 2 or mn.size < 2:
            return h, it - 1, "no_envelope"
        mean_env = 0.5 * (_envelope(mx, h[mx], h.size) + _envelope(mn, h[mn], h.size))
        h_new = h - mean_env
        denom = float(h @ h)
        sd = float(np.sum((h - h_new) ** 2) / denom) if denom > 0 else 0.0
        h = h_new
        if sd < cfg.sd_threshold:
            return h, it, "sd"
    return h, cfg.max_sift_iters, "max_iters"


def emd(series, config: Optional[EmdConfig] = None) -> IMFSet:
    """Empirical mode decomposition.

    Sifts off the fastest oscillation repeatedly; stops when the running
    residue has fewer than 3 extrema, cannot be enveloped, or max_imfs is
    reached. Degenerate inputs (short, or without 2 maxima and 2 minima)
    return zero IMFs with residue = input, flagged.
    """
    cfg = config or EmdConfig()
    y = as_values(series).astype(float)
    _check_contiguous(y)

    def finish(imfs_fast, residue, stats, degenerate):
        ordered = list(reversed(imfs_fast))  # slowest first
        return IMFSet(
            imfs=[wrap_like(series, v, indicator=f"imf_{i + 1}") for i, v in enumerate(ordered)],
            residue=wrap_like(series, residue, indicator="residue"),
            sift_stats=list(reversed(stats)),
            degenerate=degenerate)

    mx, mn = _extrema(y)
    if y.size < 10 or mx.size < 2 or mn.size < 2:
        return finish([], y.copy(), [], degenerate=True)

    imfs_fast: List[np.ndarray] = []
    stats: List[dict] = []
    residue = y.copy()
    while len(imfs_fast) < cfg.max_imfs:
        mx, mn = _extrema(residue)
        if mx.size + mn.size < 3 or mx.size < 2 or mn.size < 2:
            break
        imf, iters, reason = _sift(residue, cfg)
        imfs_fast.append(imf)
        stats.append({"iterations": iters, "stop": reason})
        residue = residue - imf
    if not imfs_fast:
        return finish([], y.copy(), [], degenerate=True)
    return finish(imfs_fast, residue, stats, degenerate=False)


def emd_detrend(series, m: int, mode: str = "additive",
                config: Optional[EmdConfig] = None) -> Decomposition:
    """Detrend by dropping the m fastest modes from the trend.

    Additive: trend = IMF_1 + .. + IMF_{N-m}; fluctuation = the m fastest IMFs
    plus the residue. Multiplicative: the same split applied to log(y), then
    exponentiated, so trend * fluctuation == y.
    """
    _check_mode(mode)
    y = as_values(series)
    _check_contiguous(y)
    if mode == "multiplicative":
        _check_positive(y)
        work = np.log(y)
    else:
        work = y

    imfset = emd(wrap_like(series, work) if isinstance(series, TimeSeries) else work, config)
    n_imfs = len(imfset)
    if not 1 <= m <= n_imfs:
        raise ParameterError(f"m={m} out of range: decomposition produced N={n_imfs} IMFs")

    vals = [as_values(s) for s in imfset.imfs]
    residue = as_values(imfset.residue)
    trend = np.sum(vals[:n_imfs - m], axis=0) if n_imfs - m > 0 else np.zeros_like(residue)
    fluct = np.sum(vals[n_imfs - m:], axis=0) + residue
    if mode == "multiplicative":
        trend, fluct = np.exp(trend), np.exp(fluct)
    return Decomposition(mode=mode, method="emd",
                         trend=wrap_like(series, trend, indicator="trend"),
                         fluctuation=wrap_like(series, fluct, indicator="fluctuation"),
                         params={"m": m, "n_imfs": n_imfs})
