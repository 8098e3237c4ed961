import numpy as np
import pandas as pd
import pytest

from riverfluct import TimeSeries


def synth_indicator_frame(n: int = 1920, seed: int = 42,
                          start: str = "2021-03-01") -> pd.DataFrame:
    """Plausible multi-indicator telemetry on a 15-min grid: half-day and
    daily tones on DO, slow temperature drift, mild noise everywhere."""
    rng = np.random.default_rng(seed)
    idx = pd.date_range(start, periods=n, freq="15min")
    t = np.arange(n)
    half_day = 2 * np.pi * t / 48.0
    day = 2 * np.pi * t / 96.0
    frame = pd.DataFrame({
        "DOO-MGL": 9 + 1.2 * np.sin(half_day) + 0.5 * np.sin(day)
                   + 0.002 * t / 96 + 0.15 * rng.standard_normal(n),
        "TEMP": 12 + 3 * np.sin(2 * np.pi * t / (96 * 30)) + 0.1 * rng.standard_normal(n),
        "COND": 600 + 40 * np.sin(half_day + 0.7) + 5 * rng.standard_normal(n),
        "PH": 7.8 + 0.1 * np.sin(day) + 0.02 * rng.standard_normal(n),
        "AMMONIUM": np.abs(0.08 + 0.02 * rng.standard_normal(n)) + 1e-3,
        "TURBIDITY": np.abs(12 + 4 * rng.standard_normal(n)) + 1e-3,
    }, index=idx)
    frame.index.name = "timestamp"
    return frame


def synth_series_set(n: int = 1920, seed: int = 42, with_rainfall: bool = True):
    frame = synth_indicator_frame(n=n, seed=seed)
    step = pd.Timedelta(minutes=15)
    series = {col: TimeSeries(col, frame.index[0], frame[col].to_numpy(), step)
              for col in frame.columns}
    if with_rainfall:
        rng = np.random.default_rng(seed + 1)
        days = sorted(set(frame.index.date))
        daily = {d: round(float(rng.gamma(0.8, 3.0)), 2) for d in days}
        vals = np.array([daily[d] for d in frame.index.date])
        series["RAINFALL"] = TimeSeries("RAINFALL", frame.index[0], vals, step, "mm")
    return series


def write_raw_csv(path, frame: pd.DataFrame, sep: str = ";") -> None:
    out = frame.copy()
    out.insert(0, "timestamp", frame.index.strftime("%Y-%m-%d %H:%M:%S"))
    out.to_csv(path, sep=sep, index=False)


@pytest.fixture(scope="session")
def small_series_set():
    return synth_series_set(n=1920, seed=42)


@pytest.fixture()
def raw_site_csv(tmp_path):
    frame = synth_indicator_frame(n=960, seed=7)
    path = tmp_path / "SITEX_raw.csv"
    write_raw_csv(path, frame)
    return path
