"""Raw sensor CSV ingestion, cleaning rules, rainfall pairing, site catalogs.

The cleaning stage applies, in order: a DO plausibility ceiling, removal of
non-positive values for indicators where zero is physically meaningless, an
EC unit harmonization (mS/cm to uS/cm), configured exclusion windows (e.g.
maintenance periods with artificial aeration), and a rolling-median spike
filter. Survivors are regridded onto the 15-minute grid with missing slots
explicit. Every removal is counted per rule so raw = removed + surviving
holds per indicator.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import os
import warnings
from dataclasses import dataclass, field
from datetime import date
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from .errors import EmptyInputError, ParameterError, SchemaError
from .series import DEFAULT_STEP, TimeSeries

log = logging.getLogger(__name__)

KNOWN_INDICATORS = ("DOO-MGL", "TEMP", "COND", "PH", "AMMONIUM", "TURBIDITY")
UNITS = {"DOO-MGL": "mg/L", "TEMP": "degC", "COND": "uS/cm", "PH": "",
         "AMMONIUM": "mg/L", "TURBIDITY": "NTU", "RAINFALL": "mm"}


@dataclass
class RawRecord:
    timestamp: pd.Timestamp
    values: Dict[str, float]   # indicator -> value; missing indicators absent


@dataclass
class SiteMeta:
    site_code: str
    name: str
    latitude: float
    longitude: float
    dist_to_sea_km: float
    rainfall_station: str = ""

    def __post_init__(self):
        if self.dist_to_sea_km < 0:
            raise ParameterError(f"{self.site_code}: dist_to_sea_km must be >= 0")


@dataclass
class CleanConfig:
    do_max: float = 25.0
    drop_nonpositive: Tuple[str, ...] = ("COND", "PH", "AMMONIUM", "TURBIDITY", "DOO-MGL")
    exclusion_windows: Tuple[Tuple[str, str], ...] = ()   # (start, end) inclusive
    spike_window: int = 97
    spike_k: float = 6.0
    ec_unit: Optional[str] = None        # "uS/cm" | "mS/cm" | None (autodetect)
    ec_unit_autodetect: bool = True

    def __post_init__(self):
        if not self.do_max > 0:
            raise ParameterError("do_max must be positive")
        if self.spike_window % 2 == 0 or self.spike_window < 3:
            raise ParameterError("spike_window must be odd and >= 3")
        if not self.spike_k > 0:
            raise ParameterError("spike_k must be positive")
        if self.ec_unit not in (None, "uS/cm", "mS/cm"):
            raise ParameterError(f"unknown EC unit {self.ec_unit!r}")


@dataclass
class CleanReport:
    raw_counts: Dict[str, int] = field(default_factory=dict)
    removed: Dict[str, Dict[str, int]] = field(default_factory=dict)
    converted: Dict[str, int] = field(default_factory=dict)
    surviving: Dict[str, int] = field(default_factory=dict)
    gaps: Dict[str, Dict[str, int]] = field(default_factory=dict)
    empty_indicators: List[str] = field(default_factory=list)

    def removed_total(self, indicator: str) -> int:
        return sum(self.removed.get(indicator, {}).values())

    def to_dict(self) -> dict:
        return {"raw_counts": self.raw_counts, "removed": self.removed,
                "converted": self.converted, "surviving": self.surviving,
                "gaps": self.gaps, "empty_indicators": self.empty_indicators}


@dataclass
class ParseResult:
    records: List[RawRecord]
    malformed_rows: int
    duplicates_dropped: int

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


def _default_schema(header: List[str]) -> Dict[str, str]:
    schema = {}
    for col in header:
        if col.strip().lower() == "timestamp":
            schema[col] = "timestamp"
        elif col.strip() in KNOWN_INDICATORS:
            schema[col] = col.strip()
    return schema


def parse_site_csv(data, schema: Optional[Mapping[str, str]] = None) -> ParseResult:
    """Parse delimiter-separated sensor text into timestamp-sorted records.

    schema maps raw column names to canonical indicator names ("timestamp"
    for the time column). Rows with an unparseable timestamp or no parseable
    indicator value are counted and skipped; a bad cell inside an otherwise
    good row only loses that cell. Duplicate timestamps keep the last
    occurrence (re-transmissions supersede).
    """
    if isinstance(data, bytes):
        text = data.decode("utf-8")
    elif isinstance(data, os.PathLike):
        text = open(data, "r", encoding="utf-8").read()
    elif isinstance(data, str):
        text = open(data, "r", encoding="utf-8").read() if "\n" not in data and os.path.exists(data) else data
    else:
        raise SchemaError(f"cannot parse input of type {type(data).__name__}")

    first_line = text.splitlines()[0] if text.strip() else ""
    delim = ","
    for cand in (";", "\t", ","):
        if cand in first_line:
            delim = cand
            break
    reader = csv.reader(io.StringIO(text), delimiter=delim)
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyInputError("input has no header row")

    mapping = dict(schema) if schema is not None else _default_schema(header)
    colmap = {}   # column index -> canonical name
    for i, col in enumerate(header):
        name = mapping.get(col) or mapping.get(col.strip())
        if name:
            colmap[i] = name
    ts_cols = [i for i, name in colmap.items() if name == "timestamp"]
    if not ts_cols:
        raise SchemaError("no timestamp column found in header")
    ts_col = ts_cols[0]
    value_cols = {i: name for i, name in colmap.items() if name != "timestamp"}

    by_ts: Dict[pd.Timestamp, Dict[str, float]] = {}
    malformed = 0
    n_valid_rows = 0
    for row in reader:
        if not row or all(not cell.strip() for cell in row):
            continue
        try:
            ts = pd.Timestamp(row[ts_col])
            if pd.isna(ts):
                raise ValueError
        except (ValueError, IndexError, TypeError, pd.errors.OutOfBoundsDatetime):
            malformed += 1
            continue
        values = {}
        for i, name in value_cols.items():
            if i >= len(row) or not row[i].strip():
                continue
            try:
                v = float(row[i])
            except ValueError:
                continue   # cell-level failure, row survives
            if np.isfinite(v):
                values[name] = v
        if not values:
            malformed += 1
            continue
        n_valid_rows += 1
        by_ts[ts] = values   # keep last on duplicates

    if not by_ts:
        raise EmptyInputError("zero parseable rows")
    records = [RawRecord(ts, by_ts[ts]) for ts in sorted(by_ts)]
    return ParseResult(records=records, malformed_rows=malformed,
                       duplicates_dropped=n_valid_rows - len(records))


def records_to_frame(records: List[RawRecord]) -> pd.DataFrame:
    idx = pd.DatetimeIndex([r.timestamp for r in records])
    cols = sorted({k for r in records for k in r.values})
    frame = pd.DataFrame(
        {c: [r.values.get(c, np.nan) for r in records] for c in cols},
        index=idx, dtype=float)
    return frame


def frame_to_records(frame: pd.DataFrame) -> List[RawRecord]:
    records = []
    for ts, row in frame.iterrows():
        vals = {k: float(v) for k, v in row.items() if np.isfinite(v)}
        if vals:
            records.append(RawRecord(pd.Timestamp(ts), vals))
    return records


def _hampel_mask(x: np.ndarray, window: int, k: float) -> np.ndarray:
    """True where |x - rolling median| > k * rolling MAD, window-local stats.

    Mirror padding gives every sample a full window; windows with zero MAD
    flag nothing (no evidence of spread to judge against).
    """
    n = x.size
    out = np.zeros(n, dtype=bool)
    half = min(window // 2, n - 1)
    if half < 1 or n < 3:
        return out
    padded = np.pad(x, half, mode="reflect")
    windows = sliding_window_view(padded, 2 * half + 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        med = np.nanmedian(windows, axis=1)
        mad = np.nanmedian(np.abs(windows - med[:, None]), axis=1)
    dev = np.abs(x - med)
    valid = ~np.isnan(x) & np.isfinite(med) & np.isfinite(mad)
    return valid & (mad > 0) & (dev > k * mad)


def _snap_to_grid(frame: pd.DataFrame, step: pd.Timedelta) -> pd.DataFrame:
    snapped = frame.copy()
    snapped.index = snapped.index.round(step)
    snapped = snapped[~snapped.index.duplicated(keep="last")]
    return snapped.sort_index()


def clean(records, config: Optional[CleanConfig] = None,
          step: pd.Timedelta = DEFAULT_STEP) -> Tuple[Dict[str, TimeSeries], CleanReport]:
    """Apply the cleaning rules and regrid onto the sampling grid.

    Accepts the output of parse_site_csv (or a ParseResult). Returns one
    TimeSeries per indicator plus a CleanReport; an indicator whose values
    are all removed is flagged empty, not fatal.
    """
    cfg = config or CleanConfig()
    if isinstance(records, ParseResult):
        records = records.records
    frame = records if isinstance(records, pd.DataFrame) else records_to_frame(records)
    if frame.empty:
        raise EmptyInputError("no records to clean")
    frame = _snap_to_grid(frame, step)

    report = CleanReport()
    for col in frame.columns:
        report.raw_counts[col] = int(frame[col].notna().sum())
        report.removed[col] = {}

    def remove(col: str, mask: np.ndarray, rule: str):
        mask = mask & frame[col].notna().to_numpy()
        n = int(mask.sum())
        if n:
            frame.loc[mask, col] = np.nan
            report.removed[col][rule] = report.removed[col].get(rule, 0) + n

    if "DOO-MGL" in frame.columns:
        remove("DOO-MGL", (frame["DOO-MGL"] > cfg.do_max).to_numpy(), "do_max")

    for col in cfg.drop_nonpositive:
        if col in frame.columns:
            remove(col, (frame[col] <= 0.0).to_numpy(), "non_positive")

    if "COND" in frame.columns:
        ec = frame["COND"]
        convert = cfg.ec_unit == "mS/cm"
        if cfg.ec_unit is None and cfg.ec_unit_autodetect:
            positive = ec[ec > 0]
            # river EC in uS/cm is O(100..10000); a median under 100 means mS/cm
            convert = len(positive) > 0 and float(positive.median()) < 100.0
        if convert:
            frame["COND"] = ec * 1000.0
            report.converted["COND"] = int(ec.notna().sum())

    for start, end in cfg.exclusion_windows:
        lo, hi = pd.Timestamp(start), pd.Timestamp(end)
        in_window = np.asarray((frame.index >= lo) & (frame.index <= hi))
        if in_window.any():
            for col in frame.columns:
                remove(col, in_window, "exclusion")

    for col in frame.columns:
        x = frame[col].to_numpy(dtype=float)
        remove(col, _hampel_mask(x, cfg.spike_window, cfg.spike_k), "spike")

    grid = pd.date_range(frame.index.min(), frame.index.max(), freq=step)
    frame = frame.reindex(grid)

    series_set: Dict[str, TimeSeries] = {}
    for col in frame.columns:
        vals = frame[col].to_numpy(dtype=float)
        report.surviving[col] = int(np.isfinite(vals).sum())
        missing = np.isnan(vals)
        runs = int(np.sum(np.diff(np.concatenate([[0], missing.astype(int)])) == 1))
        report.gaps[col] = {"missing": int(missing.sum()), "runs": runs}
        if report.surviving[col] == 0:
            report.empty_indicators.append(col)
            log.warning("indicator %s: all values removed", col)
        series_set[col] = TimeSeries(col, grid[0], vals, step, UNITS.get(col, ""))
    return series_set, report


def attach_rainfall(series_set: Dict[str, TimeSeries],
                    rainfall: Mapping) -> Dict[str, TimeSeries]:
    """Broadcast daily rainfall totals onto the 15-minute grid.

    Every sample of a calendar day carries that day's total; days absent from
    the rainfall input yield missing values.
    """
    if not series_set:
        raise EmptyInputError("empty series set")
    ref = next(iter(series_set.values()))
    daily = {}
    for key, val in rainfall.items():
        d = key if isinstance(key, date) and not isinstance(key, pd.Timestamp) else pd.Timestamp(key).date()
        daily[d] = float(val)
    days = ref.timestamps.date
    vals = np.array([daily.get(d, np.nan) for d in days], dtype=float)
    out = dict(series_set)
    out["RAINFALL"] = TimeSeries("RAINFALL", ref.start, vals, ref.step, UNITS["RAINFALL"])
    return out


def load_site_catalog(path) -> List[SiteMeta]:
    """JSON array with keys site_code, name, lat, lon, dist_to_sea_km, rainfall_station."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise SchemaError("site catalog must be a JSON array")
    sites = []
    seen = set()
    for entry in raw:
        try:
            site = SiteMeta(site_code=entry["site_code"], name=entry.get("name", ""),
                            latitude=float(entry.get("lat", entry.get("latitude", 0.0))),
                            longitude=float(entry.get("lon", entry.get("longitude", 0.0))),
                            dist_to_sea_km=float(entry["dist_to_sea_km"]),
                            rainfall_station=entry.get("rainfall_station", ""))
        except KeyError as exc:
            raise SchemaError(f"site entry missing key {exc}")
        if site.site_code in seen:
            raise SchemaError(f"duplicate site_code {site.site_code}")
        seen.add(site.site_code)
        sites.append(site)
    return sites


def load_rainfall_csv(path) -> Dict[date, float]:
    """Columns date (YYYY-MM-DD) and rainfall_mm."""
    out: Dict[date, float] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "date" not in reader.fieldnames \
                or "rainfall_mm" not in reader.fieldnames:
            raise SchemaError("rainfall CSV needs columns date, rainfall_mm")
        for row in reader:
            try:
                out[pd.Timestamp(row["date"]).date()] = float(row["rainfall_mm"])
            except (ValueError, TypeError):
                continue
    return out


def series_set_to_frame(series_set: Dict[str, TimeSeries]) -> pd.DataFrame:
    ref = next(iter(series_set.values()))
    frame = pd.DataFrame(index=ref.timestamps)
    frame.index.name = "timestamp"
    for name, s in series_set.items():
        if len(s) != len(ref) or s.start != ref.start:
            raise ParameterError(f"series {name} is not on the shared grid")
        frame[name] = s.values
    return frame


def write_clean_csv(series_set: Dict[str, TimeSeries], path) -> None:
    frame = series_set_to_frame(series_set)
    frame.to_csv(path, date_format="%Y-%m-%dT%H:%M:%S")


def read_clean_csv(path, step: pd.Timedelta = DEFAULT_STEP) -> Dict[str, TimeSeries]:
    frame = pd.read_csv(path, parse_dates=["timestamp"], index_col="timestamp")
    if frame.empty:
        raise EmptyInputError(f"{path}: no rows")
    if len(frame) > 1:
        deltas = np.unique(np.diff(frame.index.to_numpy()))
        if len(deltas) != 1:
            raise SchemaError(f"{path}: timestamps are not regularly gridded")
        step = pd.Timedelta(deltas[0])
    return {col: TimeSeries(col, frame.index[0], frame[col].to_numpy(dtype=float),
                            step, UNITS.get(col, ""))
            for col in frame.columns}
