"""Command-line surface.

Each subcommand reads its inputs, runs the matching library operations, and
writes CSV/JSON artifacts into --out. `report` aggregates the per-stage
artifacts into one JSON bundle and renders the figures.

Option precedence: built-in defaults < config file < explicit flags. The
config file is JSON; a top-level key applies to every subcommand that knows
it, a nested section (keyed by subcommand name) applies to that subcommand
only. Exit codes: 0 success, 1 data/IO errors (message on stderr), 2 usage.
"""
from __future__ import annotations

import argparse
import glob
import json
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from . import attention as attn
from . import data as datamod
from . import decompose, forecast, superstat
from .errors import (DataError, EmptyInputError, InsufficientDataError,
                     ParameterError, RiverfluctError)
from .series import segment_contiguous

_DEFAULTS: Dict[str, Dict] = {
    "clean": {"input": None, "schema": None, "rainfall": None, "site": None,
              "do_max": 25.0, "spike_window": 97, "spike_k": 6.0,
              "ec_unit": None, "exclude": [], "out": ".", "seed": 0},
    "detrend": {"input": None, "indicator": "DOO-MGL", "method": "emd",
                "mode": "additive", "f": "6h", "m": 3, "max_gap": 0,
                "site": None, "out": ".", "seed": 0},
    "fit": {"input": None, "column": None, "site": None, "label": None,
            "bins": 60, "out": ".", "seed": 0},
    "compare": {"input": None, "indicator": "DOO-MGL", "methods": "all",
                "f": "6h", "m": 3, "max_gap": 0, "site": None, "out": ".", "seed": 0},
    "simulate": {"n_dof": None, "beta0": 1.0, "count": 100000, "block_len": 1,
                 "tag": None, "out": ".", "seed": 0},
    "features": {"input": None, "indicator": "DOO-MGL", "fft": False,
                 "top_k": 5, "max_gap": 0, "site": None, "out": ".", "seed": 0},
    "forecast": {"input": None, "models": "last,repeat,linear",
                 "inputs": "48,96,192", "horizons": "1,12,24,48", "reps": 5,
                 "dump_cell": None, "site": None, "out": ".", "seed": 0},
    "regress": {"input": None, "target": "DOO-MGL", "site": None, "out": ".", "seed": 0},
    "attention": {"lq": 96, "lk": 96, "d": 32, "u": 8, "out": ".", "seed": 0},
    "report": {"artifacts": None, "sites": None, "out": ".", "seed": 0},
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riverfluct",
        description="Water-quality fluctuation analysis: cleaning, detrending, "
                    "q-Gaussian fitting, forecasting baselines, sparse attention.")
    sub = parser.add_subparsers(dest="command", metavar="command")

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--out", help="output directory (default .)")
        p.add_argument("--seed", type=int, help="random seed (default 0)")
        return p

    p = add("clean", "parse a raw telemetry CSV and write the cleaned grid + report")
    p.add_argument("--input", help="raw site CSV")
    p.add_argument("--schema", help="JSON column-role map")
    p.add_argument("--rainfall", help="daily rainfall CSV (date,rainfall_mm)")
    p.add_argument("--site", help="site code for artifact names")
    p.add_argument("--do-max", dest="do_max", type=float, help="DO upper bound (mg/L)")
    p.add_argument("--spike-window", dest="spike_window", type=int)
    p.add_argument("--spike-k", dest="spike_k", type=float)
    p.add_argument("--ec-unit", dest="ec_unit", choices=["uS/cm", "mS/cm"])
    p.add_argument("--exclude", action="append",
                   help="exclusion window 'start,end' (repeatable, inclusive)")

    p = add("detrend", "split one indicator into trend + fluctuation")
    p.add_argument("--input", help="cleaned CSV")
    p.add_argument("--indicator")
    p.add_argument("--method", choices=["seasonal", "emd"])
    p.add_argument("--mode", choices=["additive", "multiplicative"])
    p.add_argument("--f", help="seasonal window duration, e.g. 6h")
    p.add_argument("--m", type=int, help="number of fast oscillatory components in the fluctuation")
    p.add_argument("--max-gap", dest="max_gap", type=int,
                   help="interpolate interior gaps up to this many samples")
    p.add_argument("--site")

    p = add("fit", "fit a q-Gaussian to a column of samples")
    p.add_argument("--input", help="CSV of fluctuations (or simulate output)")
    p.add_argument("--column", help="column to fit (default: fluctuation, else last)")
    p.add_argument("--site")
    p.add_argument("--label", help="artifact label, e.g. emd_multiplicative")
    p.add_argument("--bins", type=int, help="histogram bins stored for plotting")

    p = add("compare", "rank the four detrending methods by fit quality")
    p.add_argument("--input", help="cleaned CSV")
    p.add_argument("--indicator")
    p.add_argument("--methods", help="'all' or comma list like emd:multiplicative")
    p.add_argument("--f")
    p.add_argument("--m", type=int)
    p.add_argument("--max-gap", dest="max_gap", type=int)
    p.add_argument("--site")

    p = add("simulate", "draw synthetic heavy-tailed samples")
    p.add_argument("--n-dof", dest="n_dof", type=int, help="chi-squared degrees of freedom")
    p.add_argument("--beta0", type=float, help="mean inverse variance")
    p.add_argument("--count", type=int)
    p.add_argument("--block-len", dest="block_len", type=int,
                   help="samples sharing one variance draw")
    p.add_argument("--tag", help="artifact tag (default n<dof>)")

    p = add("features", "export the covariate matrix and FFT periodicities")
    p.add_argument("--input", help="cleaned CSV (needs RAINFALL for the full matrix)")
    p.add_argument("--indicator")
    p.add_argument("--fft", action="store_true", default=None)
    p.add_argument("--top-k", dest="top_k", type=int)
    p.add_argument("--max-gap", dest="max_gap", type=int)
    p.add_argument("--site")

    p = add("forecast", "evaluate the forecasting baselines over the grid")
    p.add_argument("--input", help="cleaned CSV")
    p.add_argument("--models", help="comma list of last,repeat,linear")
    p.add_argument("--inputs", help="comma list of input lengths")
    p.add_argument("--horizons", help="comma list of horizons")
    p.add_argument("--reps", type=int)
    p.add_argument("--dump-cell", dest="dump_cell",
                   help="'L,h' cell whose predictions are dumped (default first)")
    p.add_argument("--site")

    p = add("regress", "same-time linear regression of one indicator on the rest")
    p.add_argument("--input", help="cleaned CSV")
    p.add_argument("--target")
    p.add_argument("--site")

    p = add("attention", "synthetic sparse-attention demo + heatmap export")
    p.add_argument("--lq", type=int)
    p.add_argument("--lk", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--u", type=int)

    p = add("report", "aggregate stage artifacts into report.json + figures")
    p.add_argument("--artifacts", help="directory holding the stage artifacts (default --out)")
    p.add_argument("--sites", help="site catalog JSON for the distance regression")

    return parser


def _resolve(command: str, args: argparse.Namespace) -> Dict:
    merged = dict(_DEFAULTS[command])
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            try:
                cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParameterError(f"bad config file {args.config}: {exc}")
        if not isinstance(cfg, dict):
            raise ParameterError("config file must hold a JSON object")
        section = cfg.get(command, {})
        if not isinstance(section, dict):
            raise ParameterError(f"config section {command!r} must be an object")
        for source in ({k: v for k, v in cfg.items() if not isinstance(v, dict)}, section):
            for key, val in source.items():
                if key in merged:
                    merged[key] = val
    for key, val in vars(args).items():
        if key in merged and val is not None:
            merged[key] = val
    return merged


def _out_dir(opts: Dict) -> Path:
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require(opts: Dict, *keys: str) -> None:
    missing = [k for k in keys if opts.get(k) in (None, "")]
    if missing:
        raise ParameterError(f"missing required option(s): {', '.join('--' + k.replace('_', '-') for k in missing)}")


def _write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _site_name(opts: Dict, fallback: str) -> str:
    if opts.get("site"):
        return str(opts["site"])
    stem = Path(fallback).stem
    for suffix in ("_clean", "_raw"):
        if stem.endswith(suffix):
            stem = stem[: -len(suffix)]
    return stem


def _int_list(value) -> List[int]:
    if isinstance(value, str):
        return [int(v) for v in value.split(",") if v.strip()]
    return [int(v) for v in value]


def _str_list(value) -> List[str]:
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    return [str(v) for v in value]


def _exclusions(raw) -> Tuple[Tuple[str, str], ...]:
    windows = []
    for item in raw or []:
        if isinstance(item, str):
            parts = [p.strip() for p in item.split(",")]
        else:
            parts = [str(p) for p in item]
        if len(parts) != 2:
            raise ParameterError(f"exclusion window needs 'start,end', got {item!r}")
        windows.append((parts[0], parts[1]))
    return tuple(windows)


def _longest_segment(series, max_gap: int):
    seg = segment_contiguous(series, max_gap=max_gap)
    if not seg.segments:
        raise InsufficientDataError(f"{series.indicator}: no contiguous data")
    return max(seg.segments, key=len)


def _echo(path) -> None:
    print(f"wrote {path}")


# ---------------------------------------------------------------- commands

def cmd_clean(opts: Dict) -> int:
    _require(opts, "input")
    out = _out_dir(opts)
    schema = None
    if opts["schema"]:
        with open(opts["schema"], "r", encoding="utf-8") as fh:
            schema = json.load(fh)
    parsed = datamod.parse_site_csv(opts["input"], schema=schema)
    config = datamod.CleanConfig(
        do_max=float(opts["do_max"]), spike_window=int(opts["spike_window"]),
        spike_k=float(opts["spike_k"]), ec_unit=opts["ec_unit"],
        exclusion_windows=_exclusions(opts["exclude"]))
    series_set, report = datamod.clean(parsed, config)
    if opts["rainfall"]:
        series_set = datamod.attach_rainfall(series_set, datamod.load_rainfall_csv(opts["rainfall"]))
    site = _site_name(opts, opts["input"])
    csv_path = out / f"{site}_clean.csv"
    datamod.write_clean_csv(series_set, csv_path)
    payload = {"site": site, "malformed_rows": parsed.malformed_rows,
               "duplicates_dropped": parsed.duplicates_dropped, **report.to_dict()}
    json_path = out / f"{site}_clean_report.json"
    _write_json(json_path, payload)
    _echo(csv_path)
    _echo(json_path)
    return 0


def cmd_detrend(opts: Dict) -> int:
    _require(opts, "input")
    out = _out_dir(opts)
    series_set = datamod.read_clean_csv(opts["input"])
    indicator = opts["indicator"]
    if indicator not in series_set:
        raise DataError(f"indicator {indicator!r} not in input; have {sorted(series_set)}")
    segres = segment_contiguous(series_set[indicator], max_gap=int(opts["max_gap"]))
    if not segres.segments:
        raise InsufficientDataError(f"{indicator}: no contiguous data to detrend")
    frames, seg_meta, skipped = [], [], []
    for seg in segres.segments:
        try:
            if opts["method"] == "seasonal":
                dec = decompose.seasonal_detrend(seg, f=opts["f"], mode=opts["mode"])
            else:
                dec = decompose.emd_detrend(seg, m=int(opts["m"]), mode=opts["mode"])
        except RiverfluctError as exc:
            skipped.append({"start": str(seg.start), "length": len(seg), "error": str(exc)})
            continue
        frames.append(pd.DataFrame({
            "timestamp": seg.timestamps, "input": seg.values,
            "trend": dec.trend.values, "fluctuation": dec.fluctuation.values}))
        seg_meta.append({"start": str(seg.start), "length": len(seg), "params": dec.params})
    if not frames:
        raise InsufficientDataError(
            "every segment failed to detrend; first error: " + skipped[0]["error"])
    site = _site_name(opts, opts["input"])
    label = f"{opts['method']}_{opts['mode']}"
    table = pd.concat(frames, ignore_index=True)
    csv_path = out / f"detrend_{site}_{label}.csv"
    table.to_csv(csv_path, index=False, date_format="%Y-%m-%dT%H:%M:%S")
    sidecar = {"site": site, "indicator": indicator, "method": opts["method"],
               "mode": opts["mode"], "f": str(opts["f"]), "m": int(opts["m"]),
               "max_gap": int(opts["max_gap"]), "n_rows": int(len(table)),
               "segments": seg_meta, "skipped_segments": skipped,
               "interpolated": segres.interpolated, "dropped": segres.dropped}
    json_path = out / f"detrend_{site}_{label}.json"
    _write_json(json_path, sidecar)
    _echo(csv_path)
    _echo(json_path)
    return 0


def cmd_fit(opts: Dict) -> int:
    _require(opts, "input")
    out = _out_dir(opts)
    frame = pd.read_csv(opts["input"])
    if frame.empty:
        raise EmptyInputError(f"{opts['input']}: no rows")
    column = opts["column"]
    if column is None:
        candidates = [c for c in frame.columns if c.lower() != "timestamp"]
        column = "fluctuation" if "fluctuation" in frame.columns else candidates[-1]
    if column not in frame.columns:
        raise DataError(f"column {column!r} not in {opts['input']}")
    x = frame[column].to_numpy(dtype=float)
    x = x[np.isfinite(x)]
    fit = superstat.fit_q_gaussian(x)
    pdf = superstat.empirical_pdf(x, bins=int(opts["bins"]))
    site = _site_name(opts, opts["input"])
    label = opts["label"] or column
    payload = {
        "site": site, "label": label, "column": column,
        "q": fit.params.q, "beta": fit.params.beta, "mu": fit.params.mu,
        "loglik": fit.loglik, "loglik_per_sample": fit.loglik_per_sample,
        "n_samples": fit.n_samples, "converged": fit.converged,
        "iterations": fit.iterations,
        "empirical_pdf": {"centers": pdf.centers.tolist(),
                          "widths": pdf.widths.tolist(),
                          "density": pdf.density.tolist(),
                          "edges": pdf.edges.tolist()},
    }
    json_path = out / f"fit_{site}_{label}.json"
    _write_json(json_path, payload)
    _echo(json_path)
    return 0


def _parse_methods(raw):
    if raw == "all":
        return "all"
    pairs = []
    for item in _str_list(raw):
        if ":" not in item:
            raise ParameterError(f"method spec needs method:mode, got {item!r}")
        method, mode = item.split(":", 1)
        pairs.append((method.strip(), mode.strip()))
    return pairs


def cmd_compare(opts: Dict) -> int:
    _require(opts, "input")
    out = _out_dir(opts)
    series_set = datamod.read_clean_csv(opts["input"])
    indicator = opts["indicator"]
    if indicator not in series_set:
        raise DataError(f"indicator {indicator!r} not in input; have {sorted(series_set)}")
    seg = _longest_segment(series_set[indicator], int(opts["max_gap"]))
    rows = superstat.compare_detrendings(
        seg, methods=_parse_methods(opts["methods"]), f=opts["f"], m=int(opts["m"]))
    site = _site_name(opts, opts["input"])
    records = []
    for r in rows:
        rec = {"method": r.method, "mode": r.mode, "n_samples": r.n_samples,
               "error": r.error}
        if r.fit is not None:
            rec.update(q=r.fit.params.q, beta=r.fit.params.beta, mu=r.fit.params.mu,
                       loglik=r.fit.loglik, loglik_per_sample=r.fit.loglik_per_sample)
        else:
            rec.update(q=None, beta=None, mu=None, loglik=None, loglik_per_sample=None)
        records.append(rec)
    ranking = [f"{r['method']}:{r['mode']}" for r in sorted(
        (r for r in records if r["loglik_per_sample"] is not None),
        key=lambda r: -r["loglik_per_sample"])]
    cols = ["method", "mode", "q", "beta", "mu", "loglik", "loglik_per_sample",
            "n_samples", "error"]
    csv_path = out / f"compare_{site}.csv"
    pd.DataFrame(records, columns=cols).to_csv(csv_path, index=False)
    payload = {"site": site, "indicator": indicator, "f": str(opts["f"]),
               "m": int(opts["m"]), "segment_start": str(seg.start),
               "segment_length": len(seg), "rows": records, "ranking": ranking}
    json_path = out / f"compare_{site}.json"
    _write_json(json_path, payload)
    _echo(csv_path)
    _echo(json_path)
    return 0


def cmd_simulate(opts: Dict) -> int:
    _require(opts, "n_dof")
    out = _out_dir(opts)
    config = superstat.SuperstatConfig(
        n_dof=int(opts["n_dof"]), beta0=float(opts["beta0"]),
        block_len=int(opts["block_len"]), seed=int(opts["seed"]))
    samples = superstat.sample_superstatistical(config, int(opts["count"]))
    tag = opts["tag"] or f"n{int(opts['n_dof'])}"
    csv_path = out / f"simulate_{tag}.csv"
    pd.DataFrame({"value": samples}).to_csv(csv_path, index=False)
    meta = {"tag": tag, "n_dof": int(opts["n_dof"]), "beta0": float(opts["beta0"]),
            "block_len": int(opts["block_len"]), "count": int(opts["count"]),
            "seed": int(opts["seed"])}
    json_path = out / f"simulate_{tag}_meta.json"
    _write_json(json_path, meta)
    _echo(csv_path)
    _echo(json_path)
    return 0


def cmd_features(opts: Dict) -> int:
    _require(opts, "input")
    out = _out_dir(opts)
    series_set = datamod.read_clean_csv(opts["input"])
    site = _site_name(opts, opts["input"])
    idx, matrix = forecast.covariate_matrix(series_set)
    frame = pd.DataFrame(matrix, columns=list(forecast.COVARIATES), index=idx)
    frame.index.name = "timestamp"
    csv_path = out / f"features_{site}.csv"
    frame.to_csv(csv_path, date_format="%Y-%m-%dT%H:%M:%S")
    _echo(csv_path)
    if opts["fft"]:
        indicator = opts["indicator"]
        if indicator not in series_set:
            raise DataError(f"indicator {indicator!r} not in input; have {sorted(series_set)}")
        seg = _longest_segment(series_set[indicator], int(opts["max_gap"]))
        peaks = forecast.fft_dominant_periods(seg, top_k=int(opts["top_k"]))
        hours_per_sample = seg.step / pd.Timedelta(hours=1)
        peak_frame = pd.DataFrame(
            [{"period_samples": p, "period_hours": p * hours_per_sample,
              "magnitude": m} for p, m in peaks])
        peaks_path = out / f"fft_{site}_peaks.csv"
        peak_frame.to_csv(peaks_path, index=False)
        y = seg.values - seg.values.mean()
        mag = np.abs(np.fft.rfft(y))
        ks = np.arange(1, mag.size)
        spec_frame = pd.DataFrame({"period_samples": len(y) / ks, "magnitude": mag[1:]})
        spectrum_path = out / f"fft_{site}_spectrum.csv"
        spec_frame.to_csv(spectrum_path, index=False)
        _echo(peaks_path)
        _echo(spectrum_path)
    return 0


def cmd_forecast(opts: Dict) -> int:
    _require(opts, "input")
    out = _out_dir(opts)
    series_set = datamod.read_clean_csv(opts["input"])
    site = _site_name(opts, opts["input"])
    idx, matrix = forecast.covariate_matrix(series_set)
    models = _str_list(opts["models"])
    input_lens = _int_list(opts["inputs"])
    horizons = _int_list(opts["horizons"])
    seed = int(opts["seed"])
    reps = int(opts["reps"])
    table = forecast.evaluate_baselines(matrix, idx, input_lens=input_lens,
                                        horizons=horizons, models=models,
                                        repetitions=reps, seed=seed)
    if not table.rows:
        first = next(iter(table.errors.values()), "no cells evaluated")
        raise DataError(f"every forecast cell failed; first error: {first}")
    csv_path = out / "forecast_metrics.csv"
    table.to_frame().to_csv(csv_path)
    rows_nested: Dict[str, Dict[str, Dict[str, float]]] = {}
    for (l, h, model), metrics in sorted(table.rows.items()):
        rows_nested.setdefault(f"{l}_{h}", {})[model] = metrics
    payload = {"site": site, "seed": seed, "repetitions": reps,
               "models": models, "inputs": input_lens, "horizons": horizons,
               "split": list(forecast.FORECAST_SPLIT.fractions),
               "rows": rows_nested,
               "errors": {f"{l}_{h}:{m}": msg for (l, h, m), msg in sorted(table.errors.items())}}
    json_path = out / "forecast_metrics.json"
    _write_json(json_path, payload)
    _echo(csv_path)
    _echo(json_path)

    dump = opts["dump_cell"]
    dump_l, dump_h = (_int_list(dump) if dump else (input_lens[0], horizons[0]))
    pred_path = out / "forecast_predictions.csv"
    _dump_predictions(matrix, idx, dump_l, dump_h, models, seed, pred_path)
    _echo(pred_path)
    return 0


def _dump_predictions(matrix, idx, input_len: int, horizon: int,
                      models: List[str], seed: int, path) -> None:
    """Per-window truth vs prediction for one grid cell, physical units."""
    i1, i2 = forecast.split_indices(len(matrix), forecast.FORECAST_SPLIT)
    stats = forecast.fit_norm_stats(np.asarray(matrix, dtype=float)[:i1])
    z = forecast.zscore(np.asarray(matrix, dtype=float), stats)
    ts = np.asarray(idx)
    train_ws = forecast.make_windows(z[:i1], ts[:i1], input_len, horizon, seed=seed)
    test_ws = forecast.make_windows(z[i2:], ts[i2:], input_len, horizon, seed=seed)
    do_mean = stats.mean[forecast.DO_COL]
    do_std = stats.effective_std[forecast.DO_COL]
    rows = []
    for model in models:
        try:
            if model == "last":
                pred = forecast.predict_last(test_ws.inputs, horizon)
            elif model == "repeat":
                pred = forecast.predict_repeat(test_ws.inputs, horizon)
            elif model == "linear":
                pred = forecast.LinearForecaster.fit(train_ws).predict(test_ws.inputs)
            else:
                raise ParameterError(f"unknown model {model!r}")
        except RiverfluctError:
            continue
        truth = test_ws.targets * do_std + do_mean
        pred = pred * do_std + do_mean
        for w in range(len(test_ws)):
            for step in range(horizon):
                rows.append({"origin": pd.Timestamp(test_ws.end_times[w]),
                             "model": model, "step": step + 1,
                             "y_true": truth[w, step], "y_pred": pred[w, step]})
    frame = pd.DataFrame(rows, columns=["origin", "model", "step", "y_true", "y_pred"])
    frame.to_csv(path, index=False, date_format="%Y-%m-%dT%H:%M:%S")


def cmd_regress(opts: Dict) -> int:
    _require(opts, "input")
    out = _out_dir(opts)
    series_set = datamod.read_clean_csv(opts["input"])
    site = _site_name(opts, opts["input"])
    target = opts["target"]
    if target not in forecast.INDICATOR_COVARIATES:
        raise ParameterError(
            f"target must be one of {', '.join(forecast.INDICATOR_COVARIATES)}")
    idx, matrix = forecast.covariate_matrix(series_set)
    names = list(forecast.COVARIATES)
    t = names.index(target)
    order = [t] + [i for i in range(len(names)) if i != t]
    matrix = matrix[:, order]
    features = [names[i] for i in order[1:]]
    result = forecast.same_time_regression(matrix)
    payload = {"site": site, "target": target, "smape": result.smape,
               "mae": result.mae, "n_train": result.n_train, "n_test": result.n_test,
               "features": features + ["bias"], "coef": result.coef.tolist()}
    json_path = out / f"regress_{site}.json"
    _write_json(json_path, payload)
    _echo(json_path)
    return 0


def cmd_attention(opts: Dict) -> int:
    out = _out_dir(opts)
    lq, lk, d, u = (int(opts[k]) for k in ("lq", "lk", "d", "u"))
    rng = np.random.default_rng(int(opts["seed"]))
    queries = rng.standard_normal((lq, d))
    keys = rng.standard_normal((lk, d))
    values = rng.standard_normal((lk, d))
    result = attn.probsparse_attention(queries, keys, values, top_u=u)
    csv_path = out / "attention_weights.csv"
    json_path = out / "attention_meta.json"
    col_means = result.weights.mean(axis=0)
    attn.export_heatmap(result.weights, csv_path, json_path,
                        active_queries=result.active_queries,
                        extra={"l_q": lq, "l_k": lk, "d": d, "u": u,
                               "seed": int(opts["seed"]),
                               "max_mean_column": int(np.argmax(col_means))})
    _echo(csv_path)
    _echo(json_path)
    return 0


# ---------------------------------------------------------------- report

def _load_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _spatial_section(fits: List[dict], catalog_path) -> dict:
    if not catalog_path:
        return {"skipped": "no site catalog supplied"}
    sites = {s.site_code: s for s in datamod.load_site_catalog(catalog_path)}
    by_label: Dict[str, List[dict]] = {}
    for f in fits:
        if f["site"] in sites:
            by_label.setdefault(f["label"], []).append(f)
    section: Dict[str, dict] = {}
    for label, rows in sorted(by_label.items()):
        if len({r["site"] for r in rows}) < 2:
            continue
        entry = {}
        for which in ("beta", "q"):
            pairs = [(sites[r["site"]], r[which]) for r in rows]
            trend = superstat.beta_distance_regression(pairs, which=which)
            entry[which] = {"slope": trend.slope, "intercept": trend.intercept,
                            "pearson_r": trend.pearson_r,
                            "slope_stderr": trend.slope_stderr,
                            "points": [list(p) for p in trend.points]}
        section[label] = entry
    if not section:
        return {"skipped": "fewer than 2 fitted sites match the catalog"}
    return section


def _report_figures(art: Path, fig_dir: Path, fits, comparisons, metrics_payload,
                    spatial, attention_meta) -> List[str]:
    from . import plots
    from .superstat import EmpiricalPdf, QGaussianParams

    fig_dir.mkdir(parents=True, exist_ok=True)
    figures: List[str] = []

    def rel(p) -> str:
        return os.path.relpath(p, fig_dir.parent)

    for f in fits:
        ep = f.get("empirical_pdf")
        if not ep:
            continue
        pdf = EmpiricalPdf(centers=np.asarray(ep["centers"]), widths=np.asarray(ep["widths"]),
                           density=np.asarray(ep["density"]), edges=np.asarray(ep["edges"]))
        params = QGaussianParams(q=f["q"], beta=f["beta"], mu=f["mu"])
        path = fig_dir / f"pdf_fit_{f['site']}_{f['label']}.png"
        plots.save_pdf_fit_figure(pdf, params, path, title=f"{f['site']} {f['label']}")
        figures.append(rel(path))

    for site, comp in sorted(comparisons.items()):
        table = {f"{r['method']}:{r['mode']}": {"loglik_per_sample": r["loglik_per_sample"]}
                 for r in comp["rows"] if r["loglik_per_sample"] is not None}
        if table:
            path = fig_dir / f"comparison_{site}.png"
            plots.save_comparison_figure(table, path)
            figures.append(rel(path))

    rows = {}
    for cell, models in metrics_payload["rows"].items():
        l, h = (int(v) for v in cell.split("_"))
        for model, metrics in models.items():
            rows[(l, h, model)] = metrics
    if rows:
        path = fig_dir / "forecast_metrics.png"
        plots.save_metrics_figure(rows, path, metric="smape")
        figures.append(rel(path))

    if "skipped" not in spatial:
        for label, entry in sorted(spatial.items()):
            for which in ("beta", "q"):
                e = entry[which]
                d = [p[0] for p in e["points"]]
                v = [p[1] for p in e["points"]]
                path = fig_dir / f"distance_{which}_{label}.png"
                plots.save_distance_figure(d, v, e["slope"], e["intercept"], path,
                                           ylabel=which)
                figures.append(rel(path))

    weights_csv = art / "attention_weights.csv"
    if attention_meta is not None and weights_csv.exists():
        weights = pd.read_csv(weights_csv, index_col=0).to_numpy(dtype=float)
        path = fig_dir / "attention_heatmap.png"
        plots.save_heatmap_figure(weights, path,
                                  active_queries=attention_meta.get("active_queries"))
        figures.append(rel(path))

    for det_csv in sorted(glob.glob(str(art / "detrend_*.csv"))):
        frame = pd.read_csv(det_csv, parse_dates=["timestamp"])
        stem = Path(det_csv).stem
        path = fig_dir / f"{stem}.png"
        plots.save_detrend_panels(frame["timestamp"], frame["input"], frame["trend"],
                                  frame["fluctuation"], path,
                                  title=stem.replace("detrend_", ""))
        figures.append(rel(path))

    for spec_csv in sorted(glob.glob(str(art / "fft_*_spectrum.csv"))):
        frame = pd.read_csv(spec_csv)
        stem = Path(spec_csv).stem
        peaks_csv = art / stem.replace("_spectrum", "_peaks.csv")
        peaks = []
        if peaks_csv.exists():
            pf = pd.read_csv(peaks_csv)
            peaks = list(zip(pf["period_samples"], pf["magnitude"]))
        path = fig_dir / f"{stem}.png"
        plots.save_spectrum_figure(frame["period_samples"], frame["magnitude"], peaks, path)
        figures.append(rel(path))

    return figures


def cmd_report(opts: Dict) -> int:
    out = _out_dir(opts)
    art = Path(opts["artifacts"]) if opts["artifacts"] else out
    if not art.is_dir():
        raise DataError(f"artifact directory {art} does not exist")

    fit_paths = sorted(glob.glob(str(art / "fit_*.json")))
    compare_paths = sorted(glob.glob(str(art / "compare_*.json")))
    regress_paths = sorted(glob.glob(str(art / "regress_*.json")))
    metrics_path = art / "forecast_metrics.json"
    missing = []
    if not fit_paths:
        missing.append("fit_*.json")
    if not compare_paths:
        missing.append("compare_*.json")
    if not regress_paths:
        missing.append("regress_*.json")
    if not metrics_path.exists():
        missing.append("forecast_metrics.json")
    if missing:
        raise DataError(f"report inputs missing from {art}: {', '.join(missing)}")

    fits = [_load_json(p) for p in fit_paths]
    comparisons = {d["site"]: d for d in (_load_json(p) for p in compare_paths)}
    regressions = {d["site"]: d for d in (_load_json(p) for p in regress_paths)}
    metrics_payload = _load_json(metrics_path)
    attention_meta = None
    if (art / "attention_meta.json").exists():
        attention_meta = _load_json(art / "attention_meta.json")
    detrend_sidecars = sorted(glob.glob(str(art / "detrend_*.json")))

    spatial = _spatial_section(fits, opts["sites"])
    figures = _report_figures(art, out / "figures", fits, comparisons,
                              metrics_payload, spatial, attention_meta)

    fits_slim = [{"site_code": f["site"], "method": f["label"],
                  **{k: v for k, v in f.items()
                     if k not in ("empirical_pdf", "site", "label")}} for f in fits]
    component_seeds = {"forecast": metrics_payload.get("seed")}
    if attention_meta is not None:
        component_seeds["attention"] = attention_meta.get("seed")
    payload = {
        "seed": int(opts["seed"]),
        "component_seeds": component_seeds,
        "inputs": {"fits": [Path(p).name for p in fit_paths],
                   "compare": [Path(p).name for p in compare_paths],
                   "forecast_metrics": metrics_path.name,
                   "regress": [Path(p).name for p in regress_paths],
                   "attention": "attention_meta.json" if attention_meta else None,
                   "detrend": [Path(p).name for p in detrend_sidecars]},
        "fits": fits_slim,
        "comparison": comparisons,
        "forecast_metrics": metrics_payload,
        "regression": regressions,
        "spatial": spatial,
        "attention": attention_meta,
        "figures": figures,
    }
    report_path = out / "report.json"
    _write_json(report_path, payload)
    _echo(report_path)
    for f in figures:
        print(f"wrote {out / Path(f)}")
    return 0


_COMMANDS = {
    "clean": cmd_clean, "detrend": cmd_detrend, "fit": cmd_fit,
    "compare": cmd_compare, "simulate": cmd_simulate, "features": cmd_features,
    "forecast": cmd_forecast, "regress": cmd_regress, "attention": cmd_attention,
    "report": cmd_report,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return 2
    try:
        opts = _resolve(args.command, args)
        return _COMMANDS[args.command](opts)
    except RiverfluctError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON input: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
