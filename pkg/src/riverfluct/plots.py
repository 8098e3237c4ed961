"""Figure rendering for the report path. Every function writes a PNG and
returns the path; nothing is ever shown interactively.

PNGs are written with empty Software metadata so repeated runs of the same
pipeline produce byte-identical files.
"""
from __future__ import annotations

import os
from typing import Dict, Mapping, Optional, Sequence

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .decompose import Decomposition, IMFSet
from .superstat import EmpiricalPdf, QGaussianParams, q_gaussian_pdf

_SAVE_KW = dict(dpi=120, metadata={"Software": None})


def _finish(fig, path) -> str:
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return os.fspath(path)


def save_detrend_panels(timestamps, values, trend, fluctuation, path,
                        title: str = "") -> str:
    """Input, trend and fluctuation stacked on a shared time axis."""
    fig, axes = plt.subplots(3, 1, figsize=(9, 6), sharex=True)
    axes[0].plot(timestamps, values, lw=0.6, color="tab:blue")
    axes[0].set_ylabel("input")
    axes[1].plot(timestamps, trend, lw=0.8, color="tab:orange")
    axes[1].set_ylabel("trend")
    axes[2].plot(timestamps, fluctuation, lw=0.6, color="tab:green")
    axes[2].set_ylabel("fluctuation")
    axes[2].set_xlabel("time")
    if title:
        axes[0].set_title(title)
    fig.autofmt_xdate()
    fig.tight_layout()
    return _finish(fig, path)


def save_decomposition_figure(dec: Decomposition, path) -> str:
    y = dec.recompose()
    return save_detrend_panels(dec.trend.timestamps, y.values, dec.trend.values,
                               dec.fluctuation.values, path,
                               title=f"{dec.method} / {dec.mode}")


def save_imf_figure(imfs: IMFSet, path, max_panels: int = 8) -> str:
    """Oscillatory components slow to fast, residue last."""
    panels = list(imfs.imfs[:max_panels]) + [imfs.residue]
    fig, axes = plt.subplots(len(panels), 1, figsize=(9, 1.4 * len(panels)), sharex=True)
    axes = np.atleast_1d(axes)
    for ax, comp in zip(axes, panels):
        ax.plot(comp.timestamps, comp.values, lw=0.6)
        ax.set_ylabel(comp.indicator, fontsize=7)
    axes[-1].set_xlabel("time")
    fig.autofmt_xdate()
    fig.tight_layout()
    return _finish(fig, path)


def save_pdf_fit_figure(pdf: EmpiricalPdf, params: QGaussianParams, path,
                        title: str = "") -> str:
    """Empirical density with the fitted curve on a log y axis."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.plot(pdf.centers, pdf.density, "o", ms=3, color="tab:blue", label="empirical")
    lo, hi = pdf.edges[0], pdf.edges[-1]
    grid = np.linspace(lo, hi, 600)
    ax.plot(grid, q_gaussian_pdf(grid, params), "-", color="tab:red",
            label=f"fit q={params.q:.3f}, beta={params.beta:.3g}")
    ax.set_yscale("log")
    ax.set_xlabel("fluctuation")
    ax.set_ylabel("density")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _finish(fig, path)


def save_comparison_figure(table: Mapping[str, Mapping[str, float]], path) -> str:
    """Per-sample log-likelihood bars for each detrending method/mode row."""
    labels = list(table)
    vals = [table[k].get("loglik_per_sample", np.nan) for k in labels]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(range(len(labels)), vals, color="tab:purple")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("log-likelihood per sample")
    fig.tight_layout()
    return _finish(fig, path)


def save_distance_figure(distances: Sequence[float], values: Sequence[float],
                         slope: float, intercept: float, path,
                         ylabel: str = "beta") -> str:
    """Fitted-parameter-vs-distance scatter with its regression line."""
    d = np.asarray(distances, dtype=float)
    v = np.asarray(values, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.plot(d, v, "o", color="tab:blue")
    grid = np.linspace(d.min(), d.max(), 50)
    ax.plot(grid, slope * grid + intercept, "-", color="tab:red")
    ax.set_xlabel("distance to sea (km)")
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    return _finish(fig, path)


def save_metrics_figure(rows: Dict, path, metric: str = "smape") -> str:
    """Grouped bars of one metric over the (input_len, horizon) grid."""
    cells = sorted({(k[0], k[1]) for k in rows})
    models = sorted({k[2] for k in rows})
    x = np.arange(len(cells))
    width = 0.8 / max(len(models), 1)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for i, m in enumerate(models):
        vals = [rows.get((l, h, m), {}).get(metric, np.nan) for l, h in cells]
        ax.bar(x + i * width, vals, width, label=m)
    ax.set_xticks(x + width * (len(models) - 1) / 2)
    ax.set_xticklabels([f"{l}/{h}" for l, h in cells], fontsize=8)
    ax.set_xlabel("input length / horizon")
    ax.set_ylabel(metric)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _finish(fig, path)


def save_heatmap_figure(weights: np.ndarray, path,
                        active_queries: Optional[Sequence[int]] = None) -> str:
    """Attention weights as an image; active query rows ticked on the left."""
    weights = np.asarray(weights, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(weights, aspect="auto", cmap="viridis")
    fig.colorbar(im, ax=ax, label="weight")
    ax.set_xlabel("key")
    ax.set_ylabel("query")
    if active_queries is not None:
        ax.set_yticks(list(active_queries))
        ax.tick_params(axis="y", labelsize=7)
    fig.tight_layout()
    return _finish(fig, path)


def save_spectrum_figure(periods, magnitudes, peaks: Sequence, path) -> str:
    """Magnitude spectrum against period in samples, dominant peaks marked."""
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(np.asarray(periods, dtype=float), np.asarray(magnitudes, dtype=float),
            lw=0.7, color="tab:blue")
    for period, magnitude in peaks:
        ax.plot([period], [magnitude], "v", color="tab:red")
        ax.annotate(f"{period:.0f}", (period, magnitude), fontsize=7,
                    textcoords="offset points", xytext=(2, 4))
    ax.set_xscale("log")
    ax.set_xlabel("period (samples)")
    ax.set_ylabel("|FFT|")
    fig.tight_layout()
    return _finish(fig, path)
