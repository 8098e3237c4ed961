"""Sparse scaled dot-product attention.

Each query gets a sparsity score M(q_i) = max_j(s_ij) - mean_j(s_ij) on the
scaled score matrix s = QK^T/sqrt(d). Only the top-u queries by that score
attend normally; the rest fall back to the mean of the value rows (the output
attention would produce under uniform weights). With u = L_Q the result is
exactly dense softmax attention.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ParameterError


def _check_matrix(name: str, m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ParameterError(f"{name} must be 2-d, got shape {m.shape}")
    if m.size == 0:
        raise ParameterError(f"{name} is empty")
    if not np.isfinite(m).all():
        raise ParameterError(f"{name} contains non-finite entries")
    return m


@dataclass
class AttentionInput:
    queries: np.ndarray   # (L_Q, d)
    keys: np.ndarray      # (L_K, d)
    values: np.ndarray    # (L_K, d_v)
    top_u: int

    def __post_init__(self):
        self.queries = _check_matrix("queries", self.queries)
        self.keys = _check_matrix("keys", self.keys)
        self.values = _check_matrix("values", self.values)
        if self.queries.shape[1] != self.keys.shape[1]:
            raise ParameterError(
                f"queries and keys disagree on width: {self.queries.shape[1]} vs {self.keys.shape[1]}")
        if self.keys.shape[0] != self.values.shape[0]:
            raise ParameterError(
                f"keys and values disagree on length: {self.keys.shape[0]} vs {self.values.shape[0]}")
        if not 1 <= self.top_u <= self.queries.shape[0]:
            raise ParameterError(
                f"top_u must be in [1, {self.queries.shape[0]}], got {self.top_u}")


@dataclass
class AttentionOutput:
    output: np.ndarray          # (L_Q, d_v)
    weights: np.ndarray         # (L_Q, L_K), each row sums to 1
    active_queries: np.ndarray  # indices of rows that attended, ascending


def _scores(queries: np.ndarray, keys: np.ndarray) -> np.ndarray:
    d = queries.shape[1]
    return queries @ keys.T / np.sqrt(d)


def _softmax_rows(s: np.ndarray) -> np.ndarray:
    z = s - s.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def query_sparsity_measure(queries, keys) -> np.ndarray:
    """max-minus-mean of each query's scaled score row; high values mark
    queries whose attention is far from uniform."""
    q = _check_matrix("queries", queries)
    k = _check_matrix("keys", keys)
    if q.shape[1] != k.shape[1]:
        raise ParameterError("queries and keys disagree on width")
    s = _scores(q, k)
    return s.max(axis=1) - s.mean(axis=1)


def dense_attention(queries, keys, values) -> AttentionOutput:
    inp = AttentionInput(queries, keys, values, top_u=np.asarray(queries).shape[0])
    w = _softmax_rows(_scores(inp.queries, inp.keys))
    return AttentionOutput(output=w @ inp.values, weights=w,
                           active_queries=np.arange(inp.queries.shape[0]))


def probsparse_attention(queries, keys, values, top_u: int) -> AttentionOutput:
    """Attend with the top-u queries only; inactive rows output the value mean
    and report uniform weights. Ties in the sparsity score break toward the
    lower query index, so the active set is deterministic.
    """
    inp = AttentionInput(queries, keys, values, top_u=top_u)
    l_q = inp.queries.shape[0]
    l_k = inp.keys.shape[0]
    m = query_sparsity_measure(inp.queries, inp.keys)
    active = np.sort(np.argsort(-m, kind="stable")[:inp.top_u])
    output = np.repeat(inp.values.mean(axis=0, keepdims=True), l_q, axis=0)
    weights = np.full((l_q, l_k), 1.0 / l_k)
    w_active = _softmax_rows(_scores(inp.queries[active], inp.keys))
    weights[active] = w_active
    output[active] = w_active @ inp.values
    return AttentionOutput(output=output, weights=weights, active_queries=active)


def export_heatmap(weights: np.ndarray, csv_path, json_path,
                   active_queries: Optional[Sequence[int]] = None,
                   row_labels: Optional[Sequence[str]] = None,
                   col_labels: Optional[Sequence[str]] = None,
                   extra: Optional[dict] = None) -> None:
    """Write an attention-weight matrix as a labeled CSV plus a JSON sidecar
    carrying the active rows, per-key column means, and any extra run info."""
    weights = _check_matrix("weights", weights)
    n_q, n_k = weights.shape
    rows = list(row_labels) if row_labels is not None else [f"q{i}" for i in range(n_q)]
    cols = list(col_labels) if col_labels is not None else [f"k{j}" for j in range(n_k)]
    if len(rows) != n_q or len(cols) != n_k:
        raise ParameterError("label counts do not match the weight matrix")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["query"] + cols)
        for label, row in zip(rows, weights):
            writer.writerow([label] + [f"{v:.10g}" for v in row])
    sidecar = {
        "n_queries": n_q,
        "n_keys": n_k,
        "active_queries": [int(i) for i in (active_queries if active_queries is not None else range(n_q))],
        "column_means": [float(v) for v in weights.mean(axis=0)],
    }
    if extra:
        sidecar.update(extra)
    with open(json_path, "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
