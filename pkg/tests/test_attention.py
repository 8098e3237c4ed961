"""Sparse attention forward pass and heatmap export."""
import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riverfluct import (
    ParameterError,
    dense_attention,
    export_heatmap,
    probsparse_attention,
    query_sparsity_measure,
)


def _rand(shape, seed):
    return np.random.default_rng(seed).standard_normal(shape)


class TestSparsityMeasure:
    def test_identical_queries_equal_scores(self):
        q = np.tile(_rand((1, 6), 0), (5, 1))
        k = _rand((7, 6), 1)
        m = query_sparsity_measure(q, k)
        np.testing.assert_allclose(m, m[0], atol=1e-12)

    def test_orthogonal_query_scores_zero(self):
        k = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        q = np.array([[0.0, 0.0, 2.0]])   # orthogonal to both keys
        assert query_sparsity_measure(q, k)[0] == pytest.approx(0.0, abs=1e-12)

    def test_brute_force_oracle(self):
        q = _rand((8, 4), 2)
        k = _rand((8, 4), 3)
        m = query_sparsity_measure(q, k)
        for i in range(8):
            row = np.array([q[i] @ k[j] / math.sqrt(4) for j in range(8)])
            assert m[i] == pytest.approx(row.max() - row.mean(), rel=1e-12)

    def test_width_mismatch(self):
        with pytest.raises(ParameterError):
            query_sparsity_measure(_rand((3, 4), 0), _rand((3, 5), 1))

    def test_zero_width_rejected(self):
        with pytest.raises(ParameterError):
            query_sparsity_measure(np.empty((3, 0)), np.empty((3, 0)))


class TestDenseAttention:
    def test_identity_values_pass_weights_through(self):
        q, k = _rand((4, 5), 0), _rand((6, 5), 1)
        out = dense_attention(q, k, np.eye(6))
        np.testing.assert_allclose(out.output, out.weights, atol=1e-12)

    def test_uniform_products_give_uniform_weights(self):
        q = np.zeros((3, 4))
        k = _rand((5, 4), 2)
        out = dense_attention(q, k, _rand((5, 2), 3))
        np.testing.assert_allclose(out.weights, 1.0 / 5.0, atol=1e-12)

    def test_huge_logits_stay_finite(self):
        q = np.array([[1e4]])
        k = np.array([[1e4], [-1e4]])
        v = np.array([[1.0], [2.0]])
        out = dense_attention(q, k, v)
        assert np.isfinite(out.output).all()
        assert np.isfinite(out.weights).all()
        np.testing.assert_allclose(out.weights.sum(axis=1), 1.0, atol=1e-9)
        assert out.weights[0, 0] == pytest.approx(1.0)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ParameterError):
            dense_attention(np.ones(4), np.ones((2, 4)), np.ones((2, 2)))
        with pytest.raises(ParameterError):
            dense_attention(np.ones((2, 4)), np.ones((3, 4)), np.ones((2, 2)))
        bad = np.ones((2, 4))
        bad[0, 0] = np.inf
        with pytest.raises(ParameterError):
            dense_attention(bad, np.ones((3, 4)), np.ones((3, 2)))


class TestProbsparseAttention:
    def test_full_u_equals_dense(self):
        q, k, v = _rand((9, 5), 4), _rand((7, 5), 5), _rand((7, 3), 6)
        sparse = probsparse_attention(q, k, v, top_u=9)
        dense = dense_attention(q, k, v)
        np.testing.assert_allclose(sparse.output, dense.output, atol=1e-6)
        np.testing.assert_allclose(sparse.weights, dense.weights, atol=1e-6)
        np.testing.assert_array_equal(sparse.active_queries, np.arange(9))

    def test_single_key(self):
        q, v = _rand((5, 3), 7), _rand((1, 2), 8)
        out = probsparse_attention(q, _rand((1, 3), 9), v, top_u=2)
        np.testing.assert_allclose(out.weights, 1.0, atol=1e-12)
        for i in range(5):
            np.testing.assert_allclose(out.output[i], v[0], atol=1e-12)

    def test_orthonormal_diagonal_dominance(self):
        d = 6
        eye = np.eye(d)
        out = probsparse_attention(eye, eye, _rand((d, 2), 10), top_u=d)
        hot = math.exp(1.0 / math.sqrt(d))
        expected = np.full((d, d), 1.0) * (1.0 / (hot + d - 1))
        np.fill_diagonal(expected, hot / (hot + d - 1))
        np.testing.assert_allclose(out.weights, expected, atol=1e-12)
        for i in range(d):
            assert out.weights[i, i] > out.weights[i, np.arange(d) != i].max()

    def test_inactive_rows_fall_back_to_value_mean(self):
        q, k, v = _rand((8, 4), 11), _rand((6, 4), 12), _rand((6, 3), 13)
        out = probsparse_attention(q, k, v, top_u=3)
        inactive = sorted(set(range(8)) - set(out.active_queries.tolist()))
        assert len(inactive) == 5
        for i in inactive:
            np.testing.assert_allclose(out.output[i], v.mean(axis=0), atol=1e-12)
            np.testing.assert_allclose(out.weights[i], 1.0 / 6.0, atol=1e-12)

    def test_active_rows_match_dense_rows(self):
        q, k, v = _rand((8, 4), 14), _rand((6, 4), 15), _rand((6, 3), 16)
        out = probsparse_attention(q, k, v, top_u=4)
        dense = dense_attention(q, k, v)
        for i in out.active_queries:
            np.testing.assert_allclose(out.weights[i], dense.weights[i], atol=1e-12)
            np.testing.assert_allclose(out.output[i], dense.output[i], atol=1e-12)

    def test_active_set_picks_highest_measure(self):
        q, k = _rand((10, 5), 17), _rand((7, 5), 18)
        m = query_sparsity_measure(q, k)
        out = probsparse_attention(q, k, _rand((7, 2), 19), top_u=4)
        expected = np.sort(np.argsort(-m, kind="stable")[:4])
        np.testing.assert_array_equal(out.active_queries, expected)

    def test_ties_break_toward_lower_index(self):
        q = np.tile(_rand((1, 4), 20), (5, 1))   # all measures identical
        out = probsparse_attention(q, _rand((6, 4), 21), _rand((6, 2), 22), top_u=2)
        np.testing.assert_array_equal(out.active_queries, [0, 1])

    def test_u_out_of_range(self):
        q, k, v = _rand((4, 3), 23), _rand((5, 3), 24), _rand((5, 2), 25)
        with pytest.raises(ParameterError):
            probsparse_attention(q, k, v, top_u=0)
        with pytest.raises(ParameterError):
            probsparse_attention(q, k, v, top_u=5)

    def test_active_queries_sorted(self):
        q, k, v = _rand((12, 4), 26), _rand((9, 4), 27), _rand((9, 2), 28)
        out = probsparse_attention(q, k, v, top_u=5)
        assert np.all(np.diff(out.active_queries) > 0)


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 5),
           st.integers(0, 2**31 - 1), st.data())
    def test_rows_stochastic(self, l_q, l_k, d, seed, data):
        u = data.draw(st.integers(1, l_q))
        rng = np.random.default_rng(seed)
        out = probsparse_attention(rng.standard_normal((l_q, d)),
                                   rng.standard_normal((l_k, d)),
                                   rng.standard_normal((l_k, 2)), top_u=u)
        np.testing.assert_allclose(out.weights.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(out.weights >= 0.0)
        assert np.all(out.weights <= 1.0)

    def test_key_value_permutation_equivariance(self):
        q, k, v = _rand((6, 4), 30), _rand((8, 4), 31), _rand((8, 3), 32)
        perm = np.random.default_rng(33).permutation(8)
        base = probsparse_attention(q, k, v, top_u=3)
        permuted = probsparse_attention(q, k[perm], v[perm], top_u=3)
        np.testing.assert_array_equal(base.active_queries, permuted.active_queries)
        np.testing.assert_allclose(permuted.weights, base.weights[:, perm], atol=1e-12)
        np.testing.assert_allclose(permuted.output, base.output, atol=1e-12)

    def test_u_monotonicity(self):
        q, k, v = _rand((10, 5), 34), _rand((7, 5), 35), _rand((7, 2), 36)
        prev = set()
        for u in range(1, 11):
            active = set(probsparse_attention(q, k, v, top_u=u).active_queries.tolist())
            assert prev <= active
            prev = active

    def test_scale_contract_zero_padding(self):
        # widening d with zero padding divides every logit by sqrt(2); the
        # score-scale law is exact, so compensating by 2**(1/4) on both sides
        # restores the original attention bit-for-bit (up to fp rounding)
        q, k = _rand((5, 4), 37), _rand((6, 4), 38)
        v = _rand((6, 3), 39)
        q_pad = np.hstack([q, np.zeros((5, 4))])
        k_pad = np.hstack([k, np.zeros((6, 4))])
        m, m_pad = query_sparsity_measure(q, k), query_sparsity_measure(q_pad, k_pad)
        np.testing.assert_allclose(m_pad, m / math.sqrt(2.0), atol=1e-12)
        c = 2.0 ** 0.25
        base = dense_attention(q, k, v)
        comp = dense_attention(c * q_pad, c * k_pad, v)
        np.testing.assert_allclose(comp.weights, base.weights, atol=1e-12)
        np.testing.assert_allclose(comp.output, base.output, atol=1e-12)


class TestExportHeatmap:
    def test_round_trip_identity_matrix(self, tmp_path):
        w = np.array([[1.0, 0.0], [0.0, 1.0]])
        csv_path, json_path = tmp_path / "w.csv", tmp_path / "w.json"
        export_heatmap(w, csv_path, json_path)
        with open(csv_path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["query", "k0", "k1"]
        assert rows[1] == ["q0", "1", "0"]
        assert rows[2] == ["q1", "0", "1"]
        back = np.array([[float(c) for c in r[1:]] for r in rows[1:]])
        np.testing.assert_array_equal(back, w)
        meta = json.loads(json_path.read_text())
        assert meta["n_queries"] == 2
        assert meta["n_keys"] == 2
        assert meta["column_means"] == [0.5, 0.5]

    def test_uniform_weights_equal_column_means(self, tmp_path):
        w = np.full((4, 6), 1.0 / 6.0)
        export_heatmap(w, tmp_path / "w.csv", tmp_path / "w.json")
        meta = json.loads((tmp_path / "w.json").read_text())
        np.testing.assert_allclose(meta["column_means"], 1.0 / 6.0, atol=1e-12)

    def test_concentrated_columns_peak_located(self, tmp_path):
        # every query attends near key 165; the exported column means
        # must peak inside 160..170
        n_q, n_k = 48, 200
        cols = np.arange(n_k, dtype=float)
        rng = np.random.default_rng(40)
        centers = 165.0 + rng.normal(0.0, 1.5, n_q)
        logits = -0.5 * ((cols[None, :] - centers[:, None]) / 4.0) ** 2
        w = np.exp(logits)
        w /= w.sum(axis=1, keepdims=True)
        export_heatmap(w, tmp_path / "w.csv", tmp_path / "w.json")
        meta = json.loads((tmp_path / "w.json").read_text())
        peak = int(np.argmax(meta["column_means"]))
        assert 160 <= peak <= 170

    def test_custom_labels_and_extra(self, tmp_path):
        w = np.array([[0.25, 0.75]])
        export_heatmap(w, tmp_path / "w.csv", tmp_path / "w.json",
                       active_queries=[0], row_labels=["origin"],
                       col_labels=["lag1", "lag2"], extra={"seed": 7})
        with open(tmp_path / "w.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["query", "lag1", "lag2"]
        assert rows[1][0] == "origin"
        meta = json.loads((tmp_path / "w.json").read_text())
        assert meta["seed"] == 7
        assert meta["active_queries"] == [0]

    def test_label_count_mismatch(self, tmp_path):
        with pytest.raises(ParameterError):
            export_heatmap(np.ones((2, 2)) / 2, tmp_path / "w.csv", tmp_path / "w.json",
                           row_labels=["only-one"])

    def test_weights_validated(self, tmp_path):
        bad = np.ones((2, 2))
        bad[0, 0] = np.nan
        with pytest.raises(ParameterError):
            export_heatmap(bad, tmp_path / "w.csv", tmp_path / "w.json")
