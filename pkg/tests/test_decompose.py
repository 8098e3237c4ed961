"""Moving-average and EMD detrending: recomposition identities, mode handling."""
import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riverfluct import (
    Decomposition,
    DomainError,
    EmdConfig,
    GapError,
    InvalidWindowError,
    ParameterError,
    TimeSeries,
    emd,
    emd_detrend,
    moving_average_trend,
    seasonal_detrend,
)
from riverfluct.decompose import _extrema

STEP = pd.Timedelta("15min")


def _ts(values, indicator="DOO-MGL"):
    return TimeSeries(indicator, pd.Timestamp("2021-01-01"), np.asarray(values, float), STEP)


def _zero_crossings(x):
    sgn = np.sign(x)
    sgn = sgn[sgn != 0]
    return int(np.sum(sgn[:-1] != sgn[1:]))


class TestMovingAverage:
    def test_constant_identity(self):
        y = np.full(200, 7.5)
        for f in ("1h", "6h", "24h"):
            trend = moving_average_trend(_ts(y), f)
            np.testing.assert_allclose(trend.values, y, atol=1e-12)

    def test_window_longer_than_series_shrinks_everywhere(self):
        # symmetric shrinking means a linear series maps to itself even when
        # the nominal stencil would not fit at all
        y = np.linspace(3.0, 8.0, 6)
        trend = moving_average_trend(y, 25)
        assert trend.shape == y.shape
        np.testing.assert_allclose(trend, y, atol=1e-12)
        impulse = np.array([0.0, 1.0, 0.0])
        np.testing.assert_allclose(moving_average_trend(impulse, 5),
                                   [0.0, 1.0 / 3.0, 0.0], atol=1e-12)

    def test_sine_period_equals_window_vanishes(self):
        # averaging over exactly one period cancels the oscillation
        t = np.arange(4096)
        y = np.sin(2 * np.pi * t / 48)   # 12 h period on the 15-min grid
        trend = moving_average_trend(_ts(y), "12h")
        interior = trend.values[48:-48]
        assert np.abs(interior).max() <= 1e-6

    def test_six_hour_window_is_24_samples(self):
        # an impulse spreads to height 1/w, which pins down the sample count
        y = np.zeros(201)
        y[100] = 1.0
        trend = moving_average_trend(_ts(y), "6h")
        assert trend.values[100] == pytest.approx(1 / 24)

    def test_window_shorter_than_step(self):
        with pytest.raises(InvalidWindowError):
            moving_average_trend(_ts(np.ones(50)), "10min")

    def test_window_not_integer_multiple(self):
        with pytest.raises(InvalidWindowError):
            moving_average_trend(_ts(np.ones(50)), "25min")

    def test_array_input_integer_window(self):
        y = np.arange(100, dtype=float)
        trend = moving_average_trend(y, 5)
        # symmetric window reproduces a linear ramp exactly in the interior
        np.testing.assert_allclose(trend[2:-2], y[2:-2], atol=1e-9)

    def test_array_input_bad_window(self):
        with pytest.raises(InvalidWindowError):
            moving_average_trend(np.ones(50), 2.5)
        with pytest.raises(InvalidWindowError):
            moving_average_trend(np.ones(50), 0)

    def test_even_window_two_pass_stencil(self):
        y = np.zeros(101)
        y[50] = 1.0
        trend = moving_average_trend(y, 4)
        # half weights land on the outermost samples of the 5-point stencil
        np.testing.assert_allclose(trend[48:53],
                                   [0.125, 0.25, 0.25, 0.25, 0.125], atol=1e-12)

    def test_gap_rejected(self):
        y = np.ones(50)
        y[10] = np.nan
        with pytest.raises(GapError):
            moving_average_trend(_ts(y), "1h")

    def test_output_aligned(self):
        ts = _ts(np.sin(np.arange(300) / 9.0))
        trend = moving_average_trend(ts, "3h")
        assert len(trend) == len(ts)
        assert trend.start == ts.start
        assert trend.step == ts.step


class TestSeasonalDetrend:
    def test_additive_recovers_fluctuation(self):
        t = np.arange(2000, dtype=float)
        slow = 10.0 + 0.001 * t
        eps = 0.3 * np.sin(2 * np.pi * t / 48)
        dec = seasonal_detrend(_ts(slow + eps), "12h", mode="additive")
        interior = slice(48, -48)
        np.testing.assert_allclose(dec.fluctuation.values[interior], eps[interior], atol=1e-9)
        np.testing.assert_allclose(dec.trend.values[interior], slow[interior], atol=1e-9)

    def test_multiplicative_recovers_ratio(self):
        t = np.arange(2000, dtype=float)
        eps = 0.1 * np.sin(2 * np.pi * t / 48)
        dec = seasonal_detrend(_ts(5.0 * (1 + eps)), "12h", mode="multiplicative")
        interior = slice(48, -48)
        np.testing.assert_allclose(dec.fluctuation.values[interior], 1 + eps[interior], atol=1e-9)

    def test_recompose_additive_exact(self):
        rng = np.random.default_rng(0)
        y = 8 + rng.standard_normal(500)
        dec = seasonal_detrend(_ts(y), "2h", mode="additive")
        np.testing.assert_allclose(dec.recompose(), y, rtol=1e-12)

    def test_recompose_multiplicative(self):
        rng = np.random.default_rng(1)
        y = 8 + 0.5 * rng.standard_normal(500)
        dec = seasonal_detrend(_ts(y), "2h", mode="multiplicative")
        np.testing.assert_allclose(dec.recompose(), y, rtol=1e-9)

    def test_multiplicative_rejects_nonpositive(self):
        y = np.full(100, 5.0)
        y[7] = 0.0
        with pytest.raises(DomainError) as exc:
            seasonal_detrend(_ts(y), "1h", mode="multiplicative")
        assert "index 7" in str(exc.value)

    def test_unknown_mode(self):
        with pytest.raises(ParameterError):
            seasonal_detrend(_ts(np.ones(50)), "1h", mode="log")

    def test_metadata(self):
        dec = seasonal_detrend(_ts(np.sin(np.arange(200) / 7) + 5), "6h")
        assert dec.method == "seasonal"
        assert dec.mode == "additive"
        assert dec.trend.indicator == "trend"
        assert dec.fluctuation.indicator == "fluctuation"


class TestExtremaDetection:
    def test_simple_peaks(self):
        mx, mn = _extrema(np.array([0, 1, 0, -1, 0, 1, 0], dtype=float))
        assert mx.tolist() == [1, 5]
        assert mn.tolist() == [3]

    def test_plateau_counts_once_at_midpoint(self):
        mx, mn = _extrema(np.array([0, 1, 1, 1, 0], dtype=float))
        assert mx.tolist() == [2]
        assert mn.size == 0

    def test_monotone_has_none(self):
        mx, mn = _extrema(np.arange(10, dtype=float))
        assert mx.size == 0 and mn.size == 0


class TestEmd:
    def test_pure_sine_single_imf(self):
        t = np.arange(1024)
        tone = np.sin(2 * np.pi * t / 32)
        imfset = emd(_ts(2.0 + tone))
        assert len(imfset) == 1
        assert not imfset.degenerate
        corr = np.corrcoef(imfset.imfs[0].values, tone)[0, 1]
        assert corr > 0.99
        np.testing.assert_allclose(imfset.residue.values, 2.0, atol=1e-6)

    def test_two_tone_separation(self):
        t = np.arange(1000, dtype=float)
        fast = np.sin(2 * np.pi * t / 10)
        slow = np.sin(2 * np.pi * t / 100)
        imfset = emd(fast + slow)
        # slow-to-fast ordering puts the period-10 tone last
        fastest = np.asarray(imfset.imfs[-1])
        assert np.corrcoef(fastest, fast)[0, 1] > 0.95

    def test_monotone_ramp_degenerate(self):
        y = np.linspace(0.0, 5.0, 200)
        imfset = emd(y)
        assert len(imfset) == 0
        assert imfset.degenerate
        np.testing.assert_array_equal(np.asarray(imfset.residue), y)

    def test_too_short_degenerate(self):
        imfset = emd(np.array([1.0, 3.0, 2.0, 4.0, 1.0]))
        assert imfset.degenerate
        assert len(imfset) == 0

    def test_completeness_two_tone(self):
        t = np.arange(1000, dtype=float)
        y = np.sin(2 * np.pi * t / 10) + 2 * np.sin(2 * np.pi * t / 100) + 5
        imfset = emd(y)
        recon = np.sum([np.asarray(v) for v in imfset.imfs], axis=0) + np.asarray(imfset.residue)
        assert np.abs(recon - y).max() <= 1e-8 * np.ptp(y)

    def test_imf_extrema_zero_crossing_balance(self):
        t = np.arange(1000, dtype=float)
        y = np.sin(2 * np.pi * t / 10) + np.sin(2 * np.pi * t / 100)
        for imf in emd(y).imfs:
            v = np.asarray(imf)
            mx, mn = _extrema(v)
            assert abs((mx.size + mn.size) - _zero_crossings(v)) <= 1

    def test_sift_stats_reported(self):
        t = np.arange(512, dtype=float)
        imfset = emd(np.sin(2 * np.pi * t / 16) + 0.5 * np.sin(2 * np.pi * t / 128))
        assert len(imfset.sift_stats) == len(imfset)
        for entry in imfset.sift_stats:
            assert entry["iterations"] >= 1
            assert entry["stop"] in ("sd", "max_iters", "no_envelope")

    def test_gap_rejected(self):
        y = np.sin(np.arange(100) / 3.0)
        y[42] = np.nan
        with pytest.raises(GapError):
            emd(y)

    def test_config_validation(self):
        with pytest.raises(ParameterError):
            EmdConfig(sd_threshold=0.0)
        with pytest.raises(ParameterError):
            EmdConfig(max_sift_iters=0)
        with pytest.raises(ParameterError):
            EmdConfig(boundary="wrap")

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(128, 256))
    def test_completeness_random_walks(self, seed, n):
        rng = np.random.default_rng(seed)
        y = np.cumsum(rng.standard_normal(n))
        imfset = emd(y)
        recon = np.asarray(imfset.residue)
        if len(imfset):
            recon = recon + np.sum([np.asarray(v) for v in imfset.imfs], axis=0)
        span = np.ptp(y) if np.ptp(y) > 0 else 1.0
        assert np.abs(recon - y).max() <= 1e-8 * span


class TestEmdDetrend:
    def _fixture(self):
        t = np.arange(2048, dtype=float)
        y = (10.0 + 2 * np.sin(2 * np.pi * t / 512)
             + np.sin(2 * np.pi * t / 64) + 0.4 * np.sin(2 * np.pi * t / 12))
        return _ts(y), y

    def test_recompose_additive(self):
        ts, y = self._fixture()
        dec = emd_detrend(ts, m=2, mode="additive")
        np.testing.assert_allclose(dec.recompose(), y, atol=1e-9 * np.ptp(y))

    def test_recompose_multiplicative(self):
        ts, y = self._fixture()
        dec = emd_detrend(ts, m=2, mode="multiplicative")
        np.testing.assert_allclose(dec.recompose(), y, rtol=1e-9)
        assert np.all(dec.trend.values > 0)
        assert np.all(dec.fluctuation.values > 0)

    def test_m_equals_n_additive_trend_zero(self):
        ts, _ = self._fixture()
        probe = emd_detrend(ts, m=1)
        n = probe.params["n_imfs"]
        dec = emd_detrend(ts, m=n, mode="additive")
        np.testing.assert_array_equal(dec.trend.values, 0.0)

    def test_m_equals_n_multiplicative_trend_one(self):
        ts, _ = self._fixture()
        n = emd_detrend(ts, m=1, mode="multiplicative").params["n_imfs"]
        dec = emd_detrend(ts, m=n, mode="multiplicative")
        np.testing.assert_array_equal(dec.trend.values, 1.0)

    def test_m_out_of_range_reports_n(self):
        ts, _ = self._fixture()
        n = emd_detrend(ts, m=1).params["n_imfs"]
        with pytest.raises(ParameterError) as exc:
            emd_detrend(ts, m=n + 1)
        assert f"N={n}" in str(exc.value)
        with pytest.raises(ParameterError):
            emd_detrend(ts, m=0)

    def test_adjacent_m_moves_one_imf(self):
        ts, _ = self._fixture()
        imfset = emd(ts)
        n = len(imfset)
        assert n >= 3
        for m in range(1, n):
            a = emd_detrend(ts, m=m, mode="additive")
            b = emd_detrend(ts, m=m + 1, mode="additive")
            moved = imfset.imfs[n - m - 1].values
            np.testing.assert_allclose(a.trend.values - b.trend.values, moved, atol=1e-10)

    def test_multiplicative_is_exp_of_log_additive(self):
        ts, y = self._fixture()
        dec = emd_detrend(ts, m=2, mode="multiplicative")
        log_dec = emd_detrend(np.log(y), m=2, mode="additive")
        np.testing.assert_allclose(dec.trend.values, np.exp(np.asarray(log_dec.trend)), rtol=1e-12)
        np.testing.assert_allclose(dec.fluctuation.values, np.exp(np.asarray(log_dec.fluctuation)),
                                   rtol=1e-12)

    def test_multiplicative_rejects_nonpositive(self):
        y = np.sin(np.arange(300) / 5.0)   # crosses zero
        with pytest.raises(DomainError):
            emd_detrend(y + 0.5, m=1, mode="multiplicative")

    def test_degenerate_input_has_no_valid_m(self):
        with pytest.raises(ParameterError):
            emd_detrend(np.linspace(1.0, 2.0, 100), m=1)

    def test_trend_smoother_than_input(self):
        ts, y = self._fixture()
        dec = emd_detrend(ts, m=2, mode="additive")
        mx_y, mn_y = _extrema(y)
        mx_t, mn_t = _extrema(dec.trend.values)
        assert mx_t.size + mn_t.size < mx_y.size + mn_y.size

    def test_params_record_split(self):
        ts, _ = self._fixture()
        dec = emd_detrend(ts, m=2)
        assert dec.method == "emd"
        assert dec.params["m"] == 2
        assert dec.params["n_imfs"] >= 3
