"""Analysis toolkit for river water-quality telemetry: cleaning, seasonal and
EMD detrending, q-Gaussian fluctuation statistics, baseline forecasting, and a
sparse-attention forward pass."""

from .attention import (AttentionInput, AttentionOutput, dense_attention,
                        export_heatmap, probsparse_attention,
                        query_sparsity_measure)
from .data import (KNOWN_INDICATORS, CleanConfig, CleanReport, ParseResult,
                   RawRecord, SiteMeta, attach_rainfall, clean,
                   load_rainfall_csv, load_site_catalog, parse_site_csv,
                   read_clean_csv, write_clean_csv)
from .decompose import (Decomposition, EmdConfig, IMFSet, emd, emd_detrend,
                        moving_average_trend, seasonal_detrend)
from .errors import (DataError, DegenerateRegressionError, DomainError,
                     EmptyInputError, GapError, InsufficientDataError,
                     InvalidWindowError, NumericalError, ParameterError,
                     RiverfluctError, SchemaError)
from .forecast import (COVARIATES, FORECAST_SPLIT, REGRESSION_SPLIT,
                       LinearForecaster, MetricsTable, NormStats,
                       RegressionResult, SplitSpec, WindowSet,
                       build_covariates, chronological_split, covariate_matrix,
                       evaluate_baselines, fft_dominant_periods,
                       fit_norm_stats, inverse_zscore, mae, make_windows,
                       predict_last, predict_repeat, same_time_regression,
                       smape, split_indices, zscore)
from .series import (DEFAULT_STEP, SegmentationResult, TimeSeries,
                     segment_contiguous)
from .superstat import (ALL_METHODS, EmpiricalPdf, FitOptions, FitResult,
                        MethodFit, QGaussianParams, SpatialTrendFit,
                        SuperstatConfig, beta_distance_regression,
                        compare_detrendings, empirical_pdf, fit_q_gaussian,
                        norm_constant, q_gaussian_loglik, q_gaussian_logpdf,
                        q_gaussian_pdf, sample_q_gaussian,
                        sample_superstatistical)

__version__ = "0.1.0"

__all__ = [
    "AttentionInput", "AttentionOutput", "dense_attention", "export_heatmap",
    "probsparse_attention", "query_sparsity_measure",
    "KNOWN_INDICATORS", "CleanConfig", "CleanReport", "ParseResult",
    "RawRecord", "SiteMeta", "attach_rainfall", "clean", "load_rainfall_csv",
    "load_site_catalog", "parse_site_csv", "read_clean_csv", "write_clean_csv",
    "Decomposition", "EmdConfig", "IMFSet", "emd", "emd_detrend",
    "moving_average_trend", "seasonal_detrend",
    "DataError", "DegenerateRegressionError", "DomainError", "EmptyInputError",
    "GapError", "InsufficientDataError", "InvalidWindowError", "NumericalError",
    "ParameterError", "RiverfluctError", "SchemaError",
    "COVARIATES", "FORECAST_SPLIT", "REGRESSION_SPLIT", "LinearForecaster",
    "MetricsTable", "NormStats", "RegressionResult", "SplitSpec", "WindowSet",
    "build_covariates", "chronological_split", "covariate_matrix",
    "evaluate_baselines", "fft_dominant_periods", "fit_norm_stats",
    "inverse_zscore", "mae", "make_windows", "predict_last", "predict_repeat",
    "same_time_regression", "smape", "split_indices", "zscore",
    "DEFAULT_STEP", "SegmentationResult", "TimeSeries", "segment_contiguous",
    "ALL_METHODS", "EmpiricalPdf", "FitOptions", "FitResult", "MethodFit",
    "QGaussianParams", "SpatialTrendFit", "SuperstatConfig",
    "beta_distance_regression", "compare_detrendings", "empirical_pdf",
    "fit_q_gaussian", "norm_constant", "q_gaussian_loglik", "q_gaussian_logpdf",
    "q_gaussian_pdf", "sample_q_gaussian", "sample_superstatistical",
    "__version__",
]
