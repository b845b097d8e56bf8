"""Regularized day-ahead forecasting of quarter-hourly electric load."""

from .calendar import (
    SpecialDayCalendar,
    SpecialReason,
    date_of,
    day_serial,
    is_special,
    test_day_set,
)
from .estimators import (
    EstimatorKind,
    WeightSurface,
    fit,
    fit_ols,
    fit_one,
    fit_rbf,
    fit_ta,
    fit_te,
    fit_ts,
    persistence_surface,
)
from .evaluation import (
    aggregate_forecasts,
    metrics_report,
    predicted_mse_pair,
    residual_stats,
    residuals,
)
from .experiment import Scenario, SyntheticSpec, grid_search, run_scenario, synth_generate
from .forecast import reconstruct_load, rolling_forecast
from .series import (
    LoadSeries,
    build_training_pairs,
    ingest_csv,
    log_transform,
    mask_special,
    preprocess,
    seven_day_diff,
)

__version__ = "0.1.0"

__all__ = [
    "SpecialDayCalendar",
    "SpecialReason",
    "date_of",
    "day_serial",
    "is_special",
    "test_day_set",
    "EstimatorKind",
    "WeightSurface",
    "fit",
    "fit_ols",
    "fit_one",
    "fit_rbf",
    "fit_ta",
    "fit_te",
    "fit_ts",
    "persistence_surface",
    "aggregate_forecasts",
    "metrics_report",
    "predicted_mse_pair",
    "residual_stats",
    "residuals",
    "Scenario",
    "SyntheticSpec",
    "grid_search",
    "run_scenario",
    "synth_generate",
    "reconstruct_load",
    "rolling_forecast",
    "LoadSeries",
    "build_training_pairs",
    "ingest_csv",
    "log_transform",
    "mask_special",
    "preprocess",
    "seven_day_diff",
]
