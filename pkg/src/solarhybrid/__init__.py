"""Hourly global solar radiation forecasting with ARMA, MLP and hybrid predictors."""
from .arma import ArmaModel, fit_yule_walker, select_order
from .evaluation import nrmse, rank_predictors, reliability_index
from .hybrid import HybridModel, fit_hybrid, run_hybrid
from .ingest import HourlySeries, daytime_filter, load_csv, repair_missing, split
from .mlp import MlpArchitecture, MlpModel, train_lm
from .solar_geometry import StationMeta, clearsky_ghi, fit_solis
from .stationarize import Method, destationarize, stationarize
from .stats import acf, pacf

__version__ = "0.1.0"

__all__ = [
    "ArmaModel", "HourlySeries", "HybridModel", "Method", "MlpArchitecture", "MlpModel",
    "StationMeta", "acf", "clearsky_ghi", "daytime_filter", "destationarize", "fit_hybrid",
    "fit_solis", "fit_yule_walker", "load_csv", "nrmse", "pacf", "rank_predictors",
    "reliability_index", "repair_missing", "run_hybrid", "select_order", "split",
    "stationarize", "train_lm",
]
