"""Robust volatility proxies, predictors and forecast evaluation."""

__version__ = "0.1.0"

from .errors import ConfigError, DataError, DomainError, NumericError, RobvolError
from .huber import HuberFit, solve_location, solve_tau, tuning_free_fit
from .losses import MSE, QL, EvalReport, evaluate, optimal_scale
from .predictors import clipped_ewma_predictor, ewma_predictor, huber_predictor
from .proxies import clipped_ewma_proxy, clipped_single_proxy, ewma_proxy, huber_proxy
from .series import ReturnSeries, VolSeries
from .weights import DecayWeights, Direction, make_weights

__all__ = [
    "ConfigError", "DataError", "DomainError", "NumericError", "RobvolError",
    "HuberFit", "solve_location", "solve_tau", "tuning_free_fit",
    "MSE", "QL", "EvalReport", "evaluate", "optimal_scale",
    "clipped_ewma_predictor", "ewma_predictor", "huber_predictor",
    "clipped_ewma_proxy", "clipped_single_proxy", "ewma_proxy", "huber_proxy",
    "ReturnSeries", "VolSeries", "DecayWeights", "Direction", "make_weights",
]
