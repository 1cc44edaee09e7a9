"""Predictor/proxy configuration records and the builders that run them."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError
from .predictors import clipped_ewma_predictor, ewma_predictor, huber_predictor
from .proxies import PROXIES
from .series import VolSeries
from .weights import half_life_to_lambda, window_for_half_life

PREDICTOR_METHODS = ("ewma", "clipewma", "huber")
PROXY_METHODS = tuple(PROXIES)


@dataclass(frozen=True)
class PredictorConfig:
    method: str
    half_life: float
    m: int | None = None
    z: float | None = None
    M: float | None = None
    name: str | None = None

    def __post_init__(self):
        if self.method not in PREDICTOR_METHODS:
            raise ConfigError(f"unknown predictor method {self.method!r}")
        if not self.half_life > 0:
            raise ConfigError(f"predictor half-life must be positive, got {self.half_life!r}")
        if self.m is not None and self.m < 1:
            raise ConfigError(f"predictor m must be >= 1, got {self.m!r}")

    @property
    def window(self) -> int:
        return self.m if self.m is not None else window_for_half_life(self.half_life)

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        hl = f"{self.half_life:g}"
        base = {"ewma": "EWMA", "clipewma": "ClipEWMA", "huber": "Huber"}[self.method]
        return f"{base}_HL{hl}"


@dataclass(frozen=True)
class ProxyConfig:
    method: str
    half_life: float = 7.0
    m: int | None = None
    z: float | None = None
    T: int | None = None
    name: str | None = None

    def __post_init__(self):
        if self.method not in PROXY_METHODS:
            raise ConfigError(f"unknown proxy method {self.method!r}")
        if not self.half_life > 0:
            raise ConfigError(f"proxy half-life must be positive, got {self.half_life!r}")
        if self.m is not None and self.m < 0:
            raise ConfigError(f"proxy m must be >= 0, got {self.m!r}")

    @property
    def window(self) -> int:
        return self.m if self.m is not None else window_for_half_life(self.half_life)

    def label(self, T: int | None = None) -> str:
        if self.name:
            return self.name
        if self.method == "ewma":
            return "EWMA"
        T = self.T if self.T is not None else T
        base = {"huber": "Huber", "clip1": "Clip1", "clipewma": "ClipEWMA"}[self.method]
        return f"{base}_{T}" if T is not None else base


def build_predictor(returns, cfg: PredictorConfig) -> VolSeries:
    lam = half_life_to_lambda(cfg.half_life)
    if cfg.method == "ewma":
        out = ewma_predictor(returns, lam, cfg.window)
    elif cfg.method == "clipewma":
        out = clipped_ewma_predictor(returns, lam, cfg.window, math.inf if cfg.M is None else cfg.M)
    else:
        out = huber_predictor(returns, lam, cfg.window, cfg.z)
    return out.renamed(cfg.label)


def build_proxy(returns, cfg: ProxyConfig, T_default: int | None = None) -> VolSeries:
    lam = half_life_to_lambda(cfg.half_life)
    fn = PROXIES[cfg.method]
    if cfg.method == "ewma":
        out = fn(returns, lam, cfg.window)
    else:
        T = cfg.T if cfg.T is not None else T_default
        if T is None:
            raise ConfigError(f"proxy {cfg.method!r} needs an evaluation horizon T")
        out = fn(returns, lam, cfg.window, cfg.z, int(T))
    return out.renamed(cfg.label(T_default))


def effective_length(n: int, predictors, proxy_windows) -> int:
    """Points left after backward priming (largest predictor window) and forward priming."""
    mb = max((p.window for p in predictors), default=0)
    mf = max(proxy_windows, default=0)
    return max(0, n - mb - mf)
