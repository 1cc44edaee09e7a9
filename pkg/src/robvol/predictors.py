"""Ex-ante volatility predictors built from the ``m`` returns strictly before ``t``."""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DataError, DomainError
from .huber import tuning_free_fit
from .series import VolSeries, as_returns
from .weights import DecayWeights, Direction, make_weights


def backward_weights(lam: float, m: int) -> DecayWeights:
    """Weights over ``t-1, ..., t-m`` (``m`` past returns)."""
    if int(m) != m or m < 1:
        raise DomainError(f"predictor window must hold at least one return, got m={m!r}")
    return make_weights(lam, int(m) - 1, Direction.BACKWARD)


def default_predictor_z(n_eff: float) -> float:
    return math.log(n_eff)


def _backward_windows(returns, lam: float, m: int):
    x = as_returns(returns)
    w = backward_weights(lam, m)
    n = len(x)
    if n <= m:
        raise DataError(f"series of length {n} too short for backward window m={m}")
    # row i covers times i..i+m-1 and predicts t = i + m
    windows = sliding_window_view(x.squared(), m)[: n - m]
    valid = np.zeros(n, dtype=bool)
    valid[m:] = True
    return x, w, windows, valid


def _meta(method: str, w: DecayWeights, m: int, **extra) -> dict:
    return {"method": method, "name": method, "lambda": w.lam, "m": int(m),
            "direction": w.direction.value, "n_eff": w.n_eff, **extra}


def _place(vals, n: int, m: int) -> np.ndarray:
    out = np.full(n, np.nan)
    out[m:] = vals
    return out


def ewma_predictor(returns, lam: float, m: int) -> VolSeries:
    """``h_t = sum_{s=t-m}^{t-1} nu_{s,t} X_s^2``; the first ``m`` points are invalid."""
    x, w, windows, valid = _backward_windows(returns, lam, m)
    vals = windows @ w.aligned()
    return VolSeries(_place(vals, len(x), m), valid, _meta("ewma", w, m))


def clipped_ewma_predictor(returns, lam: float, m: int, M: float = math.inf) -> VolSeries:
    """EWMA predictor capped at ``M``."""
    if not M > 0:
        raise DomainError(f"M must be positive, got {M!r}")
    base = ewma_predictor(returns, lam, m)
    vals = np.minimum(base.values, M)
    return VolSeries(vals, base.valid, {**base.meta, "method": "clipewma", "name": "clipewma", "M": M})


def huber_predictor(returns, lam: float, m: int, z: float | None = None) -> VolSeries:
    """Tuning-free weighted Huber fit over each backward window of squared returns."""
    x, w, windows, valid = _backward_windows(returns, lam, m)
    z = default_predictor_z(w.n_eff) if z is None else float(z)
    if not (np.isfinite(z) and z > 0):
        raise DomainError(f"z must be positive, got {z!r}")
    wa = w.aligned()
    vals = np.empty(windows.shape[0])
    taus = np.empty(windows.shape[0])
    n_fb = 0
    for i, win in enumerate(windows):
        fit = tuning_free_fit(win, wa, z)
        vals[i], taus[i] = fit.theta, fit.tau
        n_fb += fit.tau_fallback
    meta = _meta("huber", w, m, z=z, tau_fallback=n_fb)
    return VolSeries(_place(vals, len(x), m), valid, meta, tau=_place(taus, len(x), m))


PREDICTORS = {
    "ewma": ewma_predictor,
    "clipewma": clipped_ewma_predictor,
    "huber": huber_predictor,
}
