"""Ex-post volatility proxies built from forward windows ``X_t, ..., X_{t+m}``.

The last ``m`` points of every proxy are priming points and are invalid.
Robust proxies take the evaluation horizon ``T`` (number of points that
will be averaged downstream) as an explicit constant, so the proxy does not
change when the evaluation window slides.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DataError, DomainError
from .huber import _locate, _tau_root, tuning_free_fit
from .series import VolSeries, as_returns
from .weights import DecayWeights, Direction, make_weights


def default_proxy_z(n_eff: float) -> float:
    """Deviation parameter for proxies, ``2 log n_eff``."""
    return 2.0 * math.log(n_eff)


def _forward_windows(returns, lam: float, m: int):
    x = as_returns(returns)
    w = make_weights(lam, m, Direction.FORWARD)
    n = len(x)
    if n <= m:
        raise DataError(f"series of length {n} too short for forward window m={m}")
    sq = x.squared()
    windows = sliding_window_view(sq, m + 1)  # row t covers t..t+m
    valid = np.zeros(n, dtype=bool)
    valid[: n - m] = True
    return x, w, windows, valid


def _check_zt(z: float, T) -> None:
    if not (np.isfinite(z) and z > 0):
        raise DomainError(f"z must be positive, got {z!r}")
    if not (T >= 1):
        raise DomainError(f"T must be at least 1, got {T!r}")


def _meta(method: str, w: DecayWeights, **extra) -> dict:
    return {"method": method, "name": method, "lambda": w.lam, "m": w.m,
            "direction": w.direction.value, "n_eff": w.n_eff, **extra}


def _pad(vals, n: int) -> np.ndarray:
    out = np.full(n, np.nan)
    out[: len(vals)] = vals
    return out


def ewma_proxy(returns, lam: float, m: int) -> VolSeries:
    """Vanilla forward EWMA of squared returns."""
    x, w, windows, valid = _forward_windows(returns, lam, m)
    vals = windows @ w.weights
    return VolSeries(_pad(vals, len(x)), valid, _meta("ewma", w))


def _raw_fourth_taus(windows: np.ndarray, w: DecayWeights, z: float) -> tuple[np.ndarray, np.ndarray]:
    # tau from sum w^2 min(X^4, tau^2/w^2)/tau^2 = z, i.e. residuals about zero
    taus = np.empty(windows.shape[0])
    fb = np.zeros(windows.shape[0], dtype=bool)
    for t, win in enumerate(windows):
        taus[t], fb[t] = _tau_root(w.weights * win, z)
    return taus, fb


def clipped_single_proxy(returns, lam: float, m: int, z: float | None = None, T: int = 1) -> VolSeries:
    """Squared return clipped at ``tau_t * sqrt(n_eff * T)``.

    The window is used only to tune ``tau_t``. When the tau equation has no
    root the clip is disabled.
    """
    x, w, windows, valid = _forward_windows(returns, lam, m)
    z = default_proxy_z(w.n_eff) if z is None else float(z)
    _check_zt(z, T)
    taus, fb = _raw_fourth_taus(windows, w, z)
    cap = np.where(fb, np.inf, taus * math.sqrt(w.n_eff * T))
    vals = np.minimum(windows[:, 0], cap)
    meta = _meta("clip1", w, z=z, T_used=int(T), tau_fallback=int(fb.sum()))
    return VolSeries(_pad(vals, len(x)), valid, meta, tau=_pad(taus, len(x)))


def clipped_ewma_proxy(returns, lam: float, m: int, z: float | None = None, T: int = 1) -> VolSeries:
    """``sum_s min(w_s X_s^2, tau_t * sqrt(T / n_eff))`` over the forward window."""
    x, w, windows, valid = _forward_windows(returns, lam, m)
    z = default_proxy_z(w.n_eff) if z is None else float(z)
    _check_zt(z, T)
    taus, fb = _raw_fourth_taus(windows, w, z)
    cap = np.where(fb, np.inf, taus * math.sqrt(T / w.n_eff))
    vals = np.minimum(windows * w.weights, cap[:, None]).sum(axis=1)
    meta = _meta("clipewma", w, z=z, T_used=int(T), tau_fallback=int(fb.sum()))
    return VolSeries(_pad(vals, len(x)), valid, meta, tau=_pad(taus, len(x)))


def huber_proxy(returns, lam: float, m: int, z: float | None = None, T: int = 1) -> VolSeries:
    """Weighted Huber proxy with the locally tuned level inflated by ``sqrt(T / n_eff)``.

    For each ``t`` the tuning-free fit on the forward window gives
    ``tau_t``; the score equation is then re-solved with ``c_t = tau_t *
    sqrt(T / n_eff)``. Negative solutions are floored at zero and their
    indices recorded in ``meta["floored"]``.
    """
    x, w, windows, valid = _forward_windows(returns, lam, m)
    z = default_proxy_z(w.n_eff) if z is None else float(z)
    _check_zt(z, T)
    inflate = math.sqrt(T / w.n_eff)
    n_win = windows.shape[0]
    vals = np.empty(n_win)
    taus = np.empty(n_win)
    fallback = []
    for t, win in enumerate(windows):
        fit = tuning_free_fit(win, w.weights, z)
        taus[t] = fit.tau
        if fit.tau_fallback:
            fallback.append(t)
            vals[t] = float(np.dot(w.weights, win))
        else:
            vals[t] = _locate(win, w.weights, fit.tau * inflate)
    floored = np.nonzero(vals < 0)[0]
    vals = np.maximum(vals, 0.0)
    meta = _meta("huber", w, z=z, T_used=int(T), floored=floored.tolist(),
                 tau_fallback=len(fallback))
    return VolSeries(_pad(vals, len(x)), valid, meta, tau=_pad(taus, len(x)))


PROXIES = {
    "ewma": ewma_proxy,
    "clip1": clipped_single_proxy,
    "clipewma": clipped_ewma_proxy,
    "huber": huber_proxy,
}
