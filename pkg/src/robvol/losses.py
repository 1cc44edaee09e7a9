"""Robust forecast losses, optimal rescaling and proxy-based evaluation.

A robust loss has the form ``L(s, h) = f(h) + B(s) + C(h) * s`` with ``C``
decreasing, where ``s`` is the (proxy) variance and ``h`` the forecast.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DataError, DomainError
from .series import VolSeries


def mse(sigma2, h):
    """Squared error ``(sigma2 - h)**2``."""
    d = np.asarray(sigma2, dtype=float) - np.asarray(h, dtype=float)
    out = d * d
    return out[()] if out.ndim == 0 else out


def ql(sigma2, h):
    """Quasi-likelihood loss ``sigma2/h - log(sigma2/h) - 1``.

    Raises DomainError on nonpositive arguments; zero or negative proxies
    must be floored before they reach this loss.
    """
    s = np.asarray(sigma2, dtype=float)
    hh = np.asarray(h, dtype=float)
    if np.any(~(s > 0)) or np.any(~(hh > 0)):
        raise DomainError("QL requires strictly positive variance and forecast")
    r = s / hh
    out = r - np.log(r) - 1.0
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class RobustLossSpec:
    """A loss ``eval(sigma2, h)`` together with its robust-form components."""

    name: str
    eval: Callable
    C: Callable
    f: Callable
    B: Callable | None = None
    order: float | None = None

    def __call__(self, sigma2, h):
        return self.eval(sigma2, h)


MSE = RobustLossSpec(
    name="mse",
    eval=mse,
    C=lambda h: -2.0 * np.asarray(h, dtype=float),
    f=lambda h: np.asarray(h, dtype=float) ** 2,
    B=lambda s: np.asarray(s, dtype=float) ** 2,
    order=2,
)

QL = RobustLossSpec(
    name="ql",
    eval=ql,
    C=lambda h: 1.0 / np.asarray(h, dtype=float),
    f=lambda h: np.log(np.asarray(h, dtype=float)),
    B=lambda s: -np.log(np.asarray(s, dtype=float)) - 1.0,
    order=0,
)

LOSSES = {"mse": MSE, "ql": QL}


def get_loss(loss) -> RobustLossSpec:
    if isinstance(loss, RobustLossSpec):
        return loss
    try:
        return LOSSES[str(loss).lower()]
    except KeyError:
        raise DomainError(f"unknown loss {loss!r}; expected one of {sorted(LOSSES)}") from None


def _as_arrays(proxy, pred) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Jointly valid values of a proxy and a predictor."""
    if isinstance(proxy, VolSeries):
        pv, pm = proxy.values, proxy.valid
    else:
        pv = np.asarray(proxy, dtype=float)
        pm = np.isfinite(pv)
    if isinstance(pred, VolSeries):
        hv, hm = pred.values, pred.valid
    else:
        hv = np.asarray(pred, dtype=float)
        hm = np.isfinite(hv)
    if pv.shape != hv.shape:
        raise DataError(f"proxy length {pv.size} != predictor length {hv.size}")
    mask = pm & hm
    return pv[mask], hv[mask], mask


def joint_mask(*series: VolSeries) -> np.ndarray:
    mask = np.ones(len(series[0]), dtype=bool)
    for s in series:
        if len(s) != mask.size:
            raise DataError("series lengths differ")
        mask &= s.valid
    return mask


def optimal_scale(loss, proxy, pred) -> float:
    """Global factor ``beta`` minimizing the mean of ``L(proxy, beta * pred)``.

    MSE and QL use their closed forms; other losses are minimized numerically
    over ``log beta``.
    """
    loss = get_loss(loss)
    s, h, _ = _as_arrays(proxy, pred)
    if s.size == 0:
        raise DataError("proxy and predictor have no jointly valid points")
    if loss.name == "mse":
        den = float(np.dot(h, h))
        if den == 0:
            raise DomainError("predictor is identically zero")
        return float(np.dot(h, s) / den)
    if loss.name == "ql":
        if np.any(s <= 0) or np.any(h <= 0):
            raise DomainError("QL scaling requires strictly positive values")
        return float(np.mean(s / h))
    obj = lambda lb: float(np.mean(loss.eval(s, math.exp(lb) * h)))  # noqa: E731
    res = minimize_scalar(obj, bracket=(-1.0, 1.0), tol=1e-12)
    return float(math.exp(res.x))


def aggregate_loss(loss, proxy, pred, scale: float | None = None) -> float:
    """Mean loss over jointly valid points, optionally with a rescaled predictor."""
    loss = get_loss(loss)
    s, h, _ = _as_arrays(proxy, pred)
    if s.size == 0:
        raise DataError("proxy and predictor have no jointly valid points")
    if scale is not None:
        h = scale * h
    return float(np.mean(loss.eval(s, h)))


def _trailing_means(x: np.ndarray, window: int) -> np.ndarray:
    c = np.concatenate([[0.0], np.cumsum(x)])
    return (c[window:] - c[:-window]) / window


def rolling_loss_difference(loss, proxy, pred_a, pred_b, window: int) -> np.ndarray:
    """Trailing-window mean of ``L(proxy, pred_a) - L(proxy, pred_b)``.

    Computed over the jointly valid points of all three series; element
    ``i`` covers valid points ``i .. i + window - 1``. Positive values mean
    ``pred_b`` had the lower loss in that window.
    """
    loss = get_loss(loss)
    if int(window) != window or window < 1:
        raise DomainError(f"window must be a positive integer, got {window!r}")
    mask = joint_mask(proxy, pred_a, pred_b)
    s = proxy.values[mask]
    diff = loss.eval(s, pred_a.values[mask]) - loss.eval(s, pred_b.values[mask])
    if diff.size < window:
        raise DataError(f"only {diff.size} jointly valid points for window {window}")
    return _trailing_means(np.asarray(diff, dtype=float), int(window))


def rolling_optimal_scale(loss, proxy, pred, window: int) -> np.ndarray:
    """Optimal scale fitted on each trailing window of jointly valid points."""
    loss = get_loss(loss)
    s, h, _ = _as_arrays(proxy, pred)
    if s.size < window:
        raise DataError(f"only {s.size} jointly valid points for window {window}")
    if loss.name == "mse":
        return _trailing_means(h * s, window) / _trailing_means(h * h, window)
    if loss.name == "ql":
        return _trailing_means(s / h, window)
    return np.array([optimal_scale(loss, s[i:i + window], h[i:i + window])
                     for i in range(s.size - window + 1)])


def false_comparison_rate(loss_a, loss_b, window: int, a_better: bool) -> float:
    """Fraction of trailing windows whose mean loss ordering contradicts the truth.

    ``a_better`` states the ground truth (A has the lower expected loss).
    Windows with an exact tie are not counted as false.
    """
    la = np.asarray(loss_a, dtype=float)
    lb = np.asarray(loss_b, dtype=float)
    if la.shape != lb.shape:
        raise DataError("loss series differ in length")
    if la.size < window:
        raise DataError(f"only {la.size} points for window {window}")
    d = _trailing_means(la - lb, int(window))
    wrong = d > 0 if a_better else d < 0
    return float(np.mean(wrong))


@dataclass
class PredictorScore:
    name: str
    raw: float
    scaled: float | None
    beta: float | None


@dataclass
class EvalReport:
    loss: str
    proxy: dict
    T_effective: int
    scores: list[PredictorScore]
    rolling: dict[str, list[float]] = field(default_factory=dict)

    def score(self, name: str) -> PredictorScore:
        for s in self.scores:
            if s.name == name:
                return s
        raise KeyError(name)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=_json_default)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["predictor", "loss", "proxy", "T_effective", "raw", "scaled", "beta"])
        for s in self.scores:
            wr.writerow([s.name, self.loss, self.proxy.get("name", ""), self.T_effective,
                         fmt(s.raw), fmt(s.scaled), fmt(s.beta)])
        return buf.getvalue()


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def fmt(x) -> str:
    """Shortest round-trip decimal text for a float; empty for None."""
    if x is None:
        return ""
    return repr(float(x))


def evaluate(loss, proxy: VolSeries, predictors, scale: bool = True) -> EvalReport:
    """Score several predictors against one proxy on their common valid points."""
    loss = get_loss(loss)
    preds = list(predictors.values()) if isinstance(predictors, dict) else list(predictors)
    names = list(predictors.keys()) if isinstance(predictors, dict) else [p.name for p in preds]
    mask = joint_mask(proxy, *preds)
    T_eff = int(mask.sum())
    if T_eff == 0:
        raise DataError("no time point where the proxy and all predictors are valid")
    p = VolSeries(np.where(mask, proxy.values, np.nan), mask, proxy.meta)
    scores = []
    for name, pred in zip(names, preds):
        raw = aggregate_loss(loss, p, pred)
        if scale:
            beta = optimal_scale(loss, p, pred)
            scaled = aggregate_loss(loss, p, pred, scale=beta)
        else:
            beta = scaled = None
        scores.append(PredictorScore(name, raw, scaled, beta))
    return EvalReport(loss=loss.name, proxy=_plain(proxy.meta), T_effective=T_eff, scores=scores)


def _plain(meta: dict) -> dict:
    return json.loads(json.dumps(meta, default=_json_default))
