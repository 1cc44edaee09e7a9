"""Sample-weighted Huber M-estimation with a data-driven robustification level.

Each observation ``k`` with weight ``w_k`` is given its own threshold
``tau / w_k``, so every summand of the weighted score is bounded by ``tau``.
The location is the root of

    S(theta) = sum_k w_k * clip(d_k - theta, -tau/w_k, tau/w_k)

and ``tau`` is tuned by solving

    g(tau) = sum_k w_k**2 * min((d_k - theta)**2, tau**2 / w_k**2) / tau**2 = z.

Both functions are monotone and piecewise simple (linear in ``theta``;
``A / tau**2 + K`` in ``tau``), so the roots are located exactly by searching
the sorted breakpoints and solving in closed form on the bracketing piece.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DataError, DomainError
from .weights import DecayWeights

TAU_FLOOR = np.finfo(float).tiny


def _check_tau(tau) -> None:
    if not np.all(np.asarray(tau) > 0):
        raise DomainError(f"tau must be positive, got {tau!r}")


def huber_loss(x, tau):
    """Huber loss: quadratic on ``[-tau, tau]`` and linear outside."""
    _check_tau(tau)
    x = np.asarray(x, dtype=float)
    a = np.abs(x)
    out = np.where(a <= tau, 0.5 * x * x, tau * a - 0.5 * tau * tau)
    return out[()] if out.ndim == 0 else out


def huber_score(x, tau):
    """Derivative of :func:`huber_loss`, ``min(|x|, tau) * sign(x)``."""
    _check_tau(tau)
    out = np.clip(np.asarray(x, dtype=float), -tau, tau)
    return out[()] if out.ndim == 0 else out


def _weight_vector(weights, n: int) -> np.ndarray:
    if isinstance(weights, DecayWeights):
        w = weights.aligned()
    else:
        w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise DataError(f"weights have shape {w.shape}, data have length {n}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DomainError("weights must be finite and nonnegative")
    return w


def _data_vector(data) -> np.ndarray:
    d = np.asarray(data, dtype=float).ravel()
    if d.size == 0:
        raise DataError("data must be nonempty")
    if not np.all(np.isfinite(d)):
        raise DataError("data must be finite")
    return d


def weighted_objective(theta, data, weights, tau: float):
    """``sum_k w_k * huber_loss(data_k - theta, tau / w_k)``, vectorized over ``theta``.

    ``weights`` is either a :class:`DecayWeights` (matched to ``data`` in time
    order) or a plain array aligned with ``data``.
    """
    _check_tau(tau)
    d = _data_vector(data)
    w = _weight_vector(weights, d.size)
    keep = w > 0
    d, w = d[keep], w[keep]
    r = np.abs(d - np.asarray(theta, dtype=float)[..., None])
    cap = tau / w
    per = np.where(r <= cap, 0.5 * r * r, cap * r - 0.5 * cap * cap)
    res = per @ w
    return float(res) if np.ndim(res) == 0 else res


def weighted_score(theta, data, weights, tau: float):
    """Weighted Huber score ``S(theta)``; nonincreasing in ``theta``."""
    _check_tau(tau)
    d = _data_vector(data)
    w = _weight_vector(weights, d.size)
    th = np.asarray(theta, dtype=float)
    res = np.clip(w * (d - th[..., None]), -tau, tau).sum(axis=-1)
    return res[()] if np.ndim(res) == 0 else res


def _score(theta: float, d: np.ndarray, w: np.ndarray, tau: float) -> float:
    return float(np.clip(w * (d - theta), -tau, tau).sum())


def _locate(d: np.ndarray, w: np.ndarray, tau: float) -> float:
    keep = w > 0
    d, w = d[keep], w[keep]
    if d.size == 0:
        raise DomainError("at least one weight must be positive")
    cap = tau / w
    bp = np.unique(np.concatenate([d - cap, d + cap]))
    s = lambda j: _score(bp[j], d, w, tau)  # noqa: E731
    # clipped terms cancel only up to rounding on a plateau
    eps = 8.0 * d.size * np.finfo(float).eps * (tau + w.max() * np.abs(bp).max())
    # first breakpoint with S <= eps; S(bp[-1]) = -sum(tau) < 0 always
    lo, hi = 0, bp.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if s(mid) <= eps:
            hi = mid
        else:
            lo = mid + 1
    j = lo
    sj = s(j)
    if sj < -eps:
        # S(bp[0]) = sum(tau) > 0 so j >= 1; S is linear on [bp[j-1], bp[j]]
        a, b = bp[j - 1], bp[j]
        sa = s(j - 1)
        theta = a + sa * (b - a) / (sa - sj)
        return float(min(max(theta, a), b))
    # S vanishes on a plateau starting at bp[j]; find its right end
    lo, hi = j, bp.size - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if s(mid) >= -eps:
            lo = mid
        else:
            hi = mid - 1
    return float(0.5 * (bp[j] + bp[lo]))


def solve_location(data, weights, tau: float) -> float:
    """Root of the weighted Huber score for fixed ``tau``.

    When the root set is an interval, its midpoint is returned. The result
    always lies in ``[min(data), max(data)]``.
    """
    _check_tau(tau)
    d = _data_vector(data)
    w = _weight_vector(weights, d.size)
    theta = _locate(d, w, float(tau))
    return float(min(max(theta, d.min()), d.max()))


def tau_equation(tau: float, data, weights, theta: float) -> float:
    """Left-hand side ``g(tau)`` of the robustification equation (without ``-z``)."""
    _check_tau(tau)
    d = _data_vector(data)
    w = _weight_vector(weights, d.size)
    a = w * np.abs(d - theta)
    return float(np.sum(np.minimum(a * a, tau * tau)) / (tau * tau))


def _tau_root(a: np.ndarray, z: float) -> tuple[float, bool]:
    a = np.sort(a[a > 0])
    n_pos = a.size
    if n_pos == 0:
        return TAU_FLOOR, True
    if z >= n_pos:
        return float(a[-1]), True
    sq = a * a
    csum = np.cumsum(sq)
    # g evaluated at each breakpoint a_(j): sum_{i<=j} a_i^2 / a_j^2 + (n - j)
    j1 = np.arange(1, n_pos + 1)
    g_bp = csum / sq + (n_pos - j1)
    below = np.nonzero(g_bp <= z)[0]
    if below.size == 0:
        return float(np.sqrt(csum[-1] / z)), False
    j = below[0]  # 0-based; g_bp[0] == n_pos > z so j >= 1
    # on [a_(j-1), a_(j)] the first j terms are unclipped
    tau = np.sqrt(csum[j - 1] / (z - (n_pos - j)))
    return float(min(max(tau, a[j - 1]), a[j])), False


def solve_tau(data, weights, theta: float, z: float) -> tuple[float, bool]:
    """Solve ``g(tau) = z`` for the robustification parameter.

    Returns ``(tau, fallback)``. ``g`` decreases from the number of nonzero
    residuals ``N`` (as ``tau -> 0``) to zero; when ``z >= N`` no root exists
    and ``tau = max_k w_k |d_k - theta|`` (no truncation) is returned with
    ``fallback=True``. If every residual is zero, ``tau`` is a tiny positive
    floor and ``fallback=True``.
    """
    if not (np.isfinite(z) and z > 0):
        raise DomainError(f"z must be positive, got {z!r}")
    d = _data_vector(data)
    w = _weight_vector(weights, d.size)
    return _tau_root(w * np.abs(d - theta), float(z))


@dataclass(frozen=True)
class HuberFit:
    theta: float
    tau: float
    z: float
    iterations: int
    converged: bool
    tau_fallback: bool


def _fit(d: np.ndarray, w: np.ndarray, z: float, max_iter: int, tol: float) -> HuberFit:
    theta = float(np.dot(w, d) / w.sum())
    scale = float(np.max(np.abs(d - theta)))
    tau_prev = None
    tau, fallback = TAU_FLOOR, True
    for it in range(1, max_iter + 1):
        tau, fallback = _tau_root(w * np.abs(d - theta), z)
        theta_new = min(max(_locate(d, w, tau), d.min()), d.max())
        step = abs(theta_new - theta)
        theta = theta_new
        if scale == 0.0:
            return HuberFit(theta, tau, z, it, True, fallback)
        if (
            tau_prev is not None
            and step <= tol * (scale + abs(theta))
            and abs(tau - tau_prev) <= tol * tau
        ):
            return HuberFit(theta, tau, z, it, True, fallback)
        tau_prev = tau
    return _bracketed(d, w, z, max_iter, scale)


def _bracketed(d: np.ndarray, w: np.ndarray, z: float, spent: int, scale: float) -> HuberFit:
    # Alternation can cycle on small samples. The joint root is then a sign
    # change of S(theta, tau(theta)), which is positive at min(d) and negative
    # at max(d); bracket from the side of the weighted mean holding it.
    def F(th):
        return _score(th, d, w, _tau_root(w * np.abs(d - th), z)[0])

    theta0 = float(np.dot(w, d) / w.sum())
    f0 = F(theta0)
    lo, hi = (theta0, float(d.max())) if f0 > 0 else (float(d.min()), theta0)
    if f0 == 0.0:
        theta, calls, ok = theta0, 0, True
    else:
        theta, info = brentq(F, lo, hi, xtol=1e-15 * scale, rtol=4 * np.finfo(float).eps,
                             maxiter=200, full_output=True, disp=False)
        calls, ok = info.function_calls, info.converged
    tau, fallback = _tau_root(w * np.abs(d - theta), z)
    return HuberFit(float(theta), tau, z, spent + calls, bool(ok), fallback)


def tuning_free_fit(data, weights, z: float, max_iter: int = 100, tol: float = 1e-9) -> HuberFit:
    """Jointly estimate location and robustification level.

    Starting from the weighted mean, alternately solve the ``tau`` equation
    at the current location and the score equation at the current ``tau``
    until both iterates settle. Step sizes are measured relative to the data
    spread so the fit is equivariant under rescaling. If ``max_iter``
    alternations do not settle, the joint root is found by bracketing instead;
    ``iterations`` then counts both phases.
    """
    if not (np.isfinite(z) and z > 0):
        raise DomainError(f"z must be positive, got {z!r}")
    d = _data_vector(data)
    w = _weight_vector(weights, d.size)
    if not w.sum() > 0:
        raise DomainError("at least one weight must be positive")
    return _fit(d, w, float(z), int(max_iter), float(tol))


def uniform_weights(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)
