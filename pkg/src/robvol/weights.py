"""Exponential-decay weights, effective sample sizes and smoothness diagnostics.

A *forward* window anchored at ``t`` covers times ``t, t+1, ..., t+m`` and is
used for ex-post proxies. A *backward* window anchored at ``t`` covers
``t-1, t-2, ..., t-m-1`` and is used for ex-ante predictors. In both cases
``weights[0]`` belongs to the observation closest to the anchor and the
vector has ``m + 1`` entries.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


class Direction(str, enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


@dataclass(frozen=True)
class DecayWeights:
    """Normalized exponential-decay weights for one window.

    Attributes
    ----------
    lam : float
        Decay rate in (0, 1].
    m : int
        Window length minus one.
    direction : Direction
    weights : ndarray of shape (m + 1,)
        Nonincreasing in distance from the anchor, summing to one.
    n_eff : float
        Effective sample size ``1 / sum(weights**2)``.
    """

    lam: float
    m: int
    direction: Direction
    weights: np.ndarray
    n_eff: float

    def __len__(self) -> int:
        return self.m + 1

    def offsets(self) -> np.ndarray:
        """Signed time offsets of each weight relative to the anchor."""
        k = np.arange(self.m + 1)
        if self.direction is Direction.FORWARD:
            return k
        return -(k + 1)

    def window(self, t: int) -> slice:
        """Slice of a length-``n`` series holding this window, in time order.

        The slice is returned in increasing time order; for backward windows
        the weights must be reversed to line up with it (see
        :meth:`aligned`).
        """
        if self.direction is Direction.FORWARD:
            return slice(t, t + self.m + 1)
        return slice(t - self.m - 1, t)

    def aligned(self) -> np.ndarray:
        """Weights ordered to match :meth:`window` (increasing time)."""
        if self.direction is Direction.FORWARD:
            return self.weights
        return self.weights[::-1]


def _check_lambda(lam: float, allow_one: bool = True) -> None:
    ok = 0.0 < lam <= 1.0 if allow_one else 0.0 < lam < 1.0
    if not (np.isfinite(lam) and ok):
        bound = "(0, 1]" if allow_one else "(0, 1)"
        raise DomainError(f"lambda must lie in {bound}, got {lam!r}")


def make_weights(lam: float, m: int, direction: Direction | str = Direction.FORWARD) -> DecayWeights:
    """Build normalized decay weights ``lam**k / sum_j lam**j`` for ``k = 0..m``.

    >>> w = make_weights(0.5, 1)
    >>> w.weights.tolist(), round(w.n_eff, 12)
    ([0.6666666666666666, 0.3333333333333333], 1.8)
    """
    _check_lambda(lam)
    if int(m) != m or m < 0:
        raise DomainError(f"m must be a nonnegative integer, got {m!r}")
    m = int(m)
    direction = Direction(direction)
    raw = lam ** np.arange(m + 1, dtype=float)
    w = raw / raw.sum()
    w.setflags(write=False)
    n_eff = 1.0 / float(np.sum(w * w))
    return DecayWeights(lam=float(lam), m=m, direction=direction, weights=w, n_eff=n_eff)


def n_eff_closed_form(lam: float, m: int) -> float:
    """Effective sample size of ``m + 1`` exponential weights, in closed form."""
    _check_lambda(lam, allow_one=False)
    if int(m) != m or m < 0:
        raise DomainError(f"m must be a nonnegative integer, got {m!r}")
    p = lam ** (m + 1)
    return (1.0 + lam) * (1.0 - p) / ((1.0 - lam) * (1.0 + p))


def half_life_to_lambda(half_life: float) -> float:
    if not (np.isfinite(half_life) and half_life > 0):
        raise DomainError(f"half-life must be positive, got {half_life!r}")
    return 2.0 ** (-1.0 / half_life)


def lambda_to_half_life(lam: float) -> float:
    _check_lambda(lam, allow_one=False)
    return math.log(0.5) / math.log(lam)


def window_for_half_life(half_life: float) -> int:
    """Default window parameter: twice the half-life, rounded to an integer."""
    if not (np.isfinite(half_life) and half_life > 0):
        raise DomainError(f"half-life must be positive, got {half_life!r}")
    return max(1, int(round(2.0 * half_life)))


@dataclass(frozen=True)
class SmoothnessDiag:
    delta0: float
    delta1: float


def smoothness_diag(vol_path, weights: DecayWeights, t: int) -> SmoothnessDiag:
    """Weighted bias and weighted squared deviation of a variance path.

    ``delta0 = sum_k w_k (s_k - s_t)`` and ``delta1 = sum_k w_k**2 (s_k - s_t)**2``
    where ``s`` is the variance path over the window anchored at ``t``.
    """
    path = np.asarray(vol_path, dtype=float)
    sl = weights.window(t)
    if not (0 <= t < path.size) or sl.start < 0 or sl.stop > path.size:
        raise IndexError(
            f"window for t={t} ({weights.direction.value}, m={weights.m}) "
            f"exceeds path of length {path.size}"
        )
    seg = path[sl]
    if np.any(seg <= 0) or path[t] <= 0:
        raise DomainError("variance path must be positive")
    dev = seg - path[t]
    w = weights.aligned()
    return SmoothnessDiag(delta0=float(np.dot(w, dev)), delta1=float(np.dot(w * w, dev * dev)))
