"""Seeded synthetic data, the variance-estimation Monte Carlo study and
end-to-end predictor comparisons on simulated volatility paths.

All randomness comes from numpy's PCG64 generator. Replication ``r`` of a
study seeded with ``seed`` draws from ``SeedSequence(seed).spawn(reps)[r]``,
so results do not depend on how replications are scheduled.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, DomainError
from .huber import tuning_free_fit, uniform_weights
from .losses import EvalReport, evaluate, get_loss
from .pipeline import PredictorConfig, ProxyConfig, build_predictor, build_proxy
from .series import ReturnSeries, VolSeries

LOGNORMAL_MEAN = math.exp(0.5)
LOGNORMAL_VAR = math.e ** 2 - math.e


class Dist(str, enum.Enum):
    LOGNORMAL = "lognormal"
    STUDENT_T = "t"


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def sample_iid(dist, n: int, seed, df: float = 3.0) -> np.ndarray:
    """Draw ``n`` i.i.d. values from LN(0, 1) or a standard Student-t."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n!r}")
    try:
        dist = Dist(dist)
    except ValueError:
        raise DomainError(f"unsupported distribution {dist!r}") from None
    rng = _rng(seed)
    if dist is Dist.LOGNORMAL:
        return np.exp(rng.standard_normal(n))
    return rng.standard_t(df, n)


def true_variance(dist, df: float = 3.0) -> float:
    dist = Dist(dist)
    if dist is Dist.LOGNORMAL:
        return LOGNORMAL_VAR
    if df <= 2:
        raise DomainError("Student-t variance is infinite for df <= 2")
    return df / (df - 2.0)


# variance estimators -------------------------------------------------------

def _check_sample(data) -> np.ndarray:
    y = np.asarray(data, dtype=float).ravel()
    if y.size < 2:
        raise DataError("need at least two observations")
    if not np.all(np.isfinite(y)):
        raise DataError("data must be finite")
    return y


def trimmed_mean(y: np.ndarray, alpha: float, mode: str = "trim") -> float:
    """Mean after dropping (``trim``) or clamping (``winsorize``) values outside
    the empirical ``[alpha, 1 - alpha]`` quantile band."""
    if not 0 <= alpha < 0.5:
        raise DomainError(f"alpha must lie in [0, 0.5), got {alpha!r}")
    if alpha == 0:
        return float(np.mean(y))
    lo, hi = np.quantile(y, [alpha, 1.0 - alpha])
    if mode == "winsorize":
        return float(np.mean(np.clip(y, lo, hi)))
    if mode != "trim":
        raise DomainError(f"unknown trimming mode {mode!r}")
    kept = y[(y >= lo) & (y <= hi)]
    if kept.size == 0:
        raise DataError("trimming removed every observation")
    return float(np.mean(kept))


def huber_mean(y: np.ndarray, z: float) -> float:
    return tuning_free_fit(y, uniform_weights(y.size), z).theta


def variance_sample(data) -> float:
    y = _check_sample(data)
    return float(np.mean(y * y) - np.mean(y) ** 2)


def variance_trimmed(data, alpha: float, mode: str = "trim") -> float:
    """Plug-in variance with ``E[Y]`` and ``E[Y^2]`` each estimated by a trimmed mean."""
    y = _check_sample(data)
    return trimmed_mean(y * y, alpha, mode) - trimmed_mean(y, alpha, mode) ** 2


def variance_huber(data, z: float) -> float:
    """Plug-in variance with both moments estimated by the tuning-free Huber mean."""
    y = _check_sample(data)
    return huber_mean(y * y, z) - huber_mean(y, z) ** 2


# Monte Carlo study ---------------------------------------------------------

@dataclass
class MCCell:
    method: str
    param: float | None
    mse: float
    mse_se: float
    ql: float
    ql_se: float
    reps: int
    ql_skipped: int


@dataclass
class MCStudyResult:
    dist: str
    n: int
    reps: int
    seed: int
    truth: float
    cells: list[MCCell] = field(default_factory=list)

    def cell(self, method: str, param: float | None = None) -> MCCell:
        for c in self.cells:
            if c.method == method and (param is None or c.param == param):
                return c
        raise KeyError((method, param))

    def best(self, method: str, metric: str = "mse") -> MCCell:
        cands = [c for c in self.cells if c.method == method]
        return min(cands, key=lambda c: getattr(c, metric))

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["dist", "n", "reps", "seed", "truth", "method", "param",
                     "mse", "mse_se", "ql", "ql_se", "ql_skipped"])
        for c in self.cells:
            wr.writerow([self.dist, self.n, self.reps, self.seed, repr(self.truth), c.method,
                         "" if c.param is None else repr(float(c.param)),
                         repr(c.mse), repr(c.mse_se), repr(c.ql), repr(c.ql_se), c.ql_skipped])
        return buf.getvalue()


DEFAULT_ALPHA_GRID = (0.005, 0.01, 0.015, 0.02, 0.03, 0.04, 0.05)
DEFAULT_Z_GRID = (1.0, 1.25, 1.5, 1.75, 2.0, 2.5, 3.0, 3.5, 4.0)


def _summarize(method, param, est: np.ndarray, truth: float, ql_estimate_first: bool) -> MCCell:
    reps = est.size
    sq = (est - truth) ** 2
    pos = est > 0
    if ql_estimate_first:
        r = est[pos] / truth
    else:
        r = truth / est[pos]
    q = r - np.log(r) - 1.0
    def se(x):
        return float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else float("nan")
    return MCCell(method, param, float(sq.mean()), se(sq),
                  float(q.mean()) if q.size else float("nan"), se(q), reps, int(reps - pos.sum()))


def mc_variance_study(
    dist,
    n: int = 100,
    reps: int = 2000,
    alpha_grid=DEFAULT_ALPHA_GRID,
    z_grid=DEFAULT_Z_GRID,
    seed: int = 0,
    trim_mode: str = "trim",
    ql_estimate_first: bool = True,
    df: float = 3.0,
) -> MCStudyResult:
    """Compare sample, trimmed and tuning-free Huber variance estimators.

    Each replication draws a fresh sample of size ``n``. Every estimator is
    scored against the true variance by squared error and QL. By default QL
    takes the estimate as its first argument, ``QL(estimate, truth)``;
    replications with a nonpositive estimate are skipped for QL only.
    """
    if reps < 1:
        raise DomainError("reps must be >= 1")
    alpha_grid, z_grid = list(alpha_grid), list(z_grid)
    if not alpha_grid or not z_grid:
        raise DomainError("grids must be nonempty")
    dist = Dist(dist)
    truth = true_variance(dist, df)
    children = np.random.SeedSequence(seed).spawn(reps)
    est_sample = np.empty(reps)
    est_trim = np.empty((len(alpha_grid), reps))
    est_hub = np.empty((len(z_grid), reps))
    w = uniform_weights(n)
    for r, child in enumerate(children):
        y = sample_iid(dist, n, child, df)
        y2 = y * y
        est_sample[r] = float(np.mean(y2) - np.mean(y) ** 2)
        for i, a in enumerate(alpha_grid):
            est_trim[i, r] = trimmed_mean(y2, a, trim_mode) - trimmed_mean(y, a, trim_mode) ** 2
        for i, z in enumerate(z_grid):
            m2 = tuning_free_fit(y2, w, z).theta
            m1 = tuning_free_fit(y, w, z).theta
            est_hub[i, r] = m2 - m1 * m1
    res = MCStudyResult(dist=dist.value, n=n, reps=reps, seed=seed, truth=truth)
    res.cells.append(_summarize("sample", None, est_sample, truth, ql_estimate_first))
    for i, a in enumerate(alpha_grid):
        res.cells.append(_summarize("trimmed", float(a), est_trim[i], truth, ql_estimate_first))
    for i, z in enumerate(z_grid):
        res.cells.append(_summarize("huber", float(z), est_hub[i], truth, ql_estimate_first))
    return res


# volatility-path simulation ------------------------------------------------

class PathKind(str, enum.Enum):
    CONSTANT = "constant"
    REGIME_SWITCH = "regime_switch"
    SINUSOID = "sinusoid"


class Innovation(str, enum.Enum):
    GAUSSIAN = "gaussian"
    STUDENT_T = "student_t"
    LOGNORMAL_CENTERED = "lognormal_centered"


@dataclass(frozen=True)
class VolPathModel:
    """Variance path plus innovation law for ``X_t = sigma_t * eps_t``.

    Parameters by kind (all variances):

    * constant: ``level``
    * regime_switch: ``levels`` (sequence) and ``switches`` (fractions of the
      series length in (0, 1) where the next level starts)
    * sinusoid: ``level``, ``amplitude`` (< level) and ``period`` in steps
    """

    kind: PathKind = PathKind.CONSTANT
    level: float = 1e-4
    levels: tuple[float, ...] = ()
    switches: tuple[float, ...] = ()
    amplitude: float = 0.0
    period: float = 100.0
    innovation: Innovation = Innovation.GAUSSIAN
    df: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "kind", PathKind(self.kind))
        object.__setattr__(self, "innovation", Innovation(self.innovation))
        object.__setattr__(self, "levels", tuple(self.levels))
        object.__setattr__(self, "switches", tuple(self.switches))
        if self.kind is PathKind.REGIME_SWITCH:
            if len(self.levels) != len(self.switches) + 1 or not self.levels:
                raise ConfigError("regime_switch needs len(levels) == len(switches) + 1")
            if any(v <= 0 for v in self.levels):
                raise ConfigError("variance levels must be positive")
            if list(self.switches) != sorted(self.switches) or any(not 0 < s < 1 for s in self.switches):
                raise ConfigError("switches must be increasing fractions in (0, 1)")
        else:
            if not self.level > 0:
                raise ConfigError("variance level must be positive")
            if self.kind is PathKind.SINUSOID and not (0 <= self.amplitude < self.level and self.period > 0):
                raise ConfigError("sinusoid needs 0 <= amplitude < level and period > 0")
        if self.innovation is Innovation.STUDENT_T and not self.df > 2:
            raise ConfigError("Student-t innovations need df > 2 for a finite variance")

    @property
    def infinite_fourth_moment(self) -> bool:
        return self.innovation is Innovation.STUDENT_T and self.df <= 4

    def variance_path(self, T: int) -> np.ndarray:
        t = np.arange(T)
        if self.kind is PathKind.CONSTANT:
            return np.full(T, float(self.level))
        if self.kind is PathKind.SINUSOID:
            return self.level + self.amplitude * np.sin(2 * np.pi * t / self.period)
        starts = [int(round(s * T)) for s in self.switches]
        idx = np.searchsorted(np.asarray(starts), t, side="right")
        return np.asarray(self.levels, dtype=float)[idx]


def standardized_innovations(kind: Innovation, size: int, rng: np.random.Generator, df: float = 5.0) -> np.ndarray:
    """Zero-mean, unit-variance draws from the chosen law."""
    kind = Innovation(kind)
    if kind is Innovation.GAUSSIAN:
        return rng.standard_normal(size)
    if kind is Innovation.STUDENT_T:
        return rng.standard_t(df, size) * math.sqrt((df - 2.0) / df)
    return (np.exp(rng.standard_normal(size)) - LOGNORMAL_MEAN) / math.sqrt(LOGNORMAL_VAR)


def simulate_returns(model: VolPathModel, T: int, seed) -> tuple[ReturnSeries, np.ndarray]:
    """Simulate ``T`` returns; also return the true variance path."""
    if T < 1:
        raise DomainError("T must be >= 1")
    sigma2 = model.variance_path(T)
    eps = standardized_innovations(model.innovation, T, _rng(seed), model.df)
    return ReturnSeries(np.sqrt(sigma2) * eps), sigma2


# end-to-end experiments ------------------------------------------------------

@dataclass
class ExperimentResult:
    returns: ReturnSeries
    sigma2: np.ndarray
    predictors: dict[str, VolSeries]
    proxies: dict[str, VolSeries]
    reports: dict[tuple[str, str], EvalReport]
    truth_reports: dict[str, EvalReport]

    def ranking(self, proxy: str, loss: str, a: str, b: str, scaled: bool = False) -> float:
        """Sign of ``loss(a) - loss(b)`` under a proxy (``"truth"`` for the oracle)."""
        rep = self.truth_reports[loss] if proxy == "truth" else self.reports[(proxy, loss)]
        sa, sb = rep.score(a), rep.score(b)
        d = (sa.scaled - sb.scaled) if scaled else (sa.raw - sb.raw)
        return float(np.sign(d))


def end_to_end_experiment(
    model: VolPathModel,
    T: int,
    predictor_configs,
    proxy_configs,
    losses=("mse", "ql"),
    seed=0,
    scale: bool = True,
) -> ExperimentResult:
    """Simulate a series whose evaluation span holds exactly ``T`` points,
    compute predictors and proxies, and score them against every proxy and
    against the true variance path."""
    preds = list(predictor_configs)
    proxs = list(proxy_configs)
    if not preds or not proxs:
        raise ConfigError("need at least one predictor and one proxy")
    mb = max(p.window for p in preds)
    mf = max(p.window for p in proxs)
    n = T + mb + mf
    returns, sigma2 = simulate_returns(model, n, seed)
    pred_series = {}
    for cfg in preds:
        s = build_predictor(returns, cfg)
        pred_series[s.name] = s
    prox_series = {}
    for cfg in proxs:
        s = build_proxy(returns, cfg, T_default=T)
        prox_series[s.name] = s
    # evaluate every series on the same span t in [mb, n - mf)
    span = np.zeros(n, dtype=bool)
    span[mb:n - mf] = True
    truth = VolSeries(sigma2, span, {"name": "truth", "method": "truth"})
    reports = {}
    truth_reports = {}
    for loss in losses:
        loss = get_loss(loss)
        for name, prox in prox_series.items():
            restricted = VolSeries(prox.values, prox.valid & span, prox.meta)
            reports[(name, loss.name)] = evaluate(loss, restricted, pred_series, scale=scale)
        truth_reports[loss.name] = evaluate(loss, truth, pred_series, scale=scale)
    return ExperimentResult(returns, sigma2, pred_series, prox_series, reports, truth_reports)


@dataclass
class AgreementResult:
    loss: str
    seeds: int
    target: str
    expected_sign: float
    rates: dict[str, float]
    se: dict[str, float]
    paired_diff_se: dict[str, float]


def _agreement(signs: dict[str, np.ndarray], want: np.ndarray, reference: str | None):
    arr = {k: (v == want).astype(float) for k, v in signs.items()}
    rates = {k: float(v.mean()) for k, v in arr.items()}
    se = {k: float(v.std(ddof=1) / math.sqrt(v.size)) for k, v in arr.items()}
    ref = reference if reference is not None else next(iter(arr))
    pd = {k: float((v - arr[ref]).std(ddof=1) / math.sqrt(v.size)) for k, v in arr.items()}
    return rates, se, pd


def ranking_agreement_study(
    model: VolPathModel,
    T: int,
    pred_a: PredictorConfig,
    pred_b: PredictorConfig,
    proxy_configs,
    loss="mse",
    seeds=range(200),
    scaled: bool = False,
    reference: str | None = None,
    target: str = "expected",
):
    """How often each proxy ranks two predictors the way the truth does.

    With ``target="expected"`` the reference ranking is the sign of the mean
    truth-based loss difference over all seeds, an estimate of the
    expected-loss ranking. ``target="pathwise"`` compares against the
    truth-based ranking of each seed's own path instead.

    ``paired_diff_se[name]`` is the standard error of the per-seed difference
    between the agreement indicator of ``name`` and of ``reference``.
    ``loss`` may be a single name or a sequence; a sequence returns a dict
    keyed by loss name sharing one set of simulations.
    """
    if target not in ("expected", "pathwise"):
        raise ConfigError(f"unknown agreement target {target!r}")
    losses = (loss,) if isinstance(loss, str) else tuple(loss)
    proxs = list(proxy_configs)
    seeds = list(seeds)
    a, b = pred_a.label, pred_b.label
    truth_diff = {k: [] for k in losses}
    signs: dict[str, dict[str, list[float]]] = {k: {} for k in losses}
    for seed in seeds:
        res = end_to_end_experiment(model, T, [pred_a, pred_b], proxs, losses, seed, scale=scaled)
        for k in losses:
            rep = res.truth_reports[k]
            sa, sb = rep.score(a), rep.score(b)
            truth_diff[k].append((sa.scaled - sb.scaled) if scaled else (sa.raw - sb.raw))
            for name in res.proxies:
                signs[k].setdefault(name, []).append(res.ranking(name, k, a, b, scaled))
    out = {}
    for k in losses:
        td = np.asarray(truth_diff[k])
        expected = float(np.sign(td.mean()))
        want = np.full(td.size, expected) if target == "expected" else np.sign(td)
        rates, se, pd = _agreement({n: np.asarray(v) for n, v in signs[k].items()}, want, reference)
        out[k] = AgreementResult(get_loss(k).name, len(seeds), target, expected, rates, se, pd)
    return out[losses[0]] if isinstance(loss, str) else out
