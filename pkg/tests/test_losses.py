import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robvol.errors import DataError, DomainError
from robvol.losses import (
    MSE,
    QL,
    RobustLossSpec,
    aggregate_loss,
    evaluate,
    false_comparison_rate,
    get_loss,
    mse,
    optimal_scale,
    ql,
    rolling_loss_difference,
    rolling_optimal_scale,
)
from robvol.series import VolSeries


def golden_section(f, a, b, tol=1e-13):
    """Independent minimizer for unimodal ``f`` on ``[a, b]``."""
    g = (math.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol * (abs(a) + abs(b)):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def series(v, valid=None):
    v = np.asarray(v, dtype=float)
    return VolSeries(v, np.ones(v.size, bool) if valid is None else valid, {"name": "s"})


pos = st.floats(min_value=1e-6, max_value=1e3)


class TestPointLosses:
    def test_mse_examples(self):
        assert mse(1, 1) == 0
        assert mse(2, 1) == 1
        assert mse(0.04, 0.05) == pytest.approx(1e-4, rel=1e-12)

    def test_ql_examples(self):
        assert ql(1, 1) == 0
        assert ql(2, 1) == pytest.approx(0.306853, abs=1e-6)
        assert ql(1, 2) == pytest.approx(0.193147, abs=1e-6)
        assert ql(2, 1) > ql(1, 2)

    @pytest.mark.parametrize("s,h", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0), (1.0, float("nan"))])
    def test_ql_domain(self, s, h):
        with pytest.raises(DomainError):
            ql(s, h)

    def test_get_loss(self):
        assert get_loss("MSE") is MSE and get_loss(QL) is QL
        with pytest.raises(DomainError):
            get_loss("mae")

    @given(pos, pos)
    def test_ql_nonnegative(self, s, h):
        v = ql(s, h)
        assert v >= 0
        if v == 0:
            assert s == pytest.approx(h, rel=1e-6)

    @given(pos, pos, st.floats(1e-3, 1e3))
    def test_homogeneity(self, s, h, a):
        assert ql(a * s, a * h) == pytest.approx(ql(s, h), rel=1e-9, abs=1e-12)
        assert mse(a * s, a * h) == pytest.approx(a * a * mse(s, h), rel=1e-9, abs=1e-300)

    @given(pos, pos)
    def test_mse_symmetric(self, s, h):
        assert mse(s, h) == mse(h, s)

    @pytest.mark.parametrize("loss", [MSE, QL])
    def test_decomposition_grid(self, loss):
        s = np.geomspace(1e-2, 10, 100)[:, None]
        h = np.geomspace(1e-2, 10, 100)[None, :]
        resid = loss.eval(s, h) - (loss.f(h) + loss.C(h) * s)
        # a function of sigma^2 alone, equal to B
        assert np.max(np.abs(resid - resid[:, :1])) < 1e-10
        np.testing.assert_allclose(resid[:, 0], loss.B(s[:, 0]), rtol=1e-10, atol=1e-10)

    @pytest.mark.parametrize("loss", [MSE, QL])
    def test_truth_minimizes(self, loss):
        hs = np.geomspace(0.05, 20, 4001)
        for s in (0.1, 1.0, 7.0):
            assert loss(s, s) <= np.min(loss(s, hs)) + 1e-15

    @pytest.mark.parametrize("loss", [MSE, QL])
    def test_C_decreasing(self, loss):
        h = np.geomspace(1e-3, 1e3, 50)
        assert np.all(np.diff(loss.C(h)) < 0)


class TestOptimalScale:
    def test_perfect(self):
        s = series([1.0, 2.0, 3.0])
        assert optimal_scale("mse", s, s) == 1.0
        assert optimal_scale("ql", s, s) == 1.0

    def test_closed_forms(self):
        h, s = series([1.0, 2.0]), series([2.0, 2.0])
        assert optimal_scale("mse", s, h) == pytest.approx(1.2)
        assert optimal_scale("ql", s, h) == pytest.approx(1.5)

    @pytest.mark.parametrize("loss", ["mse", "ql"])
    def test_golden_section_oracle(self, loss):
        rng = np.random.default_rng(12)
        L = get_loss(loss)
        for _ in range(50):
            n = int(rng.integers(5, 300))
            h = rng.lognormal(-8, 0.5, n)
            s = h * rng.lognormal(0, 1, n)
            obj = lambda lb: float(np.mean(L(s, math.exp(lb) * h)))  # noqa: E731
            ref = math.exp(golden_section(obj, -10, 10))
            assert optimal_scale(loss, s, h) == pytest.approx(ref, rel=1e-6)

    def test_generic_numeric_path(self):
        # a homogeneous robust loss not covered by the closed forms
        custom = RobustLossSpec("mse_half", lambda s, h: 0.5 * (np.asarray(s) - h) ** 2,
                                C=lambda h: -np.asarray(h), f=lambda h: 0.5 * np.asarray(h) ** 2)
        rng = np.random.default_rng(3)
        h = rng.lognormal(size=80)
        s = 1.7 * h + rng.normal(0, 0.1, 80)
        assert optimal_scale(custom, s, h) == pytest.approx(optimal_scale("mse", s, h), rel=1e-8)

    @pytest.mark.parametrize("loss", ["mse", "ql"])
    def test_local_optimality(self, loss):
        rng = np.random.default_rng(30)
        for _ in range(20):
            h = rng.lognormal(size=60)
            s = h * rng.lognormal(size=60)
            b = optimal_scale(loss, s, h)
            at = aggregate_loss(loss, s, h, b)
            assert at <= aggregate_loss(loss, s, h, b * (1 + 1e-3))
            assert at <= aggregate_loss(loss, s, h, b * (1 - 1e-3))

    def test_empty_overlap(self):
        a = VolSeries([1.0, 2.0], [True, False])
        b = VolSeries([1.0, 2.0], [False, True])
        with pytest.raises(DataError):
            optimal_scale("mse", a, b)

    def test_ql_nonpositive(self):
        with pytest.raises(DomainError):
            optimal_scale("ql", series([0.0, 1.0]), series([1.0, 1.0]))


class TestAggregate:
    def test_examples(self):
        assert aggregate_loss("mse", series([1.0, 3.0]), series([2.0, 2.0])) == 1.0
        s = series([0.5, 0.7])
        assert aggregate_loss("ql", s, s) == 0.0

    def test_only_joint_valid_points(self):
        p = VolSeries([1.0, 5.0, 3.0], [True, True, False])
        h = VolSeries([2.0, 5.0, 0.0], [True, False, True])
        assert aggregate_loss("mse", p, h) == 1.0

    def test_per_point_oracle(self):
        rng = np.random.default_rng(2)
        s, h = rng.lognormal(size=40), rng.lognormal(size=40)
        assert aggregate_loss("ql", s, h) == pytest.approx(
            sum(a / b - math.log(a / b) - 1 for a, b in zip(s, h)) / 40, rel=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            aggregate_loss("mse", [1.0, 2.0], [1.0])


class TestRolling:
    @pytest.fixture
    def data(self):
        rng = np.random.default_rng(6)
        n = 60
        return series(rng.lognormal(size=n)), series(rng.lognormal(size=n)), series(rng.lognormal(size=n))

    def test_identical_predictors(self, data):
        p, a, _ = data
        assert np.all(rolling_loss_difference("mse", p, a, a, 10) == 0)

    def test_full_window(self, data):
        p, a, b = data
        d = rolling_loss_difference("ql", p, a, b, len(p))
        assert d.size == 1
        assert d[0] == pytest.approx(aggregate_loss("ql", p, a) - aggregate_loss("ql", p, b), rel=1e-10)

    def test_sliding_oracle(self, data):
        p, a, b = data
        w = 15
        d = rolling_loss_difference("mse", p, a, b, w)
        for i in np.random.default_rng(0).integers(0, d.size, 10):
            sl = slice(i, i + w)
            ref = np.mean(mse(p.values[sl], a.values[sl]) - mse(p.values[sl], b.values[sl]))
            assert d[i] == pytest.approx(ref, rel=1e-9, abs=1e-14)

    def test_rolling_scale_matches_global(self, data):
        p, a, _ = data
        for loss in ("mse", "ql"):
            r = rolling_optimal_scale(loss, p, a, len(p))
            assert r[0] == pytest.approx(optimal_scale(loss, p, a), rel=1e-12)

    def test_bad_window(self, data):
        p, a, b = data
        with pytest.raises(DomainError):
            rolling_loss_difference("mse", p, a, b, 0)
        with pytest.raises(DataError):
            rolling_loss_difference("mse", p, a, b, 61)


class TestFalseComparison:
    def test_identical(self):
        x = np.ones(20)
        assert false_comparison_rate(x, x, 5, True) == 0.0

    def test_known_sign(self):
        a, b = np.zeros(20), np.ones(20)
        assert false_comparison_rate(a, b, 5, True) == 0.0
        assert false_comparison_rate(a, b, 5, False) == 1.0

    def test_rate_falls_with_window(self):
        # A is better in expectation by 0.1 with unit noise
        rng = np.random.default_rng(0)
        rates = []
        for w in (1, 10, 100):
            r = [false_comparison_rate(rng.normal(0, 1, 400), rng.normal(0.1, 1, 400), w, True)
                 for _ in range(100)]
            rates.append(np.mean(r))
        assert rates[0] > rates[1] > rates[2]


class TestEvaluate:
    def test_perfect_predictor(self):
        s = series([1.0, 2.0, 3.0])
        rep = evaluate("ql", s, {"p": s})
        sc = rep.score("p")
        assert sc.raw == 0 and sc.beta == 1.0 and rep.T_effective == 3

    def test_scaled_le_raw(self):
        rng = np.random.default_rng(1)
        p = series(rng.lognormal(size=50))
        preds = {f"h{i}": series(rng.lognormal(size=50)) for i in range(4)}
        for loss in ("mse", "ql"):
            rep = evaluate(loss, p, preds)
            for sc in rep.scores:
                assert sc.scaled <= sc.raw + 1e-12

    def test_common_mask(self):
        p = VolSeries([1.0, 2.0, 3.0, 4.0], [True, True, True, False])
        a = VolSeries([1.0, 2.0, 3.0, 4.0], [False, True, True, True])
        b = VolSeries([2.0, 2.0, 2.0, 2.0], [True, True, True, True])
        rep = evaluate("mse", p, {"a": a, "b": b}, scale=False)
        assert rep.T_effective == 2
        assert rep.score("b").raw == pytest.approx(0.5)
        assert rep.score("b").scaled is None

    def test_serialization(self):
        rng = np.random.default_rng(4)
        p = series(rng.lognormal(size=20))
        rep = evaluate("mse", p, [series(rng.lognormal(size=20))])
        rows = rep.to_csv().strip().split("\n")
        assert rows[0].startswith("predictor,loss,proxy")
        raw = float(rows[1].split(",")[4])
        assert raw == rep.scores[0].raw
        assert '"T_effective": 20' in rep.to_json()

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3))
    def test_ranking_invariant_to_data_scale(self, seed, a):
        rng = np.random.default_rng(seed)
        p, h1, h2 = (rng.lognormal(size=30) for _ in range(3))
        for loss in ("mse", "ql"):
            d = aggregate_loss(loss, p, h1) - aggregate_loss(loss, p, h2)
            da = aggregate_loss(loss, a * a * p, a * a * h1) - aggregate_loss(loss, a * a * p, a * a * h2)
            if abs(d) > 1e-9 * (aggregate_loss(loss, p, h1) + 1e-300):
                assert np.sign(d) == np.sign(da)
