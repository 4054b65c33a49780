import numpy as np
import pytest

from driftcast.core import ConfigError, Dataset, FitError, TimeSeries
from driftcast.learners import (
    LearnerSpec,
    fit_ets,
    fit_global_ar,
    fit_local_ar,
    predict_one,
)
from driftcast.weighting import WeightingScheme, weight_schedule


def recurrence_series(phi, intercept, start, n):
    xs = list(start)
    for _ in range(n - len(start)):
        xs.append(intercept + sum(p * xs[-1 - k] for k, p in enumerate(phi)))
    return np.array(xs)


def dataset_from(values_list, train_len=None):
    series = []
    for i, v in enumerate(values_list):
        series.append(TimeSeries(id=f"s{i}", values=v, train_len=train_len or len(v)))
    return Dataset(name="d", series=tuple(series))


def lag_matrix(values, p, first, last):
    targets = np.arange(first, last)
    X = np.column_stack([values[targets - k] for k in range(1, p + 1)])
    return X, values[targets]


class TestGlobalAr:
    def test_noiseless_recovery(self):
        ds = dataset_from(
            [recurrence_series((0.5,), 0.0, (c,), 40) for c in (1.0, -2.0, 3.0)]
        )
        spec = LearnerSpec(family="global_ar", p=1, ridge_lambda=0.0)
        model = fit_global_ar(ds, 40, spec)
        assert model.coef[0] == pytest.approx(0.5, abs=1e-8)
        assert model.intercept == pytest.approx(0.0, abs=1e-8)

    def test_huge_ridge_shrinks_to_weighted_mean(self):
        rng = np.random.default_rng(0)
        ds = dataset_from([rng.normal(size=60) + 5.0 for _ in range(3)])
        scheme = WeightingScheme(method="exponential", alpha0=0.9)
        spec = LearnerSpec(family="global_ar", p=2, weighting=scheme, ridge_lambda=1e12)
        model = fit_global_ar(ds, 60, spec)
        assert np.all(np.abs(model.coef) < 1e-6)
        num = den = 0.0
        for s in ds.series:
            X, y = lag_matrix(s.values, 2, 2, 60)
            w = weight_schedule(scheme, len(y))
            num += w @ y
            den += w.sum()
        assert model.intercept == pytest.approx(num / den, rel=1e-6)

    def test_none_equals_alpha_one(self):
        rng = np.random.default_rng(1)
        ds = dataset_from([rng.normal(size=80) for _ in range(4)])
        m_none = fit_global_ar(
            ds, 80, LearnerSpec(family="global_ar", p=3, weighting=WeightingScheme(method="none"))
        )
        m_exp1 = fit_global_ar(
            ds,
            80,
            LearnerSpec(
                family="global_ar", p=3, weighting=WeightingScheme(method="exponential", alpha0=1.0)
            ),
        )
        assert np.allclose(m_none.coef, m_exp1.coef, atol=1e-12)
        assert m_none.intercept == pytest.approx(m_exp1.intercept, abs=1e-12)

    def test_weighted_normal_equations_residual(self):
        rng = np.random.default_rng(42)
        for trial in range(100):
            n, p = 40, 3
            values = rng.normal(size=n)
            lam = float(rng.uniform(0, 0.5))
            scheme = WeightingScheme(method="exponential", alpha0=float(rng.uniform(0.7, 1.0)))
            ds = dataset_from([values])
            spec = LearnerSpec(family="global_ar", p=p, weighting=scheme, ridge_lambda=lam)
            model = fit_global_ar(ds, n, spec)
            X, y = lag_matrix(values, p, p, n)
            Xa = np.hstack([X, np.ones((len(y), 1))])
            w = weight_schedule(scheme, len(y))
            A = Xa.T @ (Xa * w[:, None])
            A[np.arange(p), np.arange(p)] += lam
            rhs = Xa.T @ (w * y)
            beta = np.concatenate([model.coef, [model.intercept]])
            assert np.linalg.norm(A @ beta - rhs) <= 1e-8 * np.linalg.norm(rhs)

    def test_window_limits_rows(self):
        rng = np.random.default_rng(2)
        values = rng.normal(size=300)
        ds = dataset_from([values])
        full = fit_global_ar(ds, 300, LearnerSpec(family="global_ar", p=2, window="all"))
        short = fit_global_ar(ds, 300, LearnerSpec(family="global_ar", p=2, window="last_200"))
        X, y = lag_matrix(values, 2, 100, 300)
        Xa = np.hstack([X, np.ones((len(y), 1))])
        beta, *_ = np.linalg.lstsq(Xa, y, rcond=None)
        assert np.allclose(np.concatenate([short.coef, [short.intercept]]), beta, atol=1e-8)
        assert not np.allclose(full.coef, short.coef, atol=1e-12)

    def test_too_short_history(self):
        ds = dataset_from([np.arange(5.0)])
        with pytest.raises(FitError):
            fit_global_ar(ds, 5, LearnerSpec(family="global_ar", p=5))

    def test_matches_local_on_single_series(self):
        rng = np.random.default_rng(3)
        values = rng.normal(size=120)
        ds = dataset_from([values])
        g = fit_global_ar(
            ds, 120, LearnerSpec(family="global_ar", p=3, ridge_lambda=0.0, weighting=WeightingScheme())
        )
        l = fit_local_ar(values, 3)
        assert np.allclose(g.coef, l.coef, atol=1e-8)
        assert g.intercept == pytest.approx(l.intercept, abs=1e-8)

    def test_literal_scaling_changes_fit(self):
        rng = np.random.default_rng(4)
        ds = dataset_from([rng.normal(size=100) for _ in range(2)])
        base = WeightingScheme(method="exponential", alpha0=0.9)
        literal = WeightingScheme(method="exponential", alpha0=0.9, literal_value_scaling=True)
        m1 = fit_global_ar(ds, 100, LearnerSpec(family="global_ar", p=2, weighting=base))
        m2 = fit_global_ar(ds, 100, LearnerSpec(family="global_ar", p=2, weighting=literal))
        assert not np.allclose(m1.coef, m2.coef)


class TestLocalAr:
    def test_exact_recovery(self):
        values = recurrence_series((0.6, -0.2), 0.3, (0.5, 1.5), 60)
        model = fit_local_ar(values, 2)
        assert np.allclose(model.coef, [0.6, -0.2], atol=1e-8)
        assert model.intercept == pytest.approx(0.3, abs=1e-8)

    def test_constant_series_predicts_constant(self):
        model = fit_local_ar(np.full(30, 4.2), 3)
        assert predict_one(model, np.full(30, 4.2)) == pytest.approx(4.2, abs=1e-8)

    def test_window_too_short(self):
        with pytest.raises(FitError):
            fit_local_ar(np.arange(3.0), 1)  # needs 2p + 2 = 4

    def test_window_resolution(self):
        rng = np.random.default_rng(5)
        values = rng.normal(size=400)
        m = fit_local_ar(values, 2, window="last_200")
        m_direct = fit_local_ar(values[-200:], 2, window="all")
        assert np.allclose(m.coef, m_direct.coef, atol=1e-10)


class TestEts:
    def test_constant_fixed_point(self):
        model = fit_ets(np.full(20, 7.0))
        assert model.level == pytest.approx(7.0)
        assert predict_one(model, np.full(20, 7.0)) == pytest.approx(7.0)

    def test_grid_argmin_matches_bruteforce(self):
        values = np.array([0.0, 1.0] * 15)
        model = fit_ets(values)
        best_alpha, best_sse = None, np.inf
        for alpha in np.arange(1, 100) / 100.0:
            level, sse = values[0], 0.0
            for y in values[1:]:
                sse += (y - level) ** 2
                level = alpha * y + (1 - alpha) * level
            if sse < best_sse:
                best_alpha, best_sse = alpha, sse
        assert model.smoothing == pytest.approx(best_alpha)

    def test_one_step_equals_level(self):
        rng = np.random.default_rng(6)
        values = rng.normal(size=50)
        model = fit_ets(values)
        assert predict_one(model, values) == pytest.approx(model.level)

    def test_forecast_within_window_range(self):
        rng = np.random.default_rng(7)
        values = rng.normal(size=80)
        model = fit_ets(values, window="last_200")
        assert values.min() - 1e-12 <= predict_one(model, values) <= values.max() + 1e-12

    def test_needs_three_points(self):
        with pytest.raises(FitError):
            fit_ets(np.array([1.0, 2.0]))


class TestPredictOne:
    def test_ar1_formula(self):
        spec = LearnerSpec(family="local_ar", p=1)
        model_args = dict(spec=spec, fitted_through=10, coef=np.array([0.5]), intercept=0.0)
        from driftcast.learners import ForecastModel

        model = ForecastModel(**model_args)
        assert predict_one(model, np.array([1.0, 2.0, 4.0])) == pytest.approx(2.0)

    def test_naive_coefficients(self):
        from driftcast.learners import ForecastModel

        model = ForecastModel(
            spec=LearnerSpec(family="local_ar", p=3),
            fitted_through=10,
            coef=np.array([1.0, 0.0, 0.0]),
            intercept=0.0,
        )
        assert predict_one(model, np.array([5.0, 6.0, 7.0])) == pytest.approx(7.0)

    def test_ets_updates_through_new_observations(self):
        values = np.linspace(1, 2, 30)
        model = fit_ets(values)
        extended = np.concatenate([values, [10.0]])
        expected = model.smoothing * 10.0 + (1 - model.smoothing) * model.level
        assert predict_one(model, extended) == pytest.approx(expected)
        # pure: calling twice gives the same answer
        assert predict_one(model, extended) == pytest.approx(expected)

    def test_insufficient_history(self):
        model = fit_local_ar(np.random.default_rng(8).normal(size=30), 3)
        with pytest.raises(ConfigError):
            predict_one(model, np.array([1.0, 2.0]))

    def test_serializable(self):
        import json

        model = fit_local_ar(np.random.default_rng(9).normal(size=30), 2)
        blob = json.dumps(model.to_dict())
        assert "local_ar" in blob
