"""Autoregressive imputer: design matrix, ridge fit, flagged replacement."""

import numpy as np
import pytest

from cerealia.errors import (
    EmptyInputError,
    ImputerError,
    ModelFileError,
    ModelVersionError,
    RangeError,
    ShapeError,
    WarmUpError,
)
from cerealia.impute import (
    ArImputer,
    ImputerConfig,
    _ridge_solve,
    build_design,
    fit_imputer,
    forecast,
    impute_flagged,
    load_imputer,
    save_imputer,
)
from cerealia.model import AttributeSchema, WeatherSeries, make_rng

T0 = 1_600_000_000
STEP = 1800


def series_of(values, names=("a",)):
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    if values.shape[0] == 1 and len(names) == 1:
        values = values.T
    schema = AttributeSchema(
        attributes=tuple((n, "unit") for n in names), sampling_interval=STEP
    )
    ts = T0 + STEP * np.arange(values.shape[0])
    return WeatherSeries(schema, ts, values)


def ar2_values(n, phi1=0.6, phi2=0.3, c=1.0, seed=0, noise=0.0):
    rng = make_rng(seed)
    x = np.zeros(n)
    x[0] = x[1] = c / (1 - phi1 - phi2)
    for t in range(2, n):
        x[t] = c + phi1 * x[t - 1] + phi2 * x[t - 2]
        if noise:
            x[t] += noise * rng.normal()
    return x


class TestConfig:
    def test_validation(self):
        with pytest.raises(RangeError):
            ImputerConfig(lags=0)
        with pytest.raises(RangeError):
            ImputerConfig(ridge=-1e-9)

    def test_n_features(self):
        assert ImputerConfig(lags=12, calendar_features=True).n_features == 17
        assert ImputerConfig(lags=3, calendar_features=False).n_features == 4

    def test_round_trip(self):
        cfg = ImputerConfig(lags=5, ridge=0.01, calendar_features=False)
        assert ImputerConfig.from_dict(cfg.to_dict()) == cfg


class TestBuildDesign:
    def test_lag_alignment(self):
        values = np.arange(10, dtype=np.float64)
        ts = T0 + STEP * np.arange(10)
        cfg = ImputerConfig(lags=3, calendar_features=False)
        a, y = build_design(values, ts, cfg)
        assert a.shape == (7, 4)
        assert np.array_equal(y, values[3:])
        for r in range(7):
            # column i holds the value i+1 steps before the target
            for i in range(3):
                assert a[r, i] == values[3 + r - 1 - i]
            assert a[r, 3] == 1.0

    def test_calendar_columns_bounded(self):
        values = make_rng(0).normal(size=50)
        ts = T0 + STEP * np.arange(50)
        a, _ = build_design(values, ts, ImputerConfig(lags=4))
        cal = a[:, 4:8]
        assert np.all(np.abs(cal) <= 1.0)
        assert a.shape == (46, 9)

    def test_too_short_raises(self):
        values = np.arange(3, dtype=np.float64)
        ts = T0 + STEP * np.arange(3)
        with pytest.raises(EmptyInputError):
            build_design(values, ts, ImputerConfig(lags=3))


class TestRidgeSolve:
    def test_matches_normal_equations(self):
        rng = make_rng(1)
        a = rng.normal(size=(40, 6))
        a[:, -1] = 1.0
        y = rng.normal(size=40)
        ridge = 0.3
        beta = _ridge_solve(a, y, ridge)
        penalty = ridge * np.eye(6)
        penalty[-1, -1] = 0.0
        want = np.linalg.solve(a.T @ a + penalty, a.T @ y)
        assert np.allclose(beta, want, atol=1e-8)

    def test_zero_ridge_is_plain_lstsq(self):
        rng = make_rng(2)
        a = rng.normal(size=(30, 4))
        y = rng.normal(size=30)
        beta = _ridge_solve(a, y, 0.0)
        want, *_ = np.linalg.lstsq(a, y, rcond=None)
        assert np.allclose(beta, want, atol=1e-10)

    def test_intercept_not_shrunk(self):
        # constant target, zero-mean noise features: heavy ridge flattens the
        # feature weights but must leave the intercept at the target level
        rng = make_rng(3)
        a = np.column_stack([rng.normal(size=200), np.ones(200)])
        y = np.full(200, 7.0)
        beta = _ridge_solve(a, y, 1e6)
        assert abs(beta[0]) < 1e-3
        assert beta[1] == pytest.approx(7.0, abs=1e-3)

    def test_singular_without_ridge_raises(self):
        a = np.ones((10, 3))  # rank 1
        y = np.ones(10)
        with pytest.raises(ImputerError):
            _ridge_solve(a, y, 0.0)
        # the same system goes through once regularized
        _ridge_solve(a, y, 1e-3)


class TestFit:
    def test_noiseless_ar2_recovered_exactly(self):
        # targets are an exact linear function of the lags, so the unique
        # least-squares solution is the generating recursion itself
        x = np.zeros(200)
        x[:2] = [10.0, 11.0]
        for t in range(2, 200):
            x[t] = 1.0 + 0.6 * x[t - 1] + 0.3 * x[t - 2]
        cfg = ImputerConfig(lags=2, ridge=0.0, calendar_features=False)
        imputer = fit_imputer(series_of(x), cfg)
        beta = imputer.coefficients[0]
        assert beta[0] == pytest.approx(0.6, abs=1e-6)
        assert beta[1] == pytest.approx(0.3, abs=1e-6)
        assert beta[2] == pytest.approx(1.0, abs=1e-5)
        assert imputer.residual_std[0] < 1e-8

    def test_noisy_ar2_estimated_consistently(self):
        x = ar2_values(5000, noise=0.2)
        cfg = ImputerConfig(lags=2, ridge=0.0, calendar_features=False)
        imputer = fit_imputer(series_of(x), cfg)
        beta = imputer.coefficients[0]
        assert beta[0] == pytest.approx(0.6, abs=0.05)
        assert beta[1] == pytest.approx(0.3, abs=0.05)

    def test_short_history_rejected(self):
        x = np.arange(10, dtype=np.float64)
        with pytest.raises(EmptyInputError):
            fit_imputer(series_of(x), ImputerConfig(lags=8))

    def test_fits_every_attribute(self, synth_series):
        imputer = fit_imputer(synth_series)
        n = synth_series.schema.arity
        assert imputer.coefficients.shape == (n, imputer.config.n_features)
        assert imputer.attribute_names == synth_series.schema.names
        assert (imputer.residual_std >= 0).all()


class TestPredictOne:
    def test_matches_manual_dot(self):
        x = ar2_values(100, noise=0.1)
        cfg = ImputerConfig(lags=4, ridge=1e-3, calendar_features=False)
        imputer = fit_imputer(series_of(x), cfg)
        history = x[50:54].reshape(4, 1)
        got = imputer.predict_one(history, T0 + 54 * STEP)
        row = np.concatenate([history[::-1, 0], [1.0]])
        assert got[0] == pytest.approx(float(row @ imputer.coefficients[0]), rel=1e-12)

    def test_history_shape_guard(self):
        x = ar2_values(100, noise=0.1)
        cfg = ImputerConfig(lags=4, calendar_features=False)
        imputer = fit_imputer(series_of(x), cfg)
        with pytest.raises(ShapeError):
            imputer.predict_one(np.zeros((3, 1)), T0)
        with pytest.raises(ShapeError):
            imputer.predict_one(np.zeros((4, 2)), T0)


class TestForecast:
    def test_equals_iterated_predict_one(self):
        x = ar2_values(150, noise=0.3, seed=5)
        cfg = ImputerConfig(lags=3, calendar_features=False)
        imputer = fit_imputer(series_of(x), cfg)
        recent = series_of(x[-20:])
        out = forecast(imputer, recent, horizon=6)
        buffer = x[-3:].reshape(3, 1).copy()
        last_ts = int(recent.timestamps[-1])
        for i in range(6):
            pred = imputer.predict_one(buffer, last_ts + (i + 1) * STEP)
            assert out[i, 0] == pred[0]
            buffer = np.vstack([buffer[1:], pred.reshape(1, 1)])

    def test_validation(self):
        x = ar2_values(150, noise=0.3)
        imputer = fit_imputer(series_of(x), ImputerConfig(lags=5, calendar_features=False))
        recent = series_of(x[-20:])
        with pytest.raises(RangeError):
            forecast(imputer, recent, horizon=0)
        with pytest.raises(EmptyInputError):
            forecast(imputer, series_of(x[-3:]), horizon=1)
        other = series_of(x[-20:], names=("b",))
        with pytest.raises(ShapeError):
            forecast(imputer, other, horizon=1)


class TestImputeFlagged:
    def fitted(self, seed=6):
        x = ar2_values(400, noise=0.4, seed=seed)
        cfg = ImputerConfig(lags=6, calendar_features=False)
        return fit_imputer(series_of(x), cfg), x

    def test_unflagged_samples_untouched(self):
        imputer, x = self.fitted()
        series = series_of(x[:100])
        flags = np.zeros(100, dtype=bool)
        flags[40:44] = True
        out = impute_flagged(series, flags, imputer)
        assert np.array_equal(out.values[~flags], series.values[~flags])
        assert not np.array_equal(out.values[flags], series.values[flags])

    def test_never_reads_flagged_originals(self):
        imputer, x = self.fitted()
        flags = np.zeros(100, dtype=bool)
        flags[30:35] = True
        flags[60] = True
        a = x[:100].copy()
        b = x[:100].copy()
        b[flags] = 1e9  # poison the flagged originals
        out_a = impute_flagged(series_of(a), flags, imputer)
        out_b = impute_flagged(series_of(b), flags, imputer)
        assert np.array_equal(out_a.values, out_b.values)

    def test_consecutive_block_conditions_on_imputations(self):
        imputer, x = self.fitted()
        flags = np.zeros(80, dtype=bool)
        flags[50:56] = True
        out = impute_flagged(series_of(x[:80]), flags, imputer)
        # replaying by hand: each step sees earlier imputed values, not truth
        trusted = x[:80].reshape(80, 1).copy()
        for i in range(50, 56):
            ts = T0 + STEP * i
            trusted[i] = imputer.predict_one(trusted[i - 6 : i], ts)
        assert np.allclose(out.values, trusted, atol=0)

    def test_tracks_signal_better_than_poison(self):
        imputer, x = self.fitted(seed=7)
        flags = np.zeros(200, dtype=bool)
        flags[100:112] = True
        corrupted = x[:200].copy()
        corrupted[flags] += 25.0
        out = impute_flagged(series_of(corrupted), flags, imputer)
        mae_imputed = np.abs(out.values[flags, 0] - x[100:112]).mean()
        mae_corrupt = np.abs(corrupted[flags] - x[100:112]).mean()
        assert mae_imputed < 0.25 * mae_corrupt

    def test_warm_up_guard(self):
        imputer, x = self.fitted()
        flags = np.zeros(50, dtype=bool)
        flags[2] = True
        with pytest.raises(WarmUpError):
            impute_flagged(series_of(x[:50]), flags, imputer)

    def test_shape_guards(self):
        imputer, x = self.fitted()
        series = series_of(x[:50])
        with pytest.raises(ShapeError):
            impute_flagged(series, np.zeros(49, dtype=bool), imputer)
        wrong = series_of(x[:50], names=("b",))
        with pytest.raises(ShapeError):
            impute_flagged(wrong, np.zeros(50, dtype=bool), imputer)


class TestPersistence:
    def test_round_trip_bit_equal(self, synth_series, tmp_path):
        imputer = fit_imputer(synth_series)
        path = tmp_path / "imp.json"
        save_imputer(imputer, path)
        back = load_imputer(path)
        assert back.config == imputer.config
        assert back.attribute_names == imputer.attribute_names
        assert back.sampling_interval == imputer.sampling_interval
        assert np.array_equal(back.coefficients, imputer.coefficients)
        history = synth_series.values[100 : 100 + imputer.config.lags]
        ts = int(synth_series.timestamps[100 + imputer.config.lags])
        assert np.array_equal(back.predict_one(history, ts), imputer.predict_one(history, ts))

    def test_bad_file_rejected(self, tmp_path):
        path = tmp_path / "junk.json"
        path.write_text("[1, 2, 3]")
        with pytest.raises(ModelFileError):
            load_imputer(path)

    def test_wrong_version_rejected(self, synth_series, tmp_path):
        import json

        imputer = fit_imputer(synth_series)
        path = tmp_path / "imp.json"
        save_imputer(imputer, path)
        doc = json.loads(path.read_text())
        doc["version"] = 0
        path.write_text(json.dumps(doc))
        with pytest.raises(ModelVersionError):
            load_imputer(path)
