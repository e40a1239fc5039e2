"""Core data model: schema, series, windows, scaler, RNG plumbing."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cerealia.errors import RangeError, SchemaError
from cerealia.model import (
    CLASS_ORDER,
    STD_FLOOR,
    AttributeSchema,
    NoiseClass,
    ScalerParams,
    WeatherSample,
    WeatherSeries,
    WindowSpec,
    class_index,
    destandardize_values,
    fit_scaler,
    format_timestamp,
    make_rng,
    mix_seed,
    parse_timestamp,
    scaler_from_values,
    standardize_values,
    validate_series,
    window_iter,
)


def two_attr_schema():
    return AttributeSchema(
        attributes=(("temp", "degC"), ("wind", "m/s")), sampling_interval=300
    )


def series_of(values, schema=None, t0=1_700_000_000, step=300):
    values = np.asarray(values, dtype=np.float64)
    schema = schema or two_attr_schema()
    ts = t0 + step * np.arange(values.shape[0], dtype=np.int64)
    return WeatherSeries(schema, ts, values)


class TestRng:
    def test_same_seed_same_stream(self):
        a = make_rng(123).random(10)
        b = make_rng(123).random(10)
        assert np.array_equal(a, b)

    def test_negative_seed_wraps_to_64_bits(self):
        a = make_rng(-1).random(5)
        b = make_rng((1 << 64) - 1).random(5)
        assert np.array_equal(a, b)

    def test_mix_seed_is_xor(self):
        assert mix_seed(5, 0) == 5
        assert mix_seed(5, 3) == 5 ^ 3
        assert mix_seed(-1, 0) == (1 << 64) - 1

    def test_mixed_streams_differ(self):
        a = make_rng(mix_seed(7, 1)).random(5)
        b = make_rng(mix_seed(7, 2)).random(5)
        assert not np.array_equal(a, b)


class TestClasses:
    def test_order_starts_clean(self):
        assert CLASS_ORDER[0] is NoiseClass.CLEAN
        assert len(CLASS_ORDER) == 5

    def test_class_index_round_trip(self):
        for c in CLASS_ORDER:
            assert CLASS_ORDER[class_index(c)] is c


class TestSchema:
    def test_properties(self):
        s = two_attr_schema()
        assert s.names == ("temp", "wind")
        assert s.arity == 2
        assert s.index_of("wind") == 1

    def test_unknown_attribute(self):
        with pytest.raises(SchemaError):
            two_attr_schema().index_of("rain")

    def test_duplicate_names_rejected(self):
        with pytest.raises(SchemaError):
            AttributeSchema(attributes=(("t", "C"), ("t", "K")), sampling_interval=60)

    def test_empty_rejected(self):
        with pytest.raises(SchemaError):
            AttributeSchema(attributes=(), sampling_interval=60)

    def test_bad_interval_rejected(self):
        with pytest.raises(SchemaError):
            AttributeSchema(attributes=(("t", "C"),), sampling_interval=0)

    def test_dict_round_trip(self):
        s = two_attr_schema()
        assert AttributeSchema.from_dict(s.to_dict()) == s


class TestTimestamps:
    def test_round_trip(self):
        epoch = 1_700_000_123
        assert parse_timestamp(format_timestamp(epoch)) == epoch

    def test_naive_is_utc(self):
        assert parse_timestamp("1970-01-01T00:00:00") == 0

    def test_zulu_suffix(self):
        assert parse_timestamp("1970-01-01T01:00:00Z") == 3600

    def test_sample_datetime(self):
        s = WeatherSample(timestamp=0, values=(1.0,))
        assert s.datetime.year == 1970


class TestSeries:
    def test_basic_access(self):
        s = series_of([[1.0, 2.0], [3.0, 4.0]])
        assert len(s) == 2
        assert np.array_equal(s.column("wind"), [2.0, 4.0])
        assert s.sample(1).values == (3.0, 4.0)
        assert [x.timestamp for x in s.iter_samples()] == list(s.timestamps)

    def test_length_mismatch_rejected(self):
        schema = two_attr_schema()
        with pytest.raises(SchemaError):
            WeatherSeries(schema, np.array([0, 300]), np.zeros((3, 2)))

    def test_ragged_samples_reported_by_validation(self):
        schema = two_attr_schema()
        samples = [
            WeatherSample(0, (1.0, 2.0)),
            WeatherSample(300, (1.0,)),
            WeatherSample(600, (1.0, 2.0)),
        ]
        s = WeatherSeries.from_samples(schema, samples)
        report = validate_series(s)
        assert not report.ok
        assert any("arity" in v.rule for v in report.violations)

    def test_slice(self):
        s = series_of(np.arange(20.0).reshape(10, 2))
        sub = s.slice(3, 7)
        assert len(sub) == 4
        assert np.array_equal(sub.values, s.values[3:7])
        assert np.array_equal(sub.timestamps, s.timestamps[3:7])

    def test_replace_values_keeps_timestamps(self):
        s = series_of([[1.0, 2.0], [3.0, 4.0]])
        r = s.replace_values(s.values * 2)
        assert np.array_equal(r.timestamps, s.timestamps)
        assert np.array_equal(r.values, s.values * 2)
        assert np.array_equal(s.values, [[1.0, 2.0], [3.0, 4.0]])

    def test_from_samples_round_trip(self):
        schema = two_attr_schema()
        samples = [WeatherSample(100 * i, (float(i), -float(i))) for i in range(5)]
        s = WeatherSeries.from_samples(schema, samples)
        assert len(s) == 5
        assert s.sample(3).values == (3.0, -3.0)

    def test_fingerprint_is_stable_hex(self):
        s = series_of([[1.0, 2.0], [3.0, 4.0]])
        fp = s.fingerprint()
        assert len(fp) == 16
        int(fp, 16)
        assert fp == series_of([[1.0, 2.0], [3.0, 4.0]]).fingerprint()

    def test_fingerprint_sees_value_changes(self):
        a = series_of([[1.0, 2.0], [3.0, 4.0]])
        b = series_of([[1.0, 2.0], [3.0, 4.0000001]])
        assert a.fingerprint() != b.fingerprint()


class TestValidation:
    def test_clean_series_ok(self, synth_series):
        assert validate_series(synth_series).ok

    def test_non_increasing_timestamps_flagged(self):
        schema = two_attr_schema()
        s = WeatherSeries(schema, np.array([100, 100, 50]), np.zeros((3, 2)))
        report = validate_series(s)
        assert not report.ok
        assert [v.index for v in report.violations] == [1, 2]

    def test_non_finite_flagged_with_attribute(self):
        vals = np.ones((4, 2))
        vals[2, 1] = np.nan
        report = validate_series(series_of(vals))
        assert not report.ok
        v = report.violations[0]
        assert v.index == 2
        assert "wind" in v.detail


class TestWindowSpec:
    def test_invalid_geometry(self):
        with pytest.raises(RangeError):
            WindowSpec(length=0, stride=1)
        with pytest.raises(RangeError):
            WindowSpec(length=4, stride=0)

    @given(
        length=st.integers(1, 60),
        stride=st.integers(1, 30),
        n=st.integers(0, 400),
    )
    @settings(max_examples=200, deadline=None)
    def test_count_matches_enumeration(self, length, stride, n):
        spec = WindowSpec(length=length, stride=stride)
        # enumeration: starts at multiples of stride with room for a full window
        brute = len([s for s in range(0, n) if s % stride == 0 and s + length <= n])
        assert spec.count(n) == brute

    def test_window_iter_geometry(self, synth_series):
        spec = WindowSpec(length=48, stride=24)
        windows = list(window_iter(synth_series, spec))
        assert len(windows) == spec.count(len(synth_series))
        for i, w in enumerate(windows):
            assert w.start == i * 24
            assert w.end - w.start == 48
            assert np.array_equal(w.values, synth_series.values[w.start : w.end])


class TestScaler:
    def test_matches_numpy_moments(self, synth_series):
        p = fit_scaler(synth_series)
        assert np.allclose(p.mean, synth_series.values.mean(axis=0))
        assert np.allclose(p.std, synth_series.values.std(axis=0))

    def test_zero_variance_column_floored(self):
        vals = np.column_stack([np.full(10, 7.0), np.arange(10.0)])
        p = scaler_from_values(vals)
        assert p.std[0] == STD_FLOOR
        z = standardize_values(p, vals)
        assert np.all(np.isfinite(z))
        assert np.allclose(z[:, 0], 0.0)

    def test_dict_round_trip(self, synth_series):
        p = fit_scaler(synth_series)
        q = ScalerParams.from_dict(p.to_dict())
        assert np.array_equal(p.mean, q.mean)
        assert np.array_equal(p.std, q.std)

    @given(
        data=st.lists(
            st.tuples(
                st.floats(-1e6, 1e6, allow_nan=False),
                st.floats(-1e6, 1e6, allow_nan=False),
            ),
            min_size=2,
            max_size=50,
        )
    )
    @settings(max_examples=100, deadline=None)
    def test_round_trip_recovers_values(self, data):
        vals = np.array(data, dtype=np.float64)
        p = scaler_from_values(vals)
        back = destandardize_values(p, standardize_values(p, vals))
        assert np.allclose(back, vals, rtol=1e-9, atol=1e-6)

    def test_width_mismatch_fails_loudly(self, synth_series):
        p = fit_scaler(synth_series)
        with pytest.raises(ValueError):
            standardize_values(p, np.zeros((4, p.mean.shape[0] + 1)))
