"""Fault injectors and labeled dataset assembly.

The injector tests recompute every effect from the definitions: bias from
an independently summed mean, drift from the first in-window value, the
random fault from the multiplicative identity. The dataset test replays
each manifest record through the public injectors and demands the stored
window back, bit for bit.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cerealia.corpus import DEFAULT_WINDOW, corpus_series
from cerealia.errors import EmptyInputError, RangeError
from cerealia.faults import (
    BiasFaultSpec,
    DatasetConfig,
    DriftFaultSpec,
    MalfunctionFaultSpec,
    RandomFaultSpec,
    build_labeled_dataset,
    inject_bias,
    inject_drift,
    inject_malfunction,
    inject_random,
    load_dataset,
    load_manifest,
    save_dataset,
    save_manifest,
)
from cerealia.ingest import synth_generate
from cerealia.corpus import default_synth_config
from cerealia.model import NoiseClass, WindowSpec, make_rng, standardize_values


def rand_series(seed, n=200):
    return synth_generate(default_synth_config(), n, seed=seed)


INJECTORS = {
    "random": lambda seed: (
        inject_random,
        RandomFaultSpec(density=0.3, seed=seed, window=(40, 160)),
    ),
    "malfunction": lambda seed: (
        inject_malfunction,
        MalfunctionFaultSpec(window=(40, 160), seed=seed),
    ),
    "drift": lambda seed: (inject_drift, DriftFaultSpec(window=(40, 160), seed=seed)),
    "bias": lambda seed: (inject_bias, BiasFaultSpec(window=(40, 160))),
}


class TestBias:
    def test_window_becomes_scaled_mean(self):
        s = rand_series(1)
        out, mask = inject_bias(s, BiasFaultSpec(window=(10, 58), factor=2.0), "air_temperature")
        col = s.column("air_temperature")
        mu = math.fsum(col[10:58]) / 48
        assert np.allclose(out.column("air_temperature")[10:58], 2.0 * mu, rtol=1e-12)
        assert mask[10:58].all()
        assert not mask[:10].any() and not mask[58:].any()

    def test_other_factors(self):
        s = rand_series(2)
        out, _ = inject_bias(s, BiasFaultSpec(window=(0, 50), factor=-0.5), "pressure")
        col = s.column("pressure")
        want = -0.5 * math.fsum(col[:50]) / 50
        got = out.column("pressure")[:50]
        assert np.max(np.abs(got - want) / abs(want)) <= 1e-12

    def test_factor_one_warns(self):
        s = rand_series(3)
        with pytest.warns(UserWarning):
            inject_bias(s, BiasFaultSpec(window=(0, 10), factor=1.0), "wind_speed")

    def test_bad_window_rejected(self):
        s = rand_series(4)
        with pytest.raises(RangeError):
            inject_bias(s, BiasFaultSpec(window=(50, 40)), "wind_speed")
        with pytest.raises(RangeError):
            inject_bias(s, BiasFaultSpec(window=(0, 10_000)), "wind_speed")


class TestMalfunction:
    def test_noise_scale_tracks_segment_std(self):
        s = rand_series(5, n=1500)
        spec = MalfunctionFaultSpec(window=(0, 1500), intensity=4.5, seed=7)
        out, mask = inject_malfunction(s, spec, "air_temperature")
        x = s.column("air_temperature")
        noise = out.column("air_temperature") - x
        sigma = np.std(x)
        assert mask.all()
        assert abs(np.std(noise) / (4.5 * sigma) - 1.0) < 0.1
        assert abs(np.mean(noise)) < 0.5 * sigma

    def test_constant_segment_unchanged(self):
        s = rand_series(6)
        vals = s.values.copy()
        vals[:, 0] = 5.0
        s = s.replace_values(vals)
        out, _ = inject_malfunction(
            s, MalfunctionFaultSpec(window=(10, 60), seed=1), s.schema.names[0]
        )
        assert np.array_equal(out.values, s.values)


class TestDrift:
    def test_offset_is_first_value_times_intensity(self):
        s = rand_series(7)
        spec = DriftFaultSpec(window=(30, 120), noise_intensity=0.0, seed=11)
        out, mask = inject_drift(s, spec, "air_temperature")
        x = s.column("air_temperature")
        delta = out.column("air_temperature")[30:120] - x[30:120]
        # constant offset across the whole segment
        assert np.allclose(delta, delta[0], atol=1e-12)
        intensity = delta[0] / x[30]
        assert 0.5 <= abs(intensity) <= 4.0
        assert mask[30:120].all() and mask.sum() == 90

    def test_noise_rides_on_offset(self):
        s = rand_series(8, n=800)
        spec = DriftFaultSpec(window=(0, 800), noise_intensity=1.0, seed=3)
        out, _ = inject_drift(s, spec, "air_temperature")
        diff = out.column("air_temperature") - s.column("air_temperature")
        sigma = np.std(s.column("air_temperature"))
        # epsilon ~ N(1, (3 sigma)^2), so spread well above zero
        assert np.std(diff) > sigma

    def test_deadband_excludes_small_intensities(self):
        for seed in range(25):
            s = rand_series(100 + seed, n=120)
            spec = DriftFaultSpec(window=(20, 100), noise_intensity=0.0, seed=seed)
            out, _ = inject_drift(s, spec, "air_temperature")
            x = s.column("air_temperature")
            intensity = (out.column("air_temperature")[20] - x[20]) / x[20]
            assert 0.5 <= abs(intensity) <= 4.0


class TestRandom:
    def test_zero_density_is_identity(self):
        s = rand_series(9)
        out, mask = inject_random(s, RandomFaultSpec(density=0.0, seed=1), "wind_speed")
        assert np.array_equal(out.values, s.values)
        assert not mask.any()

    def test_full_density_hits_every_index(self):
        s = rand_series(10)
        out, mask = inject_random(
            s, RandomFaultSpec(density=1.0, seed=2, window=(50, 150)), "air_temperature"
        )
        assert mask[50:150].all()
        assert mask.sum() == 100

    def test_factors_outside_deadband(self):
        s = rand_series(11, n=2000)
        spec = RandomFaultSpec(density=0.5, seed=4)
        out, mask = inject_random(s, spec, "air_temperature")
        x = s.column("air_temperature")
        hit = mask & (np.abs(x) > 1e-9)
        factors = out.column("air_temperature")[hit] / x[hit] - 1.0
        assert factors.size > 300
        assert np.all(np.abs(factors) >= 0.25 - 1e-12)
        assert np.all(np.abs(factors) <= 1.5 + 1e-12)

    def test_count_tracks_density(self):
        s = rand_series(12, n=5000)
        _, mask = inject_random(s, RandomFaultSpec(density=0.1, seed=5), "dew_point")
        # loose 6-sigma band around the binomial mean
        mean, sd = 500, math.sqrt(5000 * 0.1 * 0.9)
        assert abs(mask.sum() - mean) < 6 * sd

    def test_invalid_density(self):
        with pytest.raises(RangeError):
            RandomFaultSpec(density=1.5)


class TestMaskDiscipline:
    @given(
        name=st.sampled_from(sorted(INJECTORS)),
        seed=st.integers(0, 10_000),
    )
    @settings(max_examples=60, deadline=None)
    def test_identity_outside_mask(self, name, seed):
        inject, spec = INJECTORS[name](seed)
        s = rand_series(seed % 50)
        out, mask = inject(s, spec, "air_temperature")
        j = s.schema.index_of("air_temperature")
        assert np.array_equal(out.values[~mask, j], s.values[~mask, j])
        others = [i for i in range(s.schema.arity) if i != j]
        assert np.array_equal(out.values[:, others], s.values[:, others])
        assert np.array_equal(out.timestamps, s.timestamps)


class TestDatasetBuild:
    def test_counts_and_share(self, tiny_dataset):
        counts = tiny_dataset.class_counts()
        n_fault = sum(v for k, v in counts.items() if k != "clean")
        assert len(tiny_dataset) == 200
        assert counts["clean"] == 200 - n_fault
        assert n_fault == round(0.25 * 200)
        # equal split across the four fault classes
        fault_counts = [v for k, v in counts.items() if k != "clean"]
        assert max(fault_counts) - min(fault_counts) <= 1

    def test_scaler_comes_from_clean_windows_only(self, tiny_corpus, tiny_dataset):
        clean_ids = tiny_dataset.window_ids[tiny_dataset.labels == 0]
        rows = []
        for wid in clean_ids:
            start = wid * DEFAULT_WINDOW.stride
            rows.append(tiny_corpus.values[start : start + DEFAULT_WINDOW.length])
        stacked = np.concatenate(rows, axis=0)
        assert np.allclose(tiny_dataset.scaler.mean, stacked.mean(axis=0))
        assert np.allclose(tiny_dataset.scaler.std, stacked.std(axis=0))

    def test_manifest_replays_bit_exact(self, tiny_corpus, tiny_dataset):
        """Every stored fault record must regenerate its window exactly
        through the public injectors, with no access to builder internals."""

        def replay(record, window):
            if record.label == "random":
                spec = RandomFaultSpec(
                    density=record.params["random_density"],
                    seed=record.seed,
                    window=record.segment,
                )
                return inject_random(window, spec, record.attribute)
            if record.label == "malfunction":
                spec = MalfunctionFaultSpec(window=record.segment, seed=record.seed)
                return inject_malfunction(window, spec, record.attribute)
            if record.label == "drift":
                spec = DriftFaultSpec(window=record.segment, seed=record.seed)
                return inject_drift(window, spec, record.attribute)
            spec = BiasFaultSpec(window=record.segment)
            return inject_bias(window, spec, record.attribute)

        by_window = {r.window_index: r for r in tiny_dataset.manifest}
        replayed = 0
        for i in range(len(tiny_dataset)):
            wid = int(tiny_dataset.window_ids[i])
            start = wid * DEFAULT_WINDOW.stride
            window = tiny_corpus.slice(start, start + DEFAULT_WINDOW.length)
            record = by_window.get(wid)
            if record is None:
                assert tiny_dataset.label_of(i) is NoiseClass.CLEAN
                expected = window.values
            else:
                assert tiny_dataset.label_of(i).value == record.label
                corrupted, mask = replay(record, window)
                assert mask.any()
                expected = corrupted.values
                replayed += 1
            got = tiny_dataset.windows[i]
            want = standardize_values(tiny_dataset.scaler, expected)
            assert np.array_equal(got, want), "window %d (%s) diverged" % (
                wid,
                tiny_dataset.label_of(i).value,
            )
        assert replayed == round(0.25 * 200)

    def test_fault_one_attribute_each(self, tiny_dataset):
        names = set(tiny_dataset.attribute_names)
        for record in tiny_dataset.manifest:
            assert record.attribute in names

    def test_deterministic_rebuild(self, tiny_corpus):
        config = DatasetConfig(pct_inconsistent=25.0, window=DEFAULT_WINDOW, seed=3)
        a = build_labeled_dataset(tiny_corpus, config)
        b = build_labeled_dataset(tiny_corpus, config)
        assert np.array_equal(a.windows, b.windows)
        assert np.array_equal(a.labels, b.labels)
        assert a.manifest == b.manifest

    def test_pct_validation(self):
        with pytest.raises(RangeError):
            DatasetConfig(pct_inconsistent=-1.0)
        with pytest.raises(RangeError):
            DatasetConfig(pct_inconsistent=101.0)

    def test_zero_pct_is_all_clean(self, tiny_corpus):
        ds = build_labeled_dataset(tiny_corpus, DatasetConfig(pct_inconsistent=0.0, seed=5))
        assert (ds.labels == 0).all()
        assert ds.manifest == ()

    def test_too_few_windows_rejected(self):
        series = corpus_series(5, DEFAULT_WINDOW.length + 19 * DEFAULT_WINDOW.stride)
        with pytest.raises(EmptyInputError):
            build_labeled_dataset(series, DatasetConfig(pct_inconsistent=10.0, seed=5))


class TestDatasetIo:
    def test_npz_round_trip(self, tiny_dataset, tmp_path):
        path = tmp_path / "ds.npz"
        save_dataset(path, tiny_dataset)
        back = load_dataset(path)
        assert np.array_equal(back.windows, tiny_dataset.windows)
        assert np.array_equal(back.labels, tiny_dataset.labels)
        assert np.array_equal(back.window_ids, tiny_dataset.window_ids)
        assert back.attribute_names == tiny_dataset.attribute_names
        assert back.manifest == tiny_dataset.manifest
        assert np.array_equal(back.scaler.mean, tiny_dataset.scaler.mean)
        assert back.window_spec == tiny_dataset.window_spec

    def test_manifest_file_round_trip(self, tiny_dataset, tmp_path):
        path = tmp_path / "manifest.json"
        save_manifest(path, tiny_dataset.manifest, header={"note": "test"})
        header, records = load_manifest(path)
        assert header["note"] == "test"
        assert records == tiny_dataset.manifest
