"""Fruit surface temperature (FST): the downstream decision metric.

A synthetic oracle maps four weather inputs to FST:

    fst = air + radiation_gain * solar / (1 + wind_damping * wind)
              - dew_coupling * (air - dew_point) + Normal(0, noise_std^2)

Radiative load heats the fruit surface above air temperature, wind damps
that gain, and a dry air mass (large air minus dew point spread) cools it
slightly. A small feed-forward regressor learns the mapping from data, and
`run_fst_experiment` measures how its accuracy degrades when the inputs
are corrupted and how much detection plus imputation recovers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import FST_INPUT_NAMES, corpus_series, default_synth_config
from .errors import EmptyInputError, RangeError, SchemaError, ShapeError
from .faults import DatasetConfig, NoiseClass, _corrupt_window_values
from .impute import ArImputer, fit_imputer, impute_flagged
from .metrics import RegressionMetrics, regression_metrics
from .model import (
    FAULT_CLASSES,
    ScalerParams,
    WeatherSeries,
    WindowSpec,
    make_rng,
    mix_seed,
    scaler_from_values,
    standardize_values,
)
from .nn import MLP, FitConfig, fit_network


@dataclass(frozen=True)
class FstParams:
    radiation_gain: float = 0.015  # degC gain per W/m^2 before wind damping
    wind_damping: float = 0.7  # per m/s
    dew_coupling: float = 0.05  # cooling per degC of air/dew spread
    noise_std: float = 0.2

    def __post_init__(self):
        if self.noise_std < 0:
            raise RangeError("noise_std must be non-negative")

    def to_dict(self) -> dict:
        return {
            "radiation_gain": self.radiation_gain,
            "wind_damping": self.wind_damping,
            "dew_coupling": self.dew_coupling,
            "noise_std": self.noise_std,
        }


@dataclass(frozen=True)
class FstInput:
    """One oracle evaluation point. Wind and solar must be non-negative."""

    air_temperature: float
    wind_speed: float
    dew_point: float
    solar_radiation: float

    def __post_init__(self):
        if self.wind_speed < 0:
            raise RangeError("wind_speed must be non-negative, got %g" % self.wind_speed)
        if self.solar_radiation < 0:
            raise RangeError(
                "solar_radiation must be non-negative, got %g" % self.solar_radiation
            )


def fst_oracle(
    inp: FstInput, params: FstParams | None = None, rng: np.random.Generator | None = None
) -> float:
    """Ground-truth FST for one input; deterministic when noise_std is 0."""
    params = params or FstParams()
    value = (
        inp.air_temperature
        + params.radiation_gain * inp.solar_radiation / (1.0 + params.wind_damping * inp.wind_speed)
        - params.dew_coupling * (inp.air_temperature - inp.dew_point)
    )
    if params.noise_std > 0:
        if rng is None:
            raise RangeError("noise_std > 0 requires an rng for the noise draw")
        value += float(rng.normal(0.0, params.noise_std))
    return float(value)


def fst_oracle_values(
    air: np.ndarray,
    wind: np.ndarray,
    dew: np.ndarray,
    solar: np.ndarray,
    params: FstParams | None = None,
    seed: int = 0,
) -> np.ndarray:
    """Vectorized oracle over aligned arrays, noise drawn from `seed`."""
    params = params or FstParams()
    air = np.asarray(air, dtype=np.float64)
    wind = np.asarray(wind, dtype=np.float64)
    dew = np.asarray(dew, dtype=np.float64)
    solar = np.asarray(solar, dtype=np.float64)
    if np.any(wind < 0) or np.any(solar < 0):
        raise RangeError("wind_speed and solar_radiation must be non-negative")
    out = (
        air
        + params.radiation_gain * solar / (1.0 + params.wind_damping * wind)
        - params.dew_coupling * (air - dew)
    )
    if params.noise_std > 0:
        out = out + make_rng(seed).normal(0.0, params.noise_std, size=out.shape)
    return out


@dataclass(frozen=True)
class FstRegressorConfig:
    hidden_units: int = 32
    learning_rate: float = 0.001
    batch_size: int = 64
    max_epochs: int = 150
    patience: int = 10
    val_fraction: float = 0.2
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "hidden_units": self.hidden_units,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "val_fraction": self.val_fraction,
            "seed": self.seed,
        }


class FstRegressor:
    """One-hidden-layer network on standardized inputs and target."""

    def __init__(
        self,
        mlp: MLP,
        input_scaler: ScalerParams,
        target_mean: float,
        target_std: float,
        config: FstRegressorConfig,
    ):
        self.mlp = mlp
        self.input_scaler = input_scaler
        self.target_mean = target_mean
        self.target_std = target_std
        self.config = config

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        x = np.asarray(inputs, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.input_scaler.mean.shape[0]:
            raise ShapeError(
                "inputs must be (m, %d), got %r" % (self.input_scaler.mean.shape[0], x.shape)
            )
        z = standardize_values(self.input_scaler, x)
        out = self.mlp.predict(z)[:, 0]
        return out * self.target_std + self.target_mean


def fit_fst_regressor(
    inputs: np.ndarray,
    targets: np.ndarray,
    config: FstRegressorConfig | None = None,
) -> tuple[FstRegressor, dict]:
    """Train the FST regressor on (input row, observed FST) pairs."""
    config = config or FstRegressorConfig()
    x = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64).ravel()
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ShapeError("inputs must be (m, d) aligned with targets (m,)")
    if x.shape[0] < 500:
        raise EmptyInputError(
            "need at least 500 training pairs, got %d" % x.shape[0]
        )
    scaler = scaler_from_values(x)
    y_mean = float(y.mean())
    y_std = float(max(y.std(), 1e-8))
    xz = standardize_values(scaler, x)
    yz = ((y - y_mean) / y_std)[:, None]

    rng = make_rng(mix_seed(config.seed, 3))
    order = rng.permutation(x.shape[0])
    n_val = max(1, int(round(config.val_fraction * x.shape[0])))
    val_idx, train_idx = order[:n_val], order[n_val:]

    mlp = MLP([x.shape[1], config.hidden_units, 1], seed=mix_seed(config.seed, 1), task="regress")
    fit = fit_network(
        mlp,
        xz[train_idx],
        yz[train_idx],
        xz[val_idx],
        yz[val_idx],
        FitConfig(
            learning_rate=config.learning_rate,
            batch_size=config.batch_size,
            max_epochs=config.max_epochs,
            patience=config.patience,
            dropout=0.0,
        ),
        seed=mix_seed(config.seed, 2),
    )
    regressor = FstRegressor(mlp, scaler, y_mean, y_std, config)
    info = {
        "epochs_run": fit.epochs_run,
        "train_loss": fit.train_loss,
        "val_loss": fit.val_loss,
        "n_train": int(train_idx.size),
        "n_val": int(val_idx.size),
    }
    return regressor, info


@dataclass(frozen=True)
class FstExperimentConfig:
    """Three-condition comparison on one synthetic corpus.

    The corpus is split into a training prefix (regressor fitting and, for
    external callers, detector/imputer fitting) and a test suffix cut into
    non-overlapping windows. pct_faulty percent of the test windows are
    corrupted, split equally across the four fault classes; window 0 is
    never faulted, it is the warm-up.
    """

    corpus_seed: int = 0
    pct_faulty: float = 20.0
    train_samples: int = 12000
    test_windows: int = 200
    window_length: int = 48
    random_density: float = 0.1
    params: FstParams = field(default_factory=FstParams)
    regressor: FstRegressorConfig = field(default_factory=FstRegressorConfig)

    def __post_init__(self):
        if not (0.0 <= self.pct_faulty <= 100.0):
            raise RangeError("pct_faulty must be in [0, 100]")
        if self.test_windows < 2:
            raise RangeError("need at least 2 test windows")

    def to_dict(self) -> dict:
        return {
            "corpus_seed": self.corpus_seed,
            "pct_faulty": self.pct_faulty,
            "train_samples": self.train_samples,
            "test_windows": self.test_windows,
            "window_length": self.window_length,
            "random_density": self.random_density,
            "params": self.params.to_dict(),
            "regressor": self.regressor.to_dict(),
        }


@dataclass(frozen=True)
class FstExperimentReport:
    clean: RegressionMetrics
    imperfect: RegressionMetrics
    imputed: RegressionMetrics
    n_test_samples: int
    n_faulty_windows: int
    n_flagged_windows: int
    regressor_info: dict
    config: dict

    def to_dict(self) -> dict:
        def m(metrics: RegressionMetrics) -> dict:
            return {"mae": metrics.mae, "rmse": metrics.rmse, "r2": metrics.r2, "n": metrics.n}

        return {
            "kind": "fst-experiment",
            "conditions": {
                "clean": m(self.clean),
                "imperfect": m(self.imperfect),
                "imputed": m(self.imputed),
            },
            "n_test_samples": self.n_test_samples,
            "n_faulty_windows": self.n_faulty_windows,
            "n_flagged_windows": self.n_flagged_windows,
            "regressor": self.regressor_info,
            "config": self.config,
        }


def _corrupt_test_stream(
    test: WeatherSeries, config: FstExperimentConfig, seed: int
) -> tuple[WeatherSeries, np.ndarray, int]:
    """Corrupt pct_faulty of the non-overlapping test windows in place
    (on a copy). Returns (corrupted series, true per-window labels, count)."""
    k = config.window_length
    n_windows = len(test) // k
    labels = np.zeros(n_windows, dtype=np.int64)
    n_faulty = int(round(config.pct_faulty / 100.0 * n_windows))
    values = test.values.copy()
    if n_faulty == 0:
        return test.replace_values(values), labels, 0
    rng = make_rng(seed)
    # window 0 stays clean so downstream imputation has a trusted warm-up
    chosen = rng.choice(np.arange(1, n_windows), size=min(n_faulty, n_windows - 1), replace=False)
    chosen = np.sort(chosen)
    class_perm = rng.permutation(chosen.size)
    names = test.schema.names
    ds_cfg = DatasetConfig(
        pct_inconsistent=config.pct_faulty,
        window=WindowSpec(k, k),
        seed=seed,
        random_density=config.random_density,
    )
    for i, w in enumerate(chosen):
        label = FAULT_CLASSES[int(class_perm[i]) % len(FAULT_CLASSES)]
        rng_w = make_rng(mix_seed(seed, int(w)))
        attr_index = int(rng_w.integers(0, len(names)))
        if label is NoiseClass.RANDOM:
            segment = (0, k)
        else:
            seg_len = int(rng_w.integers(min(24, k), k + 1))
            seg_start = int(rng_w.integers(0, k - seg_len + 1))
            segment = (seg_start, seg_start + seg_len)
        inject_seed = int(rng_w.integers(0, 2**63))
        window_vals = values[w * k : (w + 1) * k]
        values[w * k : (w + 1) * k], _ = _corrupt_window_values(
            window_vals, label, attr_index, segment, inject_seed, ds_cfg
        )
        labels[w] = 1  # faulty marker; per-class identity kept via manifest-free design
    return test.replace_values(values), labels, int(chosen.size)


def run_fst_experiment(
    detector,
    imputer: ArImputer,
    config: FstExperimentConfig | None = None,
) -> FstExperimentReport:
    """Clean vs imperfect vs detected-and-imputed FST prediction error.

    One regressor is trained on the clean training prefix and reused for
    all three conditions; only the test inputs differ.
    """
    config = config or FstExperimentConfig()
    k = config.window_length
    n_total = config.train_samples + config.test_windows * k
    series = corpus_series(config.corpus_seed, n_total)
    names = series.schema.names
    if detector.attribute_names != names:
        raise SchemaError(
            "detector was trained on %r, corpus has %r" % (detector.attribute_names, names)
        )
    if imputer.attribute_names != names:
        raise SchemaError(
            "imputer was fitted on %r, corpus has %r" % (imputer.attribute_names, names)
        )
    if detector.window_spec.length != k:
        raise ShapeError(
            "detector window length %d, experiment uses %d"
            % (detector.window_spec.length, k)
        )
    fst_cols = [series.schema.index_of(name) for name in FST_INPUT_NAMES]

    truth = fst_oracle_values(
        series.column("air_temperature"),
        series.column("wind_speed"),
        series.column("dew_point"),
        series.column("solar_radiation"),
        config.params,
        seed=mix_seed(config.corpus_seed, 101),
    )
    train = series.slice(0, config.train_samples)
    test = series.slice(config.train_samples, n_total)
    truth_test = truth[config.train_samples :]

    regressor, info = fit_fst_regressor(
        train.values[:, fst_cols], truth[: config.train_samples], config.regressor
    )

    corrupted, window_faulty, n_faulty = _corrupt_test_stream(
        test, config, seed=mix_seed(config.corpus_seed, 202)
    )

    # condition a: pristine inputs
    pred_clean = regressor.predict(test.values[:, fst_cols])
    # condition b: corrupted inputs go straight into the regressor
    pred_imperfect = regressor.predict(corrupted.values[:, fst_cols])
    # condition c: detector flags windows, imputer repairs them
    n_windows = len(test) // k
    flags = np.zeros(len(test), dtype=bool)
    n_flagged = 0
    for w in range(n_windows):
        window_raw = corrupted.values[w * k : (w + 1) * k]
        label, _ = detector.classify(standardize_values(detector.scaler, window_raw))
        if label is not NoiseClass.CLEAN and w > 0:
            flags[w * k : (w + 1) * k] = True
            n_flagged += 1
    repaired = impute_flagged(corrupted, flags, imputer)
    pred_imputed = regressor.predict(repaired.values[:, fst_cols])

    return FstExperimentReport(
        clean=regression_metrics(truth_test, pred_clean),
        imperfect=regression_metrics(truth_test, pred_imperfect),
        imputed=regression_metrics(truth_test, pred_imputed),
        n_test_samples=len(test),
        n_faulty_windows=n_faulty,
        n_flagged_windows=n_flagged,
        regressor_info=info,
        config=config.to_dict(),
    )
