"""Autoregressive imputation of flagged samples.

Per attribute, a ridge-regularized linear model predicts x(t) from the
previous `lags` values plus smooth calendar features (sin/cos of time of
day and day of year) and an intercept. The intercept is not penalized, so
a very large ridge weight degrades gracefully to an intercept-only
(mean) forecaster instead of collapsing to zero.

`impute_flagged` walks the series left to right and replaces every flagged
sample with a one-step forecast conditioned only on trusted values
(unflagged originals or earlier imputations). Corrupted originals are
never read, which the test suite verifies by poisoning them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    EmptyInputError,
    ImputerError,
    ModelFileError,
    ModelVersionError,
    RangeError,
    ShapeError,
    WarmUpError,
)
from .model import WeatherSeries

IMPUTER_MAGIC = "cerealia-imputer"
IMPUTER_VERSION = 1

SECONDS_PER_DAY = 86400
SECONDS_PER_YEAR = 86400 * 365


@dataclass(frozen=True)
class ImputerConfig:
    lags: int = 12
    ridge: float = 1e-3
    calendar_features: bool = True

    def __post_init__(self):
        if self.lags < 1:
            raise RangeError("lags must be at least 1, got %d" % self.lags)
        if self.ridge < 0:
            raise RangeError("ridge must be non-negative, got %g" % self.ridge)

    @property
    def n_features(self) -> int:
        return self.lags + (4 if self.calendar_features else 0) + 1

    def to_dict(self) -> dict:
        return {
            "lags": self.lags,
            "ridge": self.ridge,
            "calendar_features": self.calendar_features,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ImputerConfig":
        return cls(
            lags=int(d["lags"]),
            ridge=float(d["ridge"]),
            calendar_features=bool(d["calendar_features"]),
        )


def _calendar(ts: np.ndarray) -> np.ndarray:
    """(m, 4) sin/cos of time of day and day of year for epoch seconds."""
    ts = np.asarray(ts, dtype=np.float64)
    day_phase = 2.0 * np.pi * (ts % SECONDS_PER_DAY) / SECONDS_PER_DAY
    year_phase = 2.0 * np.pi * (ts % SECONDS_PER_YEAR) / SECONDS_PER_YEAR
    return np.column_stack(
        [np.sin(day_phase), np.cos(day_phase), np.sin(year_phase), np.cos(year_phase)]
    )


def _design_row(history: np.ndarray, cal_row: np.ndarray | None) -> np.ndarray:
    """Feature vector for one prediction: newest lag first, then calendar,
    then the intercept column."""
    parts = [history[::-1]]
    if cal_row is not None:
        parts.append(cal_row)
    parts.append(np.ones(1))
    return np.concatenate(parts)


def build_design(
    values: np.ndarray, timestamps: np.ndarray, config: ImputerConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Lagged design matrix and targets for one attribute column."""
    m = values.shape[0]
    p = config.lags
    rows = m - p
    if rows < 1:
        raise EmptyInputError("need more than %d samples to build lagged rows" % p)
    lag_cols = [values[p - 1 - i : m - 1 - i] for i in range(p)]
    parts = [np.column_stack(lag_cols)]
    if config.calendar_features:
        parts.append(_calendar(timestamps[p:]))
    parts.append(np.ones((rows, 1)))
    return np.hstack(parts), values[p:]


def _ridge_solve(a: np.ndarray, y: np.ndarray, ridge: float) -> np.ndarray:
    """Least squares with an L2 penalty on every column but the intercept,
    via row augmentation so the conditioning stays benign."""
    n_features = a.shape[1]
    if ridge > 0.0:
        penalty = np.sqrt(ridge) * np.eye(n_features)
        penalty[-1, -1] = 0.0  # intercept stays free
        a_aug = np.vstack([a, penalty])
        y_aug = np.concatenate([y, np.zeros(n_features)])
        beta, _, _, _ = np.linalg.lstsq(a_aug, y_aug, rcond=None)
        return beta
    beta, _, rank, _ = np.linalg.lstsq(a, y, rcond=None)
    if rank < n_features:
        raise ImputerError(
            "design matrix is singular (rank %d of %d); set ridge > 0"
            % (rank, n_features)
        )
    return beta


@dataclass(frozen=True)
class ArImputer:
    """Fitted per-attribute lag models sharing one config."""

    config: ImputerConfig
    attribute_names: tuple[str, ...]
    sampling_interval: int
    coefficients: np.ndarray  # (n_attrs, n_features)
    residual_std: np.ndarray  # (n_attrs,)
    train_mean: np.ndarray  # (n_attrs,)

    def predict_one(
        self, history: np.ndarray, timestamp: int
    ) -> np.ndarray:
        """One-step-ahead prediction for all attributes.

        history: (lags, n_attrs), oldest row first, all trusted values.
        """
        p = self.config.lags
        if history.shape != (p, len(self.attribute_names)):
            raise ShapeError(
                "history must be (%d, %d), got %r"
                % (p, len(self.attribute_names), history.shape)
            )
        cal = _calendar(np.array([timestamp]))[0] if self.config.calendar_features else None
        out = np.empty(len(self.attribute_names))
        for j in range(len(self.attribute_names)):
            row = _design_row(history[:, j], cal)
            out[j] = float(row @ self.coefficients[j])
        return out


def fit_imputer(history: WeatherSeries, config: ImputerConfig | None = None) -> ArImputer:
    """Fit the lag models on a trusted (clean) history."""
    config = config or ImputerConfig()
    m = len(history)
    if m - config.lags < config.n_features:
        raise EmptyInputError(
            "history of %d samples is too short for %d lags and %d features"
            % (m, config.lags, config.n_features)
        )
    n = history.schema.arity
    coefficients = np.empty((n, config.n_features))
    residual_std = np.empty(n)
    for j in range(n):
        a, y = build_design(history.values[:, j], history.timestamps, config)
        beta = _ridge_solve(a, y, config.ridge)
        coefficients[j] = beta
        residual_std[j] = float(np.std(y - a @ beta))
    return ArImputer(
        config=config,
        attribute_names=history.schema.names,
        sampling_interval=history.schema.sampling_interval,
        coefficients=coefficients,
        residual_std=residual_std,
        train_mean=history.values.mean(axis=0),
    )


def forecast(imputer: ArImputer, recent: WeatherSeries, horizon: int) -> np.ndarray:
    """Iterated one-step forecasts: (horizon, n_attrs) beyond the end of
    `recent`, each step feeding on the previous predictions."""
    if horizon < 1:
        raise RangeError("horizon must be at least 1, got %d" % horizon)
    p = imputer.config.lags
    if len(recent) < p:
        raise EmptyInputError(
            "need at least %d recent samples to forecast, got %d" % (p, len(recent))
        )
    if recent.schema.names != imputer.attribute_names:
        raise ShapeError(
            "series attributes %r do not match imputer %r"
            % (recent.schema.names, imputer.attribute_names)
        )
    buffer = recent.values[-p:].copy()
    last_ts = int(recent.timestamps[-1])
    step = imputer.sampling_interval
    out = np.empty((horizon, len(imputer.attribute_names)))
    for i in range(horizon):
        ts = last_ts + (i + 1) * step
        pred = imputer.predict_one(buffer, ts)
        out[i] = pred
        buffer = np.vstack([buffer[1:], pred])
    return out


def impute_flagged(
    series: WeatherSeries, flags: np.ndarray, imputer: ArImputer
) -> WeatherSeries:
    """Replace flagged samples with one-step forecasts, left to right.

    Each replacement conditions only on the `lags` preceding trusted values
    (originals that were never flagged, or earlier imputations); the flagged
    originals themselves are never consulted. The first `lags` samples must
    be unflagged: they are the warm-up.
    """
    flags = np.asarray(flags, dtype=bool)
    if flags.shape != (len(series),):
        raise ShapeError(
            "flags must be a (%d,) boolean vector, got %r" % (len(series), flags.shape)
        )
    if series.schema.names != imputer.attribute_names:
        raise ShapeError(
            "series attributes %r do not match imputer %r"
            % (series.schema.names, imputer.attribute_names)
        )
    p = imputer.config.lags
    if flags[:p].any():
        raise WarmUpError(
            "the first %d samples form the warm-up and must be unflagged" % p
        )
    trusted = series.values.copy()
    for i in np.nonzero(flags)[0]:
        trusted[i] = imputer.predict_one(trusted[i - p : i], int(series.timestamps[i]))
    return series.replace_values(trusted)


def save_imputer(imputer: ArImputer, path) -> None:
    doc = {
        "magic": IMPUTER_MAGIC,
        "version": IMPUTER_VERSION,
        "config": imputer.config.to_dict(),
        "attributes": list(imputer.attribute_names),
        "sampling_interval": imputer.sampling_interval,
        "coefficients": imputer.coefficients.tolist(),
        "residual_std": imputer.residual_std.tolist(),
        "train_mean": imputer.train_mean.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_imputer(path) -> ArImputer:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFileError("not a readable imputer file: %s" % exc)
    if not isinstance(doc, dict) or doc.get("magic") != IMPUTER_MAGIC:
        raise ModelFileError("file lacks the %r magic marker" % IMPUTER_MAGIC)
    if doc.get("version") != IMPUTER_VERSION:
        raise ModelVersionError(
            "imputer file version %r, this build reads version %d"
            % (doc.get("version"), IMPUTER_VERSION)
        )
    return ArImputer(
        config=ImputerConfig.from_dict(doc["config"]),
        attribute_names=tuple(doc["attributes"]),
        sampling_interval=int(doc["sampling_interval"]),
        coefficients=np.asarray(doc["coefficients"], dtype=np.float64),
        residual_std=np.asarray(doc["residual_std"], dtype=np.float64),
        train_mean=np.asarray(doc["train_mean"], dtype=np.float64),
    )
