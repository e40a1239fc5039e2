"""Window classifiers.

Two families behind one interface:

* NeuralDetector: a feed-forward network over the flattened standardized
  window, softmax over the five labels, trained with Adam, dropout and
  early stopping. The first stage of the network is fixed, not trained: it
  appends per-attribute order statistics and difference energies to the
  flattened window (the position-invariant features a convolutional front
  end would otherwise have to learn), and the trainable hidden layers sit
  on top of that.
* StatDetector: closed-form window statistics (spike z-score, variance
  ratio, level shift, flatness) with thresholds calibrated by a small grid
  search on validation macro-F1.

`classify` takes a standardized (length, n_attributes) window and returns
(label, scores); scores always sum to 1 and inference is deterministic.
Persistence is a self-describing versioned JSON file shared by both kinds.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .errors import (
    DegenerateDatasetError,
    ModelFileError,
    ModelVersionError,
    RangeError,
    ShapeError,
)
from .faults import LabeledDataset
from .metrics import ConfusionMatrix, confusion, macro_f1, prf1
from .model import (
    CLASS_ORDER,
    NoiseClass,
    ScalerParams,
    WindowSpec,
    class_index,
    make_rng,
    mix_seed,
    standardize_values,
)
from .nn import MLP, FitConfig, fit_network

MODEL_MAGIC = "cerealia-detector"
MODEL_VERSION = 1


class Detector(Protocol):
    kind: str
    scaler: ScalerParams
    window_spec: WindowSpec
    attribute_names: tuple[str, ...]

    def classify(self, window: np.ndarray) -> tuple[NoiseClass, np.ndarray]: ...


def _check_window_shape(window: np.ndarray, spec: WindowSpec, n_attrs: int) -> np.ndarray:
    w = np.asarray(window, dtype=np.float64)
    if w.shape != (spec.length, n_attrs):
        raise ShapeError(
            "window must be (%d, %d), got %r" % (spec.length, n_attrs, w.shape)
        )
    return w


N_WINDOW_STATS = 13
_FLAT_EPS = 1e-9


def _longest_true_run(mask: np.ndarray) -> np.ndarray:
    """Length of the longest run of True along axis 1 of a (B, k, n) mask."""
    B, k, n = mask.shape
    cur = np.zeros((B, n))
    best = np.zeros((B, n))
    for t in range(k):
        cur = (cur + 1.0) * mask[:, t, :]
        np.maximum(best, cur, out=best)
    return best


def window_statistics(windows: np.ndarray) -> np.ndarray:
    """Per-attribute summary statistics of standardized windows.

    The fixed first stage of the neural detector: order statistics,
    difference energies and sparsity ratios computed identically at train
    and inference time, so class evidence that lives at arbitrary window
    positions (a spike, a flattened run, a shifted segment) reaches the
    trainable layers in a position-free form. Everything is scale-free or
    measured on already-standardized values; magnitudes are log-compressed
    so one extreme value cannot saturate the first trainable layer.

    A fault touches one attribute, so the same statistics are also gathered
    for the most deviant attribute of each window and appended at fixed
    positions; the trainable layers then see the faulted attribute's
    evidence at the same inputs regardless of which attribute it is.

    Accepts (B, k, n) or a single (k, n) window; returns
    (B, (n + 1) * N_WINDOW_STATS) or ((n + 1) * N_WINDOW_STATS,).
    """
    w = np.asarray(windows, dtype=np.float64)
    single = w.ndim == 2
    if single:
        w = w[None, :, :]
    k = w.shape[1]
    half = k // 2
    med = np.median(w, axis=1, keepdims=True)
    dev = np.abs(w - med)
    diffs = np.diff(w, axis=1)
    abs_diffs = np.abs(diffs)
    d2 = np.abs(np.diff(w, n=2, axis=1))
    med_d2 = np.median(d2, axis=1)
    med_d1 = np.median(abs_diffs, axis=1)
    dev_max = dev.max(axis=1)
    run_len = _longest_true_run(dev >= 0.5 * dev_max[:, None, :])
    stats = np.stack(
        [
            w.mean(axis=1),
            w.std(axis=1),
            diffs.std(axis=1),
            dev_max,
            dev.mean(axis=1),
            abs_diffs.max(axis=1),
            (abs_diffs <= _FLAT_EPS).mean(axis=1),
            np.abs(w[:, half:, :].mean(axis=1) - w[:, :half, :].mean(axis=1)),
            w.max(axis=1) - w.min(axis=1),
            # density and contiguity cues: dense fluctuation raises the
            # median difference energy, sparse spikes raise the peak far
            # above it, and segment faults deviate in one contiguous run
            med_d2,
            d2.max(axis=1) / (med_d2 + 1e-3),
            (abs_diffs > 4.0 * (med_d1[:, None, :] + _FLAT_EPS)).mean(axis=1),
            run_len / k,
        ],
        axis=2,
    )
    B = w.shape[0]
    deviant = np.argmax(dev_max, axis=1)
    picked = stats[np.arange(B), deviant, :]
    compressed = np.sign(stats) * np.log1p(np.abs(stats))
    picked = np.sign(picked) * np.log1p(np.abs(picked))
    out = np.concatenate([compressed.reshape(B, -1), picked], axis=1)
    return out[0] if single else out


def _feature_matrix(windows: np.ndarray) -> np.ndarray:
    """Flattened windows with the fixed statistics appended.

    The flattened values get the same signed log compression as the
    statistics: a far-out sample is informative because it is far out, not
    because of how far, and uncompressed faults on low-variance attributes
    reach standardized magnitudes in the hundreds that drown every shape
    cue under a single scale direction."""
    w = np.asarray(windows, dtype=np.float64)
    if w.ndim == 2:
        w = w[None, :, :]
    flat = w.reshape(w.shape[0], -1)
    flat = np.sign(flat) * np.log1p(np.abs(flat))
    return np.concatenate([flat, window_statistics(w)], axis=1)


@dataclass(frozen=True)
class NeuralDetectorConfig:
    hidden_layers: tuple[int, ...] = (64, 32)
    dropout: float = 0.2
    learning_rate: float = 0.001
    batch_size: int = 64
    max_epochs: int = 100
    patience: int = 5
    val_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not self.hidden_layers or any(h <= 0 for h in self.hidden_layers):
            raise RangeError("hidden_layers must be positive widths")
        if not (0.0 <= self.dropout < 1.0):
            raise RangeError("dropout must be in [0, 1), got %g" % self.dropout)
        if not (0.0 < self.val_fraction < 1.0):
            raise RangeError("val_fraction must be in (0, 1)")

    def to_dict(self) -> dict:
        return {
            "hidden_layers": list(self.hidden_layers),
            "dropout": self.dropout,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "val_fraction": self.val_fraction,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NeuralDetectorConfig":
        return cls(
            hidden_layers=tuple(d["hidden_layers"]),
            dropout=d["dropout"],
            learning_rate=d["learning_rate"],
            batch_size=d["batch_size"],
            max_epochs=d["max_epochs"],
            patience=d["patience"],
            val_fraction=d.get("val_fraction", 0.2),
            seed=d["seed"],
        )


@dataclass(frozen=True)
class TrainReport:
    epochs_run: int
    train_loss: float
    val_loss: float
    val_macro_f1: float
    per_class_f1: dict[str, float]
    n_train: int
    n_val: int
    confusion_counts: tuple[tuple[int, ...], ...]

    def to_dict(self) -> dict:
        return {
            "epochs_run": self.epochs_run,
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
            "val_macro_f1": self.val_macro_f1,
            "per_class_f1": dict(self.per_class_f1),
            "n_train": self.n_train,
            "n_val": self.n_val,
            "confusion": [list(row) for row in self.confusion_counts],
        }


class NeuralDetector:
    kind = "neural"

    def __init__(
        self,
        mlp: MLP,
        scaler: ScalerParams,
        window_spec: WindowSpec,
        attribute_names: tuple[str, ...],
        config: NeuralDetectorConfig,
    ):
        self.mlp = mlp
        self.scaler = scaler
        self.window_spec = window_spec
        self.attribute_names = tuple(attribute_names)
        self.config = config

    def classify(self, window: np.ndarray) -> tuple[NoiseClass, np.ndarray]:
        w = _check_window_shape(window, self.window_spec, len(self.attribute_names))
        scores = self.mlp.predict(_feature_matrix(w))[0]
        return CLASS_ORDER[int(np.argmax(scores))], scores

    def classify_batch(self, windows: np.ndarray) -> tuple[list[NoiseClass], np.ndarray]:
        w = np.asarray(windows, dtype=np.float64)
        if w.ndim != 3 or w.shape[1:] != (self.window_spec.length, len(self.attribute_names)):
            raise ShapeError(
                "windows must be (B, %d, %d), got %r"
                % (self.window_spec.length, len(self.attribute_names), w.shape)
            )
        scores = self.mlp.predict(_feature_matrix(w))
        labels = [CLASS_ORDER[int(i)] for i in np.argmax(scores, axis=1)]
        return labels, scores

    def classify_raw(self, window_raw: np.ndarray) -> tuple[NoiseClass, np.ndarray]:
        """Standardize a raw-unit window with the trained scaler, then classify."""
        w = _check_window_shape(window_raw, self.window_spec, len(self.attribute_names))
        return self.classify(standardize_values(self.scaler, w))


def _stratified_split(
    labels: np.ndarray, window_ids: np.ndarray, val_fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-class 80/20 split. Positions are keyed by window id, so the split
    (and everything downstream) is invariant to presentation order."""
    canonical = np.argsort(window_ids, kind="stable")
    rng = make_rng(seed)
    train_idx: list[int] = []
    val_idx: list[int] = []
    for cls in range(len(CLASS_ORDER)):
        members = canonical[labels[canonical] == cls]
        if members.size == 0:
            continue
        order = rng.permutation(members.size)
        members = members[order]
        n_val = int(round(val_fraction * members.size))
        if members.size >= 2:
            n_val = min(max(n_val, 1), members.size - 1)
        else:
            n_val = 0
        val_idx.extend(members[:n_val].tolist())
        train_idx.extend(members[n_val:].tolist())
    return np.sort(np.array(train_idx, dtype=int)), np.sort(np.array(val_idx, dtype=int))


def _dataset_matrices(dataset: LabeledDataset) -> tuple[np.ndarray, np.ndarray]:
    W = len(dataset)
    x = _feature_matrix(dataset.windows)
    y = np.zeros((W, len(CLASS_ORDER)))
    y[np.arange(W), dataset.labels] = 1.0
    return x, y


def _balance_by_repetition(labels: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Repeat minority-class training rows so each class contributes more
    comparably many updates per epoch. Clean windows outnumber each fault
    class several-fold at every inconsistency level and plain cross-entropy
    starves the fault boundaries without this; square-root repetition only
    softens the skew, so scarcer fault labels still mean weaker detection
    rather than being fully compensated away."""
    counts = np.bincount(labels[idx], minlength=len(CLASS_ORDER))
    top = int(counts.max())
    parts = []
    for c in range(len(CLASS_ORDER)):
        members = idx[labels[idx] == c]
        if members.size == 0:
            continue
        reps = max(1, int(round(np.sqrt(top / members.size))))
        parts.append(np.tile(members, reps))
    return np.sort(np.concatenate(parts))


def _check_trainable(dataset: LabeledDataset) -> None:
    if len(dataset) < 100:
        raise DegenerateDatasetError(
            "dataset has %d windows, need at least 100" % len(dataset)
        )
    present = np.unique(dataset.labels)
    if present.size < 2:
        raise DegenerateDatasetError(
            "dataset contains a single class (%s); nothing to separate"
            % CLASS_ORDER[int(present[0])].value
        )


def _val_report(
    predicted: list[NoiseClass], val_labels: np.ndarray, fit_epochs: int,
    train_loss: float, val_loss: float, n_train: int,
) -> TrainReport:
    truth = [CLASS_ORDER[int(i)] for i in val_labels]
    matrix = confusion(truth, predicted)
    per_class = {c.value: prf1(matrix, c).f1 for c in CLASS_ORDER}
    return TrainReport(
        epochs_run=fit_epochs,
        train_loss=train_loss,
        val_loss=val_loss,
        val_macro_f1=macro_f1(matrix),
        per_class_f1=per_class,
        n_train=n_train,
        n_val=len(truth),
        confusion_counts=tuple(tuple(int(v) for v in row) for row in matrix.counts),
    )


def train_neural(
    dataset: LabeledDataset, config: NeuralDetectorConfig | None = None
) -> tuple[NeuralDetector, TrainReport]:
    """Train the feed-forward classifier on a labeled dataset.

    Deterministic for a fixed config seed: weight init, the stratified
    split, epoch shuffles and dropout masks all derive from it.
    """
    config = config or NeuralDetectorConfig()
    _check_trainable(dataset)
    x, y = _dataset_matrices(dataset)
    train_idx, val_idx = _stratified_split(
        dataset.labels, dataset.window_ids, config.val_fraction, mix_seed(config.seed, 3)
    )
    fit_idx = _balance_by_repetition(dataset.labels, train_idx)
    sizes = [x.shape[1], *config.hidden_layers, len(CLASS_ORDER)]
    mlp = MLP(sizes, seed=mix_seed(config.seed, 1), task="classify")
    fit = fit_network(
        mlp,
        x[fit_idx],
        y[fit_idx],
        x[val_idx],
        y[val_idx],
        FitConfig(
            learning_rate=config.learning_rate,
            batch_size=config.batch_size,
            max_epochs=config.max_epochs,
            patience=config.patience,
            dropout=config.dropout,
        ),
        seed=mix_seed(config.seed, 2),
    )
    detector = NeuralDetector(
        mlp=mlp,
        scaler=dataset.scaler,
        window_spec=dataset.window_spec,
        attribute_names=dataset.attribute_names,
        config=config,
    )
    scores = mlp.predict(x[val_idx])
    predicted = [CLASS_ORDER[int(i)] for i in np.argmax(scores, axis=1)]
    report = _val_report(
        predicted, dataset.labels[val_idx], fit.epochs_run,
        fit.train_loss, fit.val_loss, len(train_idx),
    )
    return detector, report


@dataclass(frozen=True)
class StatDetectorConfig:
    spike_z: float = 6.0
    variance_ratio: float = 9.0
    level_shift_ratio: float = 1.5
    flatness_epsilon: float = 1e-9
    dense_threshold: float = 0.15
    min_run_frac: float = 0.25
    spike_z_grid: tuple[float, ...] = (6.0, 4.0, 5.0, 8.0)
    variance_ratio_grid: tuple[float, ...] = (9.0, 4.0, 6.0, 16.0)
    level_shift_grid: tuple[float, ...] = (1.5, 1.0, 2.0, 3.0)
    val_fraction: float = 0.2
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "spike_z": self.spike_z,
            "variance_ratio": self.variance_ratio,
            "level_shift_ratio": self.level_shift_ratio,
            "flatness_epsilon": self.flatness_epsilon,
            "dense_threshold": self.dense_threshold,
            "min_run_frac": self.min_run_frac,
            "spike_z_grid": list(self.spike_z_grid),
            "variance_ratio_grid": list(self.variance_ratio_grid),
            "level_shift_grid": list(self.level_shift_grid),
            "val_fraction": self.val_fraction,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StatDetectorConfig":
        return cls(
            spike_z=d["spike_z"],
            variance_ratio=d["variance_ratio"],
            level_shift_ratio=d["level_shift_ratio"],
            flatness_epsilon=d["flatness_epsilon"],
            dense_threshold=d["dense_threshold"],
            min_run_frac=d["min_run_frac"],
            spike_z_grid=tuple(d["spike_z_grid"]),
            variance_ratio_grid=tuple(d["variance_ratio_grid"]),
            level_shift_grid=tuple(d["level_shift_grid"]),
            val_fraction=d.get("val_fraction", 0.2),
            seed=d["seed"],
        )


@dataclass(frozen=True)
class CleanStats:
    """Per-attribute statistics of clean training windows, used as the
    reference scale for every rule."""

    window_std: np.ndarray  # sqrt of mean in-window variance
    window_var: np.ndarray
    mean_of_means: np.ndarray
    std_of_means: np.ndarray

    def to_dict(self) -> dict:
        return {
            "window_std": self.window_std.tolist(),
            "window_var": self.window_var.tolist(),
            "mean_of_means": self.mean_of_means.tolist(),
            "std_of_means": self.std_of_means.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CleanStats":
        return cls(
            window_std=np.asarray(d["window_std"]),
            window_var=np.asarray(d["window_var"]),
            mean_of_means=np.asarray(d["mean_of_means"]),
            std_of_means=np.asarray(d["std_of_means"]),
        )


_FLOOR = 1e-8


@dataclass(frozen=True)
class WindowFeatures:
    """Threshold-free per-window statistics; thresholds are applied later so
    grid search only computes these once. All arrays are (W, n)."""

    max_abs_z: np.ndarray
    dense_frac: np.ndarray
    var_ratio: np.ndarray
    shift: np.ndarray
    run_offset: np.ndarray
    flat_frac: np.ndarray


def _longest_flat_run(flat: np.ndarray) -> tuple[int, int]:
    """(start, length) of the longest run of True in a boolean vector."""
    best_start, best_len, cur_start, cur_len = 0, 0, 0, 0
    for i, val in enumerate(flat):
        if val:
            if cur_len == 0:
                cur_start = i
            cur_len += 1
            if cur_len > best_len:
                best_len, best_start = cur_len, cur_start
        else:
            cur_len = 0
    return best_start, best_len


def compute_window_features(
    windows: np.ndarray, stats: CleanStats, flatness_epsilon: float, min_run_frac: float
) -> WindowFeatures:
    w = np.asarray(windows, dtype=np.float64)
    if w.ndim == 2:
        w = w[None, :, :]
    W, k, n = w.shape
    cw_std = np.maximum(stats.window_std, _FLOOR)
    cw_var = np.maximum(stats.window_var, _FLOOR)
    cm_std = np.maximum(stats.std_of_means, _FLOOR)

    med = np.median(w, axis=1)
    dev = w - med[:, None, :]
    max_abs_z = np.abs(dev).max(axis=1) / cw_std
    dense_frac = (np.abs(dev) > 3.0 * cw_std).mean(axis=1)
    var_ratio = w.var(axis=1) / cw_var
    half = k // 2
    halves = np.abs(w[:, half:, :].mean(axis=1) - w[:, :half, :].mean(axis=1)) / cw_std
    level = np.abs(w.mean(axis=1) - stats.mean_of_means) / cm_std
    shift = np.maximum(halves, level)

    run_offset = np.zeros((W, n))
    flat_frac = np.zeros((W, n))
    diffs_flat = np.abs(np.diff(w, axis=1)) <= flatness_epsilon
    min_run = max(2, int(min_run_frac * k))
    candidates = np.argwhere(diffs_flat.sum(axis=1) >= min_run - 1)
    for wi, ai in candidates:
        start, length = _longest_flat_run(diffs_flat[wi, :, ai])
        if length + 1 < min_run:
            continue
        run_vals = w[wi, start : start + length + 1, ai]
        outside = np.concatenate([w[wi, :start, ai], w[wi, start + length + 1 :, ai]])
        if outside.size >= 4:
            ref = float(np.median(outside))
        else:
            ref = float(stats.mean_of_means[ai])
        run_offset[wi, ai] = abs(float(np.median(run_vals)) - ref) / cw_std[ai]
        flat_frac[wi, ai] = (length + 1) / k
    return WindowFeatures(
        max_abs_z=max_abs_z,
        dense_frac=dense_frac,
        var_ratio=var_ratio,
        shift=shift,
        run_offset=run_offset,
        flat_frac=flat_frac,
    )


def _decide(
    feats: WindowFeatures,
    spike_z: float,
    variance_ratio: float,
    level_shift_ratio: float,
    dense_threshold: float,
    min_run_frac: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized rule application; returns (labels (W,), strengths (W, 5))."""
    W = feats.max_abs_z.shape[0]
    bias_strength = np.where(
        (feats.flat_frac >= min_run_frac) & (feats.run_offset >= level_shift_ratio),
        feats.run_offset / level_shift_ratio,
        0.0,
    ).max(axis=1)
    drift_strength = np.where(
        feats.shift >= level_shift_ratio, feats.shift / level_shift_ratio, 0.0
    ).max(axis=1)
    malf_strength = np.where(
        (feats.var_ratio >= variance_ratio) & (feats.dense_frac >= dense_threshold),
        feats.var_ratio / variance_ratio,
        0.0,
    ).max(axis=1)
    rand_strength = np.where(
        (feats.max_abs_z >= spike_z) & (feats.dense_frac < dense_threshold),
        feats.max_abs_z / spike_z,
        0.0,
    ).max(axis=1)

    strengths = np.zeros((W, len(CLASS_ORDER)))
    strengths[:, class_index(NoiseClass.RANDOM)] = rand_strength
    strengths[:, class_index(NoiseClass.MALFUNCTION)] = malf_strength
    strengths[:, class_index(NoiseClass.DRIFT)] = drift_strength
    strengths[:, class_index(NoiseClass.BIAS)] = bias_strength

    # Most specific evidence wins: an exactly flat run, then a level shift,
    # then dense variance, then sparse spikes. The order matters because the
    # less specific statistics also fire on the more structured faults (a
    # shifted segment inflates window variance, heavy noise produces large
    # single deviations); assignments run in reverse so later ones override.
    labels = np.zeros(W, dtype=np.int64)
    labels[rand_strength > 0.0] = class_index(NoiseClass.RANDOM)
    labels[malf_strength > 0.0] = class_index(NoiseClass.MALFUNCTION)
    labels[drift_strength > 0.0] = class_index(NoiseClass.DRIFT)
    labels[bias_strength > 0.0] = class_index(NoiseClass.BIAS)
    return labels, strengths


class StatDetector:
    kind = "stat"

    def __init__(
        self,
        config: StatDetectorConfig,
        stats: CleanStats,
        scaler: ScalerParams,
        window_spec: WindowSpec,
        attribute_names: tuple[str, ...],
    ):
        self.config = config
        self.stats = stats
        self.scaler = scaler
        self.window_spec = window_spec
        self.attribute_names = tuple(attribute_names)

    def _labels_for(self, windows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        feats = compute_window_features(
            windows, self.stats, self.config.flatness_epsilon, self.config.min_run_frac
        )
        return _decide(
            feats,
            self.config.spike_z,
            self.config.variance_ratio,
            self.config.level_shift_ratio,
            self.config.dense_threshold,
            self.config.min_run_frac,
        )

    def classify(self, window: np.ndarray) -> tuple[NoiseClass, np.ndarray]:
        w = _check_window_shape(window, self.window_spec, len(self.attribute_names))
        labels, strengths = self._labels_for(w[None, :, :])
        label = CLASS_ORDER[int(labels[0])]
        scores = np.full(len(CLASS_ORDER), 0.01)
        scores[int(labels[0])] = 1.0 - 0.01 * (len(CLASS_ORDER) - 1)
        return label, scores

    def classify_batch(self, windows: np.ndarray) -> tuple[list[NoiseClass], np.ndarray]:
        labels, _ = self._labels_for(np.asarray(windows, dtype=np.float64))
        out_scores = np.full((labels.shape[0], len(CLASS_ORDER)), 0.01)
        out_scores[np.arange(labels.shape[0]), labels] = 1.0 - 0.01 * (len(CLASS_ORDER) - 1)
        return [CLASS_ORDER[int(i)] for i in labels], out_scores

    def classify_raw(self, window_raw: np.ndarray) -> tuple[NoiseClass, np.ndarray]:
        w = _check_window_shape(window_raw, self.window_spec, len(self.attribute_names))
        return self.classify(standardize_values(self.scaler, w))


def train_stat(
    dataset: LabeledDataset, config: StatDetectorConfig | None = None
) -> tuple[StatDetector, TrainReport]:
    """Calibrate rule thresholds on the dataset.

    Clean-window statistics come from the training split; the (spike_z,
    variance_ratio, level_shift_ratio) combination maximizing validation
    macro-F1 wins, with the default-first grid order breaking ties.
    """
    config = config or StatDetectorConfig()
    _check_trainable(dataset)
    train_idx, val_idx = _stratified_split(
        dataset.labels, dataset.window_ids, config.val_fraction, mix_seed(config.seed, 3)
    )
    train_clean = train_idx[dataset.labels[train_idx] == 0]
    if train_clean.size == 0:
        raise DegenerateDatasetError("no clean windows in the training split")
    clean_windows = dataset.windows[train_clean]
    means = clean_windows.mean(axis=1)
    stats = CleanStats(
        window_std=np.sqrt(np.maximum(clean_windows.var(axis=1).mean(axis=0), _FLOOR)),
        window_var=np.maximum(clean_windows.var(axis=1).mean(axis=0), _FLOOR),
        mean_of_means=means.mean(axis=0),
        std_of_means=np.maximum(means.std(axis=0), _FLOOR),
    )
    val_feats = compute_window_features(
        dataset.windows[val_idx], stats, config.flatness_epsilon, config.min_run_frac
    )
    truth = [CLASS_ORDER[int(i)] for i in dataset.labels[val_idx]]
    best = None
    for sz, vr, ls in itertools.product(
        config.spike_z_grid, config.variance_ratio_grid, config.level_shift_grid
    ):
        labels, _ = _decide(
            val_feats, sz, vr, ls, config.dense_threshold, config.min_run_frac
        )
        predicted = [CLASS_ORDER[int(i)] for i in labels]
        score = macro_f1(confusion(truth, predicted))
        if best is None or score > best[0]:
            best = (score, sz, vr, ls, predicted)
    assert best is not None
    score, sz, vr, ls, predicted = best
    chosen = StatDetectorConfig(
        spike_z=sz,
        variance_ratio=vr,
        level_shift_ratio=ls,
        flatness_epsilon=config.flatness_epsilon,
        dense_threshold=config.dense_threshold,
        min_run_frac=config.min_run_frac,
        spike_z_grid=config.spike_z_grid,
        variance_ratio_grid=config.variance_ratio_grid,
        level_shift_grid=config.level_shift_grid,
        val_fraction=config.val_fraction,
        seed=config.seed,
    )
    detector = StatDetector(
        config=chosen,
        stats=stats,
        scaler=dataset.scaler,
        window_spec=dataset.window_spec,
        attribute_names=dataset.attribute_names,
    )
    report = _val_report(
        predicted, dataset.labels[val_idx], 0, 0.0, 0.0, len(train_idx)
    )
    return detector, report


def save_detector(detector, path) -> None:
    doc: dict = {
        "magic": MODEL_MAGIC,
        "version": MODEL_VERSION,
        "kind": detector.kind,
        "window": {
            "length": detector.window_spec.length,
            "stride": detector.window_spec.stride,
        },
        "attributes": list(detector.attribute_names),
        "scaler": detector.scaler.to_dict(),
    }
    if detector.kind == "neural":
        doc["config"] = detector.config.to_dict()
        doc["sizes"] = list(detector.mlp.sizes)
        doc["weights"] = [w.tolist() for w in detector.mlp.weights]
        doc["biases"] = [b.tolist() for b in detector.mlp.biases]
    elif detector.kind == "stat":
        doc["config"] = detector.config.to_dict()
        doc["calibration"] = detector.stats.to_dict()
    else:
        raise ModelFileError("unknown detector kind %r" % detector.kind)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_detector(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFileError("not a readable model file: %s" % exc)
    if not isinstance(doc, dict) or doc.get("magic") != MODEL_MAGIC:
        raise ModelFileError("file lacks the %r magic marker" % MODEL_MAGIC)
    version = doc.get("version")
    if version != MODEL_VERSION:
        raise ModelVersionError(
            "model file version %r, this build reads version %d" % (version, MODEL_VERSION)
        )
    window_spec = WindowSpec(doc["window"]["length"], doc["window"]["stride"])
    scaler = ScalerParams.from_dict(doc["scaler"])
    attributes = tuple(doc["attributes"])
    kind = doc.get("kind")
    if kind == "neural":
        config = NeuralDetectorConfig.from_dict(doc["config"])
        mlp = MLP(doc["sizes"], seed=0, task="classify")
        mlp.weights = [np.asarray(w, dtype=np.float64) for w in doc["weights"]]
        mlp.biases = [np.asarray(b, dtype=np.float64) for b in doc["biases"]]
        return NeuralDetector(
            mlp=mlp,
            scaler=scaler,
            window_spec=window_spec,
            attribute_names=attributes,
            config=config,
        )
    if kind == "stat":
        return StatDetector(
            config=StatDetectorConfig.from_dict(doc["config"]),
            stats=CleanStats.from_dict(doc["calibration"]),
            scaler=scaler,
            window_spec=window_spec,
            attribute_names=attributes,
        )
    raise ModelFileError("unknown detector kind %r" % kind)
