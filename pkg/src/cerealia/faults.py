"""Sensor fault injection.

Four archetypes, each applied to one attribute of a series:

random       isolated multiplicative spikes. Each index is faulted
             independently with probability `density`; a faulted value
             becomes original * (1 + f) with f uniform over factor_range,
             re-drawn while |f| < factor_deadband so spikes stay visible.
malfunction  additive noise over a window: value + Normal(0, sigma^2) *
             intensity, where sigma is the population stddev of the
             original values inside the window.
drift        a constant offset over a window: delta = first in-window value
             times an intensity drawn once, uniform over intensity_range
             excluding (-deadband, +deadband), plus per-point noise
             noise_intensity * Normal(1, (3*sigma)^2).
bias         deterministic level replacement over a window: every value
             becomes mu * factor with mu the in-window mean of the
             original values.

Injectors never modify their input; they return a new series plus a boolean
mask of touched indices. `build_labeled_dataset` turns a clean series into
standardized training windows with per-window fault labels.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptyInputError, RangeError, SchemaError
from .model import (
    CLASS_ORDER,
    FAULT_CLASSES,
    NoiseClass,
    ScalerParams,
    WeatherSeries,
    WindowSpec,
    class_index,
    make_rng,
    mix_seed,
    scaler_from_values,
    window_iter,
)

MAX_REJECTION_DRAWS = 10_000


def _check_window(window: tuple[int, int], length: int) -> tuple[int, int]:
    start, end = int(window[0]), int(window[1])
    if not (0 <= start < end <= length):
        raise RangeError(
            "fault window [%d, %d) does not fit a length-%d series" % (start, end, length)
        )
    return start, end


def _uniform_outside_deadband(
    rng: np.random.Generator, low: float, high: float, deadband: float, size: int | None = None
) -> np.ndarray | float:
    """Uniform draw(s) over [low, high] re-drawn while |x| < deadband."""
    if low > high:
        raise RangeError("range low %g above high %g" % (low, high))
    if deadband > 0 and -deadband < low and high < deadband:
        raise RangeError(
            "range [%g, %g] lies entirely inside the deadband (+-%g)" % (low, high, deadband)
        )
    scalar = size is None
    n = 1 if scalar else int(size)
    out = rng.uniform(low, high, size=n)
    for _ in range(MAX_REJECTION_DRAWS):
        inside = np.abs(out) < deadband
        if not inside.any():
            break
        out[inside] = rng.uniform(low, high, size=int(inside.sum()))
    else:
        raise RangeError("could not draw outside the deadband; range barely overlaps it")
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class RandomFaultSpec:
    """Spike parameters. window=None applies across the whole series."""

    density: float
    factor_range: tuple[float, float] = (-1.5, 1.5)
    factor_deadband: float = 0.25
    seed: int = 0
    window: tuple[int, int] | None = None

    def __post_init__(self):
        if not (0.0 <= self.density <= 1.0):
            raise RangeError("density must be in [0, 1], got %g" % self.density)

    def params(self) -> dict:
        return {
            "density": self.density,
            "factor_range": list(self.factor_range),
            "factor_deadband": self.factor_deadband,
        }


@dataclass(frozen=True)
class MalfunctionFaultSpec:
    window: tuple[int, int]
    intensity: float = 4.5
    seed: int = 0

    def params(self) -> dict:
        return {"intensity": self.intensity}


@dataclass(frozen=True)
class DriftFaultSpec:
    window: tuple[int, int]
    intensity_range: tuple[float, float] = (-4.0, 4.0)
    intensity_deadband: float = 0.5
    noise_intensity: float = 1.0
    seed: int = 0

    def params(self) -> dict:
        return {
            "intensity_range": list(self.intensity_range),
            "intensity_deadband": self.intensity_deadband,
            "noise_intensity": self.noise_intensity,
        }


@dataclass(frozen=True)
class BiasFaultSpec:
    window: tuple[int, int]
    factor: float = 2.0

    def params(self) -> dict:
        return {"factor": self.factor}


def _random_values(
    x: np.ndarray, spec: RandomFaultSpec, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = spec.factor_range
    out = x.copy()
    mask = np.zeros(x.shape[0], dtype=bool)
    if spec.window is None:
        lo_i, hi_i = 0, x.shape[0]
    else:
        lo_i, hi_i = _check_window(spec.window, x.shape[0])
    hits = rng.random(hi_i - lo_i) < spec.density
    idx = np.nonzero(hits)[0] + lo_i
    if idx.size:
        factors = _uniform_outside_deadband(rng, lo, hi, spec.factor_deadband, size=idx.size)
        out[idx] = x[idx] * (1.0 + factors)
        mask[idx] = True
    return out, mask


def _malfunction_values(
    x: np.ndarray, spec: MalfunctionFaultSpec, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    start, end = _check_window(spec.window, x.shape[0])
    sigma = float(np.std(x[start:end]))  # population stddev of originals
    out = x.copy()
    noise = rng.normal(0.0, sigma, size=end - start) * spec.intensity if sigma > 0 else np.zeros(end - start)
    out[start:end] = x[start:end] + noise
    mask = np.zeros(x.shape[0], dtype=bool)
    mask[start:end] = True
    return out, mask


def _drift_values(
    x: np.ndarray, spec: DriftFaultSpec, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    start, end = _check_window(spec.window, x.shape[0])
    lo, hi = spec.intensity_range
    intensity = _uniform_outside_deadband(rng, lo, hi, spec.intensity_deadband)
    delta = float(x[start]) * intensity
    sigma = float(np.std(x[start:end]))
    if spec.noise_intensity != 0.0:
        noise = spec.noise_intensity * rng.normal(1.0, 3.0 * sigma, size=end - start)
    else:
        noise = np.zeros(end - start)
    out = x.copy()
    out[start:end] = x[start:end] + delta + noise
    mask = np.zeros(x.shape[0], dtype=bool)
    mask[start:end] = True
    return out, mask


def _bias_values(x: np.ndarray, spec: BiasFaultSpec) -> tuple[np.ndarray, np.ndarray]:
    start, end = _check_window(spec.window, x.shape[0])
    mu = float(np.mean(x[start:end]))
    if spec.factor == 1.0:
        warnings.warn(
            "bias factor 1.0 flattens the window to its mean without shifting it",
            stacklevel=3,
        )
    out = x.copy()
    out[start:end] = mu * spec.factor
    mask = np.zeros(x.shape[0], dtype=bool)
    mask[start:end] = True
    return out, mask


def _apply_to_attribute(series: WeatherSeries, attribute: str, fn) -> tuple[WeatherSeries, np.ndarray]:
    j = series.schema.index_of(attribute)
    new_col, mask = fn(series.values[:, j].copy())
    new_values = series.values.copy()
    new_values[:, j] = new_col
    return series.replace_values(new_values), mask


def inject_random(
    series: WeatherSeries, spec: RandomFaultSpec, attribute: str
) -> tuple[WeatherSeries, np.ndarray]:
    rng = make_rng(spec.seed)
    return _apply_to_attribute(series, attribute, lambda x: _random_values(x, spec, rng))


def inject_malfunction(
    series: WeatherSeries, spec: MalfunctionFaultSpec, attribute: str
) -> tuple[WeatherSeries, np.ndarray]:
    rng = make_rng(spec.seed)
    return _apply_to_attribute(series, attribute, lambda x: _malfunction_values(x, spec, rng))


def inject_drift(
    series: WeatherSeries, spec: DriftFaultSpec, attribute: str
) -> tuple[WeatherSeries, np.ndarray]:
    rng = make_rng(spec.seed)
    return _apply_to_attribute(series, attribute, lambda x: _drift_values(x, spec, rng))


def inject_bias(
    series: WeatherSeries, spec: BiasFaultSpec, attribute: str
) -> tuple[WeatherSeries, np.ndarray]:
    return _apply_to_attribute(series, attribute, lambda x: _bias_values(x, spec))


@dataclass(frozen=True)
class FaultRecord:
    """Everything needed to replay one injected fault bit-exactly."""

    window_index: int
    label: str
    attribute: str
    segment: tuple[int, int]
    seed: int
    params: dict

    def to_dict(self) -> dict:
        return {
            "window_index": self.window_index,
            "class": self.label,
            "attribute": self.attribute,
            "window": [self.segment[0], self.segment[1]],
            "seed": self.seed,
            "params": self.params,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FaultRecord":
        return cls(
            window_index=int(d["window_index"]),
            label=str(d["class"]),
            attribute=str(d["attribute"]),
            segment=(int(d["window"][0]), int(d["window"][1])),
            seed=int(d["seed"]),
            params=dict(d["params"]),
        )


@dataclass(frozen=True)
class DatasetConfig:
    """Controls dataset corruption.

    pct_inconsistent: share of windows to fault, in percent of all windows.
    fault_attribute: fix the faulted attribute, or None to draw one
        uniformly per faulty window.
    random_density: spike probability used inside random-fault windows
        (re-drawn if a draw produces zero spikes, so every window labeled
        random really contains at least one).
    fault_len_range: segment length bounds for windowed faults; capped at
        the window length. The low end deliberately permits short, weak
        footprints so detection quality keeps depending on how many labeled
        fault examples training saw.
    """

    pct_inconsistent: float
    window: WindowSpec = WindowSpec(48, 24)
    seed: int = 0
    fault_attribute: str | None = None
    random_density: float = 0.1
    fault_len_range: tuple[int, int] = (8, 96)

    def __post_init__(self):
        if not (0.0 <= self.pct_inconsistent <= 100.0):
            raise RangeError(
                "pct_inconsistent must be in [0, 100], got %g" % self.pct_inconsistent
            )
        if not (0.0 < self.random_density <= 1.0):
            raise RangeError("random_density must be in (0, 1]")
        lo, hi = self.fault_len_range
        if lo < 2 or hi < lo:
            raise RangeError("fault_len_range must satisfy 2 <= low <= high")

    def to_dict(self) -> dict:
        return {
            "pct_inconsistent": self.pct_inconsistent,
            "window": {"length": self.window.length, "stride": self.window.stride},
            "seed": self.seed,
            "fault_attribute": self.fault_attribute,
            "random_density": self.random_density,
            "fault_len_range": list(self.fault_len_range),
        }


@dataclass(frozen=True)
class LabeledDataset:
    """Standardized windows with per-window labels.

    windows: (W, k, n) float64, standardized with `scaler`.
    labels: (W,) int64 indices into CLASS_ORDER.
    window_ids: (W,) int64 ordinals of the source windows; training code
        treats these as the canonical ordering key.
    """

    windows: np.ndarray
    labels: np.ndarray
    window_ids: np.ndarray
    scaler: ScalerParams
    window_spec: WindowSpec
    attribute_names: tuple[str, ...]
    provenance: dict
    manifest: tuple[FaultRecord, ...]

    def __len__(self) -> int:
        return int(self.windows.shape[0])

    def label_of(self, i: int) -> NoiseClass:
        return CLASS_ORDER[int(self.labels[i])]

    def class_counts(self) -> dict[str, int]:
        out = {c.value: 0 for c in CLASS_ORDER}
        for idx in self.labels:
            out[CLASS_ORDER[int(idx)].value] += 1
        return out


def _corrupt_window_values(
    values: np.ndarray,
    label: NoiseClass,
    attr_index: int,
    segment: tuple[int, int],
    inject_seed: int,
    cfg: DatasetConfig,
) -> tuple[np.ndarray, int]:
    """Apply one fault class to a window copy.

    Returns the corrupted copy and the seed that regenerates it in a single
    draw through the matching public injector; the manifest stores that
    seed, so replay never depends on this function's retry loop."""
    x = values[:, attr_index].copy()
    used_seed = inject_seed
    if label is NoiseClass.RANDOM:
        # a low density can leave a window spike-free; re-derive the seed
        # until one lands so every labeled window carries its fault
        for attempt in range(MAX_REJECTION_DRAWS):
            used_seed = mix_seed(inject_seed, attempt)
            spec = RandomFaultSpec(
                density=cfg.random_density, seed=used_seed, window=segment
            )
            new_x, mask = _random_values(x, spec, make_rng(used_seed))
            if mask.any():
                break
        else:
            raise RangeError("random fault never produced a spike; density too low")
        x = new_x
    elif label is NoiseClass.MALFUNCTION:
        x, _ = _malfunction_values(x, MalfunctionFaultSpec(window=segment), make_rng(inject_seed))
    elif label is NoiseClass.DRIFT:
        x, _ = _drift_values(x, DriftFaultSpec(window=segment), make_rng(inject_seed))
    elif label is NoiseClass.BIAS:
        x, _ = _bias_values(x, BiasFaultSpec(window=segment))
    else:
        raise RangeError("cannot corrupt with label %r" % label)
    out = values.copy()
    out[:, attr_index] = x
    return out, used_seed


def build_labeled_dataset(series: WeatherSeries, config: DatasetConfig) -> LabeledDataset:
    """Cut a clean series into windows and corrupt a controlled share.

    Exactly round(pct/100 * W) windows receive a fault, split equally
    across the four fault classes (remainder assigned deterministically).
    Faults are applied to per-window copies, so overlapping clean windows
    are never contaminated. The scaler is fitted on clean windows only and
    applied to every window. The same (series, config) is bit-reproducible.
    """
    spec = config.window
    windows = list(window_iter(series, spec))
    W = len(windows)
    if W < 100:
        raise EmptyInputError(
            "series yields %d windows, need at least 100 for a dataset" % W
        )
    names = series.schema.names
    if config.fault_attribute is not None and config.fault_attribute not in names:
        raise SchemaError("fault_attribute %r not in schema %r" % (config.fault_attribute, names))

    rng = make_rng(config.seed)
    n_faulty = int(round(config.pct_inconsistent / 100.0 * W))
    selected = np.sort(rng.choice(W, size=n_faulty, replace=False)) if n_faulty else np.array([], dtype=int)
    class_perm = rng.permutation(n_faulty) if n_faulty else np.array([], dtype=int)
    label_by_window: dict[int, NoiseClass] = {
        int(w): FAULT_CLASSES[int(class_perm[i]) % len(FAULT_CLASSES)]
        for i, w in enumerate(selected)
    }

    k = spec.length
    raw = np.stack([w.values for w in windows])  # (W, k, n) copies via stack
    labels = np.zeros(W, dtype=np.int64)
    records: list[FaultRecord] = []
    len_lo, len_hi = config.fault_len_range
    len_lo = min(len_lo, k)
    len_hi = min(len_hi, k)

    for w_idx, label in sorted(label_by_window.items()):
        rng_w = make_rng(mix_seed(config.seed, w_idx))
        if config.fault_attribute is None:
            attr_index = int(rng_w.integers(0, len(names)))
        else:
            attr_index = names.index(config.fault_attribute)
        if label is NoiseClass.RANDOM:
            segment = (0, k)  # spikes may land anywhere in the window
        else:
            seg_len = int(rng_w.integers(len_lo, len_hi + 1))
            seg_start = int(rng_w.integers(0, k - seg_len + 1))
            segment = (seg_start, seg_start + seg_len)
        inject_seed = int(rng_w.integers(0, 2**63))
        raw[w_idx], used_seed = _corrupt_window_values(
            raw[w_idx], label, attr_index, segment, inject_seed, config
        )
        labels[w_idx] = class_index(label)
        records.append(
            FaultRecord(
                window_index=w_idx,
                label=label.value,
                attribute=names[attr_index],
                segment=segment,
                seed=used_seed,
                params={
                    "random_density": config.random_density,
                }
                if label is NoiseClass.RANDOM
                else {},
            )
        )

    clean_mask = labels == 0
    clean_values = raw[clean_mask].reshape(-1, len(names))
    scaler = scaler_from_values(clean_values)
    standardized = (raw - scaler.mean) / scaler.std

    provenance = {
        "series_id": series.fingerprint(),
        "seed": config.seed,
        "pct_inconsistent": config.pct_inconsistent,
    }
    return LabeledDataset(
        windows=standardized,
        labels=labels,
        window_ids=np.arange(W, dtype=np.int64),
        scaler=scaler,
        window_spec=spec,
        attribute_names=tuple(names),
        provenance=provenance,
        manifest=tuple(records),
    )


def save_manifest(path, records: Sequence[FaultRecord], header: dict | None = None) -> None:
    doc = {"faults": [r.to_dict() for r in records]}
    if header:
        doc.update(header)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_manifest(path) -> tuple[dict, tuple[FaultRecord, ...]]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    records = tuple(FaultRecord.from_dict(d) for d in doc.get("faults", []))
    header = {key: val for key, val in doc.items() if key != "faults"}
    return header, records


def save_dataset(path, dataset: LabeledDataset) -> None:
    meta = {
        "scaler": dataset.scaler.to_dict(),
        "window": {"length": dataset.window_spec.length, "stride": dataset.window_spec.stride},
        "attribute_names": list(dataset.attribute_names),
        "provenance": dataset.provenance,
        "manifest": [r.to_dict() for r in dataset.manifest],
    }
    np.savez_compressed(
        path,
        windows=dataset.windows,
        labels=dataset.labels,
        window_ids=dataset.window_ids,
        meta=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8),
    )


def load_dataset(path) -> LabeledDataset:
    with np.load(path, allow_pickle=False) as archive:
        meta = json.loads(archive["meta"].tobytes().decode("utf-8"))
        windows = archive["windows"]
        labels = archive["labels"]
        window_ids = archive["window_ids"]
    return LabeledDataset(
        windows=windows,
        labels=labels,
        window_ids=window_ids,
        scaler=ScalerParams.from_dict(meta["scaler"]),
        window_spec=WindowSpec(meta["window"]["length"], meta["window"]["stride"]),
        attribute_names=tuple(meta["attribute_names"]),
        provenance=meta["provenance"],
        manifest=tuple(FaultRecord.from_dict(d) for d in meta["manifest"]),
    )
