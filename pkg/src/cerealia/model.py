"""Core data model for weather streams.

Time is kept as integer epoch seconds, UTC. Series are stored column wise
(one float64 matrix, one int64 timestamp vector) so that windowing and
standardization are plain numpy slices; `WeatherSample` objects are produced
on demand at the edges of the system (CSV ingest, HTTP ingest, pollers).

All stochastic code in this package draws from one generator family, PCG64,
seeded explicitly with a 64-bit integer. `make_rng` and `mix_seed` below are
the only sanctioned ways to construct one.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import EmptyInputError, RangeError, SchemaError

_SEED_MASK = (1 << 64) - 1


def make_rng(seed: int) -> np.random.Generator:
    """Return the package-wide PRNG (PCG64) for an explicit 64-bit seed."""
    return np.random.Generator(np.random.PCG64(int(seed) & _SEED_MASK))


def mix_seed(seed: int, index: int) -> int:
    """Derive a per-item seed from a base seed and an item index (xor mix)."""
    return (int(seed) ^ int(index)) & _SEED_MASK


class NoiseClass(Enum):
    """Labels a window can carry: untouched, or one of four fault archetypes."""

    CLEAN = "clean"
    RANDOM = "random"
    MALFUNCTION = "malfunction"
    DRIFT = "drift"
    BIAS = "bias"


CLASS_ORDER: tuple[NoiseClass, ...] = (
    NoiseClass.CLEAN,
    NoiseClass.RANDOM,
    NoiseClass.MALFUNCTION,
    NoiseClass.DRIFT,
    NoiseClass.BIAS,
)
FAULT_CLASSES: tuple[NoiseClass, ...] = CLASS_ORDER[1:]


def class_index(label: NoiseClass) -> int:
    return CLASS_ORDER.index(label)


@dataclass(frozen=True)
class AttributeSchema:
    """Names, units and sampling cadence of one station's stream.

    attributes: ordered (name, unit) pairs; order defines column order.
    sampling_interval: seconds between consecutive samples.
    """

    attributes: tuple[tuple[str, str], ...]
    sampling_interval: int

    def __post_init__(self):
        if not self.attributes:
            raise SchemaError("schema needs at least one attribute")
        names = [name for name, _ in self.attributes]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate attribute names: %r" % (names,))
        if any(not n for n in names):
            raise SchemaError("attribute names must be non-empty")
        if self.sampling_interval <= 0:
            raise SchemaError(
                "sampling_interval must be positive, got %r" % (self.sampling_interval,)
            )

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.attributes)

    @property
    def arity(self) -> int:
        return len(self.attributes)

    def index_of(self, name: str) -> int:
        for i, (n, _) in enumerate(self.attributes):
            if n == name:
                return i
        raise SchemaError("unknown attribute %r (have %r)" % (name, self.names))

    def to_dict(self) -> dict:
        return {
            "attributes": [[n, u] for n, u in self.attributes],
            "sampling_interval": self.sampling_interval,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AttributeSchema":
        return cls(
            attributes=tuple((str(n), str(u)) for n, u in d["attributes"]),
            sampling_interval=int(d["sampling_interval"]),
        )


@dataclass(frozen=True)
class WeatherSample:
    """One timestamped reading: epoch seconds plus one value per attribute."""

    timestamp: int
    values: tuple[float, ...]

    @property
    def datetime(self) -> datetime:
        return datetime.fromtimestamp(self.timestamp, tz=timezone.utc)


def parse_timestamp(text: str) -> int:
    """Parse an ISO-8601 instant (assumed UTC when naive) to epoch seconds."""
    dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def format_timestamp(epoch: int) -> str:
    return datetime.fromtimestamp(int(epoch), tz=timezone.utc).strftime(
        "%Y-%m-%dT%H:%M:%SZ"
    )


class WeatherSeries:
    """A time-ordered sequence of samples under one schema.

    Internally columnar: `timestamps` is int64 (m,), `values` float64 (m, n).
    Both arrays are frozen (read only); derive modified copies with
    `replace_values`. Construction does not validate content, that is what
    `validate_series` is for, but the arrays must at least be rectangular.
    """

    __slots__ = ("schema", "timestamps", "values", "_rows")

    def __init__(self, schema: AttributeSchema, timestamps, values, _rows=None):
        ts = np.asarray(timestamps, dtype=np.int64)
        vals = np.asarray(values, dtype=np.float64)
        if ts.ndim != 1:
            raise SchemaError("timestamps must be one-dimensional")
        if vals.ndim != 2 or vals.shape[0] != ts.shape[0]:
            raise SchemaError(
                "values must be (m, n) with m == len(timestamps), got %r" % (vals.shape,)
            )
        ts = ts.copy()
        vals = vals.copy()
        ts.flags.writeable = False
        vals.flags.writeable = False
        self.schema = schema
        self.timestamps = ts
        self.values = vals
        # Kept only when built from ragged rows so validation can report arity.
        self._rows = _rows

    @classmethod
    def from_samples(
        cls, schema: AttributeSchema, samples: Sequence[WeatherSample]
    ) -> "WeatherSeries":
        n = schema.arity
        ts = np.array([s.timestamp for s in samples], dtype=np.int64)
        ragged = any(len(s.values) != n for s in samples)
        vals = np.full((len(samples), n), np.nan)
        for i, s in enumerate(samples):
            row = np.asarray(s.values, dtype=np.float64)[:n]
            vals[i, : len(row)] = row
        rows = tuple(samples) if ragged else None
        return cls(schema, ts, vals, _rows=rows)

    def __len__(self) -> int:
        return int(self.timestamps.shape[0])

    def sample(self, i: int) -> WeatherSample:
        return WeatherSample(
            timestamp=int(self.timestamps[i]), values=tuple(self.values[i])
        )

    def iter_samples(self) -> Iterator[WeatherSample]:
        for i in range(len(self)):
            yield self.sample(i)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.schema.index_of(name)]

    def replace_values(self, new_values: np.ndarray) -> "WeatherSeries":
        return WeatherSeries(self.schema, self.timestamps, new_values)

    def slice(self, start: int, stop: int) -> "WeatherSeries":
        return WeatherSeries(
            self.schema, self.timestamps[start:stop], self.values[start:stop]
        )

    def fingerprint(self) -> str:
        """Content hash used as a compact series identity in reports."""
        h = hashlib.sha256()
        h.update(self.timestamps.tobytes())
        h.update(np.ascontiguousarray(self.values).tobytes())
        h.update(repr(self.schema.attributes).encode())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class Violation:
    index: int
    rule: str
    detail: str

    def __str__(self) -> str:
        return "%s @%d: %s" % (self.rule, self.index, self.detail)


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_series(series: WeatherSeries) -> ValidationReport:
    """Check ordering, arity and finiteness; report every violation found."""
    out: list[Violation] = []
    n = series.schema.arity
    ts = series.timestamps
    for i in range(1, len(series)):
        if ts[i] <= ts[i - 1]:
            out.append(
                Violation(
                    i,
                    "non-increasing timestamp",
                    "%d follows %d" % (ts[i], ts[i - 1]),
                )
            )
    if series._rows is not None:
        for i, s in enumerate(series._rows):
            if len(s.values) != n:
                out.append(
                    Violation(
                        i,
                        "arity mismatch",
                        "expected %d values, got %d" % (n, len(s.values)),
                    )
                )
            else:
                for v in s.values:
                    if not np.isfinite(v):
                        out.append(Violation(i, "non-finite value", repr(v)))
                        break
    else:
        bad = ~np.isfinite(series.values)
        for i in np.nonzero(bad.any(axis=1))[0]:
            j = int(np.nonzero(bad[i])[0][0])
            out.append(
                Violation(
                    int(i),
                    "non-finite value",
                    "attribute %r" % (series.schema.names[j],),
                )
            )
    out.sort(key=lambda v: v.index)
    return ValidationReport(tuple(out))


@dataclass(frozen=True)
class WindowSpec:
    """Sliding-window geometry: length in samples, stride between starts."""

    length: int = 48
    stride: int = 24

    def __post_init__(self):
        if self.length <= 0:
            raise RangeError("window length must be positive, got %d" % self.length)
        if self.stride <= 0:
            raise RangeError("window stride must be positive, got %d" % self.stride)

    def count(self, n_samples: int) -> int:
        if n_samples < self.length:
            return 0
        return (n_samples - self.length) // self.stride + 1


@dataclass(frozen=True)
class Window:
    """One window: start index into the source series plus array views."""

    start: int
    timestamps: np.ndarray
    values: np.ndarray

    @property
    def end(self) -> int:
        return self.start + self.values.shape[0]


def window_iter(series: WeatherSeries, spec: WindowSpec) -> Iterator[Window]:
    """Yield every full window; count is (m - length) // stride + 1."""
    m = len(series)
    if m < spec.length:
        raise EmptyInputError(
            "series has %d samples, need at least %d for one window"
            % (m, spec.length)
        )
    for start in range(0, m - spec.length + 1, spec.stride):
        yield Window(
            start=start,
            timestamps=series.timestamps[start : start + spec.length],
            values=series.values[start : start + spec.length],
        )


STD_FLOOR = 1e-8


@dataclass(frozen=True)
class ScalerParams:
    """Per-attribute standardization parameters (population statistics)."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        if mean.shape != std.shape or mean.ndim != 1:
            raise SchemaError("scaler mean/std must be matching vectors")
        if np.any(std < STD_FLOOR):
            raise RangeError("scaler std below floor %g" % STD_FLOOR)
        mean.flags.writeable = False
        std.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerParams":
        return cls(np.asarray(d["mean"]), np.asarray(d["std"]))


def scaler_from_values(values: np.ndarray) -> ScalerParams:
    """Fit per-column mean and population stddev; stddev floored at 1e-8."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise EmptyInputError("cannot fit a scaler on zero samples")
    mean = values.mean(axis=0)
    std = values.std(axis=0)  # population form, ddof=0
    std = np.maximum(std, STD_FLOOR)
    return ScalerParams(mean, std)


def fit_scaler(series: WeatherSeries) -> ScalerParams:
    if len(series) == 0:
        raise EmptyInputError("cannot fit a scaler on an empty series")
    return scaler_from_values(series.values)


def standardize_values(params: ScalerParams, values: np.ndarray) -> np.ndarray:
    return (np.asarray(values, dtype=np.float64) - params.mean) / params.std


def destandardize_values(params: ScalerParams, values: np.ndarray) -> np.ndarray:
    return np.asarray(values, dtype=np.float64) * params.std + params.mean


def apply_scaler(params: ScalerParams, series: WeatherSeries) -> WeatherSeries:
    if params.mean.shape[0] != series.schema.arity:
        raise SchemaError(
            "scaler fitted for %d attributes, series has %d"
            % (params.mean.shape[0], series.schema.arity)
        )
    return series.replace_values(standardize_values(params, series.values))


def inverse_scaler(params: ScalerParams, series: WeatherSeries) -> WeatherSeries:
    if params.mean.shape[0] != series.schema.arity:
        raise SchemaError(
            "scaler fitted for %d attributes, series has %d"
            % (params.mean.shape[0], series.schema.arity)
        )
    return series.replace_values(destandardize_values(params, series.values))
