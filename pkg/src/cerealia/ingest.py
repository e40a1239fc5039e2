"""Getting weather data into the system.

Three paths: station CSV exports, a synthetic generator for controlled
experiments, and a polling client for stations that expose a JSON endpoint.
CSV parsing is defensive (row-level rejects with line numbers, a fatal
threshold on the reject ratio); the generator is exactly reproducible for a
given seed.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import CsvFormatError, EmptyInputError, RangeError, RejectRatioError
from .model import (
    AttributeSchema,
    WeatherSample,
    WeatherSeries,
    make_rng,
    parse_timestamp,
)

DEFAULT_TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S"
MAX_REJECT_RATIO = 0.05


@dataclass(frozen=True)
class CsvFormat:
    """Shape of a station CSV export.

    timestamp_column: header of the time column.
    timestamp_format: strptime pattern; instants are taken as UTC.
    delimiter: field separator.
    decimal_comma: station firmware that writes 12,3 instead of 12.3.
    """

    timestamp_column: str = "timestamp"
    timestamp_format: str = DEFAULT_TIMESTAMP_FORMAT
    delimiter: str = ","
    decimal_comma: bool = False


@dataclass(frozen=True)
class RejectedRow:
    line_number: int
    reason: str
    raw: str


@dataclass(frozen=True)
class CsvResult:
    series: WeatherSeries
    rejects: tuple[RejectedRow, ...]


def _parse_stamp(text: str, fmt: str) -> int:
    dt = datetime.strptime(text.strip(), fmt)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def parse_csv(
    path_or_buffer,
    schema: AttributeSchema,
    csv_format: CsvFormat | None = None,
    max_reject_ratio: float = MAX_REJECT_RATIO,
) -> CsvResult:
    """Parse a station CSV into a series, collecting row-level rejects.

    The header must contain the timestamp column and every schema attribute;
    a missing column is fatal. Malformed rows (bad timestamp, wrong field
    count, non-numeric value) are rejected individually with their 1-based
    line number. When rejects exceed max_reject_ratio of data rows the whole
    parse fails.
    """
    fmt = csv_format or CsvFormat()
    if hasattr(path_or_buffer, "read"):
        return _parse_csv_stream(path_or_buffer, schema, fmt, max_reject_ratio)
    with open(path_or_buffer, "r", newline="", encoding="utf-8") as fh:
        return _parse_csv_stream(fh, schema, fmt, max_reject_ratio)


def _parse_csv_stream(fh, schema, fmt, max_reject_ratio) -> CsvResult:
    reader = csv.reader(fh, delimiter=fmt.delimiter)
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyInputError("CSV has no header row")
    header = [h.strip() for h in header]
    if fmt.timestamp_column not in header:
        raise CsvFormatError(
            "timestamp column %r missing from header %r" % (fmt.timestamp_column, header)
        )
    try:
        col_index = {name: header.index(name) for name in schema.names}
    except ValueError:
        missing = [n for n in schema.names if n not in header]
        raise CsvFormatError("schema attributes missing from header: %r" % (missing,))
    ts_index = header.index(fmt.timestamp_column)

    timestamps: list[int] = []
    rows: list[list[float]] = []
    rejects: list[RejectedRow] = []
    n_rows = 0
    for line_number, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        n_rows += 1
        if len(row) != len(header):
            rejects.append(
                RejectedRow(
                    line_number,
                    "expected %d fields, got %d" % (len(header), len(row)),
                    ",".join(row),
                )
            )
            continue
        try:
            stamp = _parse_stamp(row[ts_index], fmt.timestamp_format)
        except ValueError:
            rejects.append(
                RejectedRow(line_number, "unparseable timestamp %r" % row[ts_index], ",".join(row))
            )
            continue
        try:
            values = []
            for name in schema.names:
                cell = row[col_index[name]].strip()
                if fmt.decimal_comma:
                    cell = cell.replace(",", ".")
                values.append(float(cell))
        except ValueError:
            rejects.append(
                RejectedRow(line_number, "non-numeric value for %r" % name, ",".join(row))
            )
            continue
        timestamps.append(stamp)
        rows.append(values)

    if n_rows == 0:
        raise EmptyInputError("CSV contains a header but no data rows")
    ratio = len(rejects) / n_rows
    if ratio > max_reject_ratio:
        raise RejectRatioError(
            "%d of %d rows rejected (%.1f%%), above the %.1f%% limit"
            % (len(rejects), n_rows, 100 * ratio, 100 * max_reject_ratio)
        )
    series = WeatherSeries(schema, np.array(timestamps, dtype=np.int64), np.array(rows))
    return CsvResult(series=series, rejects=tuple(rejects))


def write_csv(series: WeatherSeries, path_or_buffer, csv_format: CsvFormat | None = None) -> None:
    """Write a series as CSV. Floats use repr so a round trip is bit-equal."""
    fmt = csv_format or CsvFormat()
    if hasattr(path_or_buffer, "write"):
        _write_csv_stream(series, path_or_buffer, fmt)
    else:
        with open(path_or_buffer, "w", newline="", encoding="utf-8") as fh:
            _write_csv_stream(series, fh, fmt)


def _write_csv_stream(series: WeatherSeries, fh, fmt: CsvFormat) -> None:
    writer = csv.writer(fh, delimiter=fmt.delimiter)
    writer.writerow([fmt.timestamp_column, *series.schema.names])
    for i in range(len(series)):
        stamp = datetime.fromtimestamp(int(series.timestamps[i]), tz=timezone.utc)
        row = [stamp.strftime(fmt.timestamp_format)]
        for v in series.values[i]:
            row.append(repr(float(v)))
        writer.writerow(row)


@dataclass(frozen=True)
class AttributeSynth:
    """Generator parameters for one attribute: a daily and a yearly sine on
    top of a base level, plus white noise."""

    name: str
    unit: str
    base: float
    diurnal_amp: float
    seasonal_amp: float
    noise_std: float

    def __post_init__(self):
        if self.noise_std < 0:
            raise RangeError("noise_std must be non-negative")


@dataclass(frozen=True)
class SynthConfig:
    attributes: tuple[AttributeSynth, ...]
    sampling_interval: int = 300
    start: int = 1704067200  # 2024-01-01T00:00:00Z

    def schema(self) -> AttributeSchema:
        return AttributeSchema(
            attributes=tuple((a.name, a.unit) for a in self.attributes),
            sampling_interval=self.sampling_interval,
        )


def synth_generate(config: SynthConfig, n_samples: int, seed: int) -> WeatherSeries:
    """Deterministic synthetic weather.

    value(t) = base + diurnal_amp * sin(2*pi*hour/24)
                    + seasonal_amp * sin(2*pi*day/365)
                    + Normal(0, noise_std^2)

    The same (config, n_samples, seed) always yields a bit-identical series.
    """
    if n_samples <= 0:
        raise RangeError("n_samples must be positive, got %d" % n_samples)
    rng = make_rng(seed)
    ts = config.start + np.arange(n_samples, dtype=np.int64) * config.sampling_interval
    hours = (ts % 86400) / 3600.0
    days = (ts % (86400 * 365)) / 86400.0
    cols = []
    for attr in config.attributes:
        col = (
            attr.base
            + attr.diurnal_amp * np.sin(2 * np.pi * hours / 24.0)
            + attr.seasonal_amp * np.sin(2 * np.pi * days / 365.0)
        )
        if attr.noise_std > 0:
            col = col + rng.normal(0.0, attr.noise_std, size=n_samples)
        else:
            col = col + np.zeros(n_samples)
        cols.append(col)
    values = np.column_stack(cols)
    return WeatherSeries(config.schema(), ts, values)


@dataclass
class PollerHealth:
    """Mutable counters a long-lived poller exposes for monitoring."""

    polls: int = 0
    failures: int = 0
    duplicates_dropped: int = 0
    consecutive_failures: int = 0


def parse_poll_payload(payload: dict, schema: AttributeSchema) -> WeatherSample:
    """Decode one endpoint response: {"ts": ISO-8601, "values": {name: num}}."""
    if not isinstance(payload, dict) or "ts" not in payload or "values" not in payload:
        raise CsvFormatError("poll payload must have 'ts' and 'values' keys")
    stamp = parse_timestamp(str(payload["ts"]))
    raw = payload["values"]
    try:
        values = tuple(float(raw[name]) for name in schema.names)
    except (KeyError, TypeError, ValueError) as exc:
        raise CsvFormatError("poll payload values unusable: %s" % exc)
    return WeatherSample(timestamp=stamp, values=values)


def poll_remote(
    endpoint: str,
    interval: float,
    schema: AttributeSchema,
    max_samples: int | None = None,
    fetch: Callable[[str], dict] | None = None,
    sleep: Callable[[float], None] = time.sleep,
    backoff_base: float = 1.0,
    backoff_cap: float = 60.0,
    health: PollerHealth | None = None,
) -> Iterator[WeatherSample]:
    """Poll a JSON endpoint forever, yielding new samples in order.

    Failures never terminate the generator: each consecutive failure doubles
    the wait (backoff_base, capped at backoff_cap) and polling resumes.
    Samples whose timestamp does not advance past the last yielded one are
    dropped as duplicates. `fetch` and `sleep` are injectable for tests;
    the default fetch uses requests with a timeout.
    """
    if fetch is None:
        import requests

        def fetch(url: str) -> dict:
            resp = requests.get(url, timeout=30)
            resp.raise_for_status()
            return resp.json()

    health = health if health is not None else PollerHealth()
    last_ts: int | None = None
    yielded = 0
    while max_samples is None or yielded < max_samples:
        health.polls += 1
        try:
            payload = fetch(endpoint)
            sample = parse_poll_payload(payload, schema)
        except Exception:
            health.failures += 1
            health.consecutive_failures += 1
            wait = min(backoff_cap, backoff_base * (2.0 ** (health.consecutive_failures - 1)))
            sleep(wait)
            continue
        health.consecutive_failures = 0
        if last_ts is not None and sample.timestamp <= last_ts:
            health.duplicates_dropped += 1
        else:
            last_ts = sample.timestamp
            yielded += 1
            yield sample
        sleep(interval)
