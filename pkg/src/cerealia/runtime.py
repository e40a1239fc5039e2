"""Streaming runtime: the sliding-window consistency checker and the
multi-instance inference benchmark.

The checker consumes samples one at a time. The first window-length
samples are the warm-up and commit untouched; after that, every `stride`
new samples the trailing window is standardized with the detector's scaler
and classified. A non-clean window raises exactly one alert and, when an
imputer is attached, the not-yet-committed samples it covers are replaced
by forecasts before they reach the historical store.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Protocol, Sequence

import numpy as np

from .errors import RangeError, SchemaError
from .impute import ArImputer
from .metrics import regression_metrics
from .model import (
    NoiseClass,
    WeatherSample,
    WeatherSeries,
    format_timestamp,
    standardize_values,
)
from .storage import HistoryStore, update_history


@dataclass(frozen=True)
class Alert:
    """One non-clean window classification."""

    station: str
    label: NoiseClass
    start_ts: int
    end_ts: int
    window_start_index: int
    scores: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "station": self.station,
            "label": self.label.value,
            "start_ts": int(self.start_ts),
            "end_ts": int(self.end_ts),
            "start": format_timestamp(self.start_ts),
            "end": format_timestamp(self.end_ts),
            "window_start_index": int(self.window_start_index),
            "scores": [float(s) for s in self.scores],
        }


class AlertSink(Protocol):
    def deliver(self, alert: Alert) -> bool: ...


class FileAlertSink:
    """Appends one JSON line per alert; reports failure instead of raising."""

    def __init__(self, path):
        self.path = path

    def deliver(self, alert: Alert) -> bool:
        import json

        try:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(alert.to_dict()) + "\n")
            return True
        except OSError:
            return False


class HttpAlertSink:
    """POSTs alerts to an endpoint; any transport error counts as undelivered."""

    def __init__(self, endpoint: str, timeout: float = 10.0):
        self.endpoint = endpoint
        self.timeout = timeout

    def deliver(self, alert: Alert) -> bool:
        import requests

        try:
            resp = requests.post(self.endpoint, json=alert.to_dict(), timeout=self.timeout)
            return 200 <= resp.status_code < 300
        except Exception:
            return False


ALERT_BUFFER_CAP = 10_000


class AlertDispatcher:
    """Delivers alerts to a sink, buffering when the sink is absent or down.

    The buffer is bounded at 10,000 alerts; when full, the oldest alert is
    dropped and the drop counter advances. `drain` retries buffered alerts.
    """

    def __init__(self, sink: AlertSink | None = None, cap: int = ALERT_BUFFER_CAP):
        self.sink = sink
        self.cap = cap
        self.buffer: deque[Alert] = deque()
        self.dropped = 0
        self.delivered = 0

    def _buffer_alert(self, alert: Alert) -> None:
        if len(self.buffer) >= self.cap:
            self.buffer.popleft()
            self.dropped += 1
        self.buffer.append(alert)

    def dispatch(self, alert: Alert) -> None:
        if self.sink is None:
            self._buffer_alert(alert)
            return
        if self.buffer:
            self.drain()
        if self.buffer or not self.sink.deliver(alert):
            self._buffer_alert(alert)
        else:
            self.delivered += 1

    def drain(self) -> int:
        """Retry buffered alerts in order; stops at the first failure."""
        if self.sink is None:
            return 0
        sent = 0
        while self.buffer:
            if self.sink.deliver(self.buffer[0]):
                self.buffer.popleft()
                self.delivered += 1
                sent += 1
            else:
                break
        return sent


@dataclass(frozen=True)
class CheckerConfig:
    station: str = "station-0"
    stride: int = 1  # classify on every new sample by default
    impute_on_flag: bool = True

    def __post_init__(self):
        if self.stride < 1:
            raise RangeError("stride must be at least 1, got %d" % self.stride)


@dataclass(frozen=True)
class CheckResult:
    """Outcome of feeding one sample: samples committed downstream (possibly
    imputed) and the alert raised by the window that closed, if any."""

    committed: tuple[WeatherSample, ...]
    alert: Alert | None
    label: NoiseClass | None


class ConsistencyChecker:
    """Stateful sliding-window checker over one station stream."""

    def __init__(
        self,
        detector,
        imputer: ArImputer | None = None,
        store: HistoryStore | None = None,
        config: CheckerConfig | None = None,
        sink: AlertSink | None = None,
    ):
        self.detector = detector
        self.imputer = imputer
        self.store = store
        self.config = config or CheckerConfig()
        self.dispatcher = AlertDispatcher(sink)
        if imputer is not None and imputer.attribute_names != detector.attribute_names:
            raise SchemaError(
                "imputer attributes %r do not match detector %r"
                % (imputer.attribute_names, detector.attribute_names)
            )
        k = detector.window_spec.length
        n = len(detector.attribute_names)
        self._window = np.zeros((k, n))
        self._window_ts = np.zeros(k, dtype=np.int64)
        self._fill = 0
        self._since_classify = 0
        self._pending: list[WeatherSample] = []
        self._trusted: deque[np.ndarray] = deque(
            maxlen=imputer.config.lags if imputer is not None else 1
        )
        self.samples_seen = 0
        self.alerts_emitted = 0
        self.recent_alerts: deque[Alert] = deque(maxlen=ALERT_BUFFER_CAP)
        self._lock = threading.Lock()

    @property
    def window_fill(self) -> int:
        return self._fill

    def _commit(self, samples: Sequence[WeatherSample]) -> tuple[WeatherSample, ...]:
        for s in samples:
            self._trusted.append(np.asarray(s.values, dtype=np.float64))
        if self.store is not None and samples:
            update_history(self.store, samples)
        return tuple(samples)

    def _impute_pending(self) -> list[WeatherSample]:
        """Replace pending samples with forecasts from the trusted tail."""
        lags = self.imputer.config.lags
        if len(self._trusted) < lags:
            return list(self._pending)  # not enough history yet; pass through
        buffer = np.stack(list(self._trusted))
        out = []
        for s in self._pending:
            pred = self.imputer.predict_one(buffer, s.timestamp)
            out.append(WeatherSample(timestamp=s.timestamp, values=tuple(float(v) for v in pred)))
            buffer = np.vstack([buffer[1:], pred])
        return out

    def process(self, sample: WeatherSample) -> CheckResult:
        with self._lock:
            return self._process(sample)

    def _process(self, sample: WeatherSample) -> CheckResult:
        n = len(self.detector.attribute_names)
        if len(sample.values) != n:
            raise SchemaError(
                "sample has %d values, detector expects %d" % (len(sample.values), n)
            )
        k = self.detector.window_spec.length
        self.samples_seen += 1
        if self._fill < k:
            self._window[self._fill] = sample.values
            self._window_ts[self._fill] = sample.timestamp
            self._fill += 1
            if self._fill < k:
                # warm-up: commit untouched
                return CheckResult(self._commit([sample]), None, None)
            # window just filled: classify it, but only the newest sample is
            # still uncommitted
            self._pending = [sample]
            self._since_classify = 0
            return self._classify_and_commit()
        self._window[:-1] = self._window[1:]
        self._window[-1] = sample.values
        self._window_ts[:-1] = self._window_ts[1:]
        self._window_ts[-1] = sample.timestamp
        self._pending.append(sample)
        self._since_classify += 1
        if self._since_classify >= self.config.stride:
            self._since_classify = 0
            return self._classify_and_commit()
        return CheckResult((), None, None)

    def _classify_and_commit(self) -> CheckResult:
        standardized = standardize_values(self.detector.scaler, self._window)
        label, scores = self.detector.classify(standardized)
        alert = None
        if label is not NoiseClass.CLEAN:
            alert = Alert(
                station=self.config.station,
                label=label,
                start_ts=int(self._window_ts[0]),
                end_ts=int(self._window_ts[-1]),
                window_start_index=self.samples_seen - self.detector.window_spec.length,
                scores=tuple(float(s) for s in scores),
            )
            self.alerts_emitted += 1
            self.recent_alerts.append(alert)
            self.dispatcher.dispatch(alert)
            if self.imputer is not None and self.config.impute_on_flag:
                committed = self._commit(self._impute_pending())
            else:
                committed = self._commit(self._pending)
        else:
            committed = self._commit(self._pending)
        self._pending = []
        return CheckResult(committed, alert, label)

    def flush(self) -> tuple[WeatherSample, ...]:
        """Commit samples still pending (stream ended between classifications)."""
        with self._lock:
            committed = self._commit(self._pending)
            self._pending = []
            return committed

    def status(self) -> dict:
        return {
            "station": self.config.station,
            "samples_seen": self.samples_seen,
            "window_fill": self._fill,
            "window_length": self.detector.window_spec.length,
            "stride": self.config.stride,
            "alerts_emitted": self.alerts_emitted,
            "alerts_buffered": len(self.dispatcher.buffer),
            "alerts_dropped": self.dispatcher.dropped,
            "impute_on_flag": self.config.impute_on_flag and self.imputer is not None,
            "store_records": len(self.store) if self.store is not None else None,
        }


def run_checker(
    stream: Iterable[WeatherSample],
    detector,
    imputer: ArImputer | None = None,
    store: HistoryStore | None = None,
    config: CheckerConfig | None = None,
    sink: AlertSink | None = None,
) -> Iterator[CheckResult]:
    """Drive a checker over a finite or infinite sample stream."""
    checker = ConsistencyChecker(detector, imputer, store, config, sink)
    for sample in stream:
        yield checker.process(sample)
    tail = checker.flush()
    if tail:
        yield CheckResult(tail, None, None)


@dataclass(frozen=True)
class BenchReport:
    n_instances: int
    n_samples: int
    mean_latency_s: float
    p95_latency_s: float
    max_latency_s: float
    per_instance_mean_s: tuple[float, ...]
    memory_delta_bytes_per_instance: float
    identical_labels: bool
    wall_time_s: float
    seed: int

    def to_dict(self) -> dict:
        return {
            "n_instances": self.n_instances,
            "n_samples": self.n_samples,
            "mean_latency_s": self.mean_latency_s,
            "p95_latency_s": self.p95_latency_s,
            "max_latency_s": self.max_latency_s,
            "per_instance_mean_s": list(self.per_instance_mean_s),
            "memory_delta_bytes_per_instance": self.memory_delta_bytes_per_instance,
            "identical_labels": self.identical_labels,
            "wall_time_s": self.wall_time_s,
            "seed": self.seed,
        }


def _bench_windows(detector, n_windows: int, seed: int) -> np.ndarray:
    """Deterministic standardized windows drawn from the shipped corpus."""
    from .corpus import corpus_series

    k = detector.window_spec.length
    series = corpus_series(seed, n_samples=k * n_windows)
    values = series.values[: k * n_windows].reshape(n_windows, k, -1)
    return standardize_values(detector.scaler, values)


def bench_inference(
    detector,
    n_samples: int = 100,
    n_instances: int = 1,
    seed: int = 0,
    clone: Callable[[], object] | None = None,
) -> BenchReport:
    """Measure per-classification latency under concurrent instances.

    Every instance gets its own detector copy and classifies the same
    deterministic window stream; each classify call is timed with the
    monotonic clock. Memory is the resident-set growth from just before the
    instances are created to after the run, divided by instance count.
    """
    import copy

    import psutil

    if n_samples < 1 or n_instances < 1:
        raise RangeError("n_samples and n_instances must be at least 1")
    n_windows = min(n_samples, 100)
    windows = _bench_windows(detector, n_windows, seed)
    detector.classify(windows[0])  # warm numpy paths before the baseline
    process = psutil.Process()
    rss_before = process.memory_info().rss

    make_instance = clone if clone is not None else (lambda: copy.deepcopy(detector))
    instances = [make_instance() for _ in range(n_instances)]
    latencies = [np.zeros(n_samples) for _ in range(n_instances)]
    labels: list[list[str]] = [[] for _ in range(n_instances)]
    barrier = threading.Barrier(n_instances)

    def work(idx: int) -> None:
        inst = instances[idx]
        lat = latencies[idx]
        lab = labels[idx]
        barrier.wait()
        for i in range(n_samples):
            w = windows[i % n_windows]
            t0 = time.perf_counter()
            label, _ = inst.classify(w)
            lat[i] = time.perf_counter() - t0
            lab.append(label.value)

    t_start = time.perf_counter()
    threads = [threading.Thread(target=work, args=(i,)) for i in range(n_instances)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    wall = time.perf_counter() - t_start
    rss_after = process.memory_info().rss

    all_lat = np.concatenate(latencies)
    identical = all(lab == labels[0] for lab in labels)
    return BenchReport(
        n_instances=n_instances,
        n_samples=n_samples,
        mean_latency_s=float(all_lat.mean()),
        p95_latency_s=float(np.percentile(all_lat, 95)),
        max_latency_s=float(all_lat.max()),
        per_instance_mean_s=tuple(float(l.mean()) for l in latencies),
        memory_delta_bytes_per_instance=float(max(0, rss_after - rss_before) / n_instances),
        identical_labels=identical,
        wall_time_s=wall,
        seed=seed,
    )
