"""Append-only historical store.

One newline-delimited JSON record per sample, written append-only with an
fsync before the side index is touched, so a crash can only ever lose the
tail record that was in flight, never corrupt what was already stored. The
side index (count and byte offset) makes reopening cheap; when it is stale
or missing the data file itself is the authority and is rescanned. A torn
trailing line (no newline, or unparseable) is ignored on recovery.
"""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path
from typing import Iterable, Iterator

from .errors import StorageError
from .model import WeatherSample

DATA_DIR_ENV = "CEREALIA_DATA_DIR"


def default_data_dir() -> Path:
    """Store location: $CEREALIA_DATA_DIR, else ./cerealia-data."""
    env = os.environ.get(DATA_DIR_ENV)
    return Path(env) if env else Path("cerealia-data")


def _encode(sample: WeatherSample) -> bytes:
    doc = {"ts": int(sample.timestamp), "values": [float(v) for v in sample.values]}
    return (json.dumps(doc, separators=(",", ":")) + "\n").encode("utf-8")


def _decode(line: bytes) -> WeatherSample:
    doc = json.loads(line.decode("utf-8"))
    return WeatherSample(timestamp=int(doc["ts"]), values=tuple(float(v) for v in doc["values"]))


class HistoryStore:
    """Thread-safe append-only sample log with crash-safe recovery."""

    def __init__(self, path):
        self.path = Path(path)
        self.index_path = self.path.with_suffix(self.path.suffix + ".idx")
        self._lock = threading.Lock()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._count, self._offset = self._recover()
        try:
            self._fh = open(self.path, "ab")
        except OSError as exc:
            raise StorageError("cannot open store %s: %s" % (self.path, exc))

    def _read_index(self) -> tuple[int, int] | None:
        try:
            with open(self.index_path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
            count, offset = int(doc["count"]), int(doc["bytes"])
            if count < 0 or offset < 0:
                return None
            return count, offset
        except (OSError, ValueError, KeyError):
            return None

    def _recover(self) -> tuple[int, int]:
        """Count whole records; never trust a torn tail."""
        if not self.path.exists():
            return 0, 0
        size = self.path.stat().st_size
        indexed = self._read_index()
        if indexed is not None and indexed[1] <= size:
            count, offset = indexed
        else:
            count, offset = 0, 0
        try:
            with open(self.path, "rb") as fh:
                fh.seek(offset)
                while True:
                    line = fh.readline()
                    if not line:
                        break
                    if not line.endswith(b"\n"):
                        break  # torn tail from a crash mid-append
                    try:
                        _decode(line)
                    except (ValueError, KeyError):
                        break  # damaged tail; everything before it stands
                    count += 1
                    offset += len(line)
        except OSError as exc:
            raise StorageError("cannot recover store %s: %s" % (self.path, exc))
        if offset < size:
            # Drop the torn tail now, otherwise the append handle would write
            # new records after it and leave garbage in the middle of the log.
            try:
                with open(self.path, "r+b") as fh:
                    fh.truncate(offset)
            except OSError as exc:
                raise StorageError("cannot truncate store %s: %s" % (self.path, exc))
        self._write_index(count, offset)
        return count, offset

    def _write_index(self, count: int, offset: int) -> None:
        tmp = self.index_path.with_suffix(".idx.tmp")
        try:
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump({"count": count, "bytes": offset}, fh)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, self.index_path)
        except OSError as exc:
            raise StorageError("cannot write store index %s: %s" % (self.index_path, exc))

    def append(self, samples: Iterable[WeatherSample]) -> int:
        """Append samples; data is fsynced before the index is updated."""
        payload = b"".join(_encode(s) for s in samples)
        if not payload:
            return 0
        n = payload.count(b"\n")
        with self._lock:
            try:
                self._fh.write(payload)
                self._fh.flush()
                os.fsync(self._fh.fileno())
            except OSError as exc:
                raise StorageError("append to %s failed: %s" % (self.path, exc))
            self._count += n
            self._offset += len(payload)
            self._write_index(self._count, self._offset)
        return n

    def __len__(self) -> int:
        with self._lock:
            return self._count

    def iter_samples(self) -> Iterator[WeatherSample]:
        with self._lock:
            offset = self._offset
        try:
            with open(self.path, "rb") as fh:
                read = 0
                for line in fh:
                    if read >= offset:
                        break
                    read += len(line)
                    yield _decode(line)
        except OSError as exc:
            raise StorageError("cannot read store %s: %s" % (self.path, exc))

    def read_all(self) -> list[WeatherSample]:
        return list(self.iter_samples())

    def close(self) -> None:
        with self._lock:
            try:
                self._fh.close()
            except OSError:
                pass

    def __enter__(self) -> "HistoryStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def update_history(store: HistoryStore, samples: Iterable[WeatherSample]) -> int:
    """Append samples to the historical store; returns how many were written."""
    return store.append(samples)
