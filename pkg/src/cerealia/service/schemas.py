"""Request and response bodies for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class IngestRequest(BaseModel):
    ts: str = Field(description="Sample instant, ISO-8601; naive times are UTC")
    values: dict[str, float] = Field(description="Attribute name to reading")


class AlertOut(BaseModel):
    station: str
    label: str
    start: str
    end: str
    start_ts: int
    end_ts: int
    window_start_index: int
    scores: list[float]


class IngestResponse(BaseModel):
    accepted: bool
    committed: int = Field(description="Samples written downstream by this ingest")
    window_fill: int
    alert: AlertOut | None = None


class AlertsResponse(BaseModel):
    alerts: list[AlertOut]
    dropped: int = Field(description="Alerts lost to the bounded buffer so far")


class StatusResponse(BaseModel):
    station: str
    detector_kind: str
    window_length: int
    stride: int
    window_fill: int
    samples_seen: int
    alerts_emitted: int
    alerts_buffered: int
    alerts_dropped: int
    impute_on_flag: bool
    store_records: int | None
    attributes: list[str]
