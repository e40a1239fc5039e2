"""FastAPI application around one station's consistency checker.

POST /ingest feeds a sample through the checker, GET /alerts pages through
raised alerts, GET /status reports counters. The checker serializes its own
state, so the app is safe under the default single-worker deployment.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException, Query

from ..errors import CerealiaError
from ..model import WeatherSample, parse_timestamp
from ..runtime import Alert, ConsistencyChecker
from .schemas import AlertOut, AlertsResponse, IngestRequest, IngestResponse, StatusResponse


def _alert_out(alert: Alert) -> AlertOut:
    return AlertOut(**alert.to_dict())


def create_app(checker: ConsistencyChecker) -> FastAPI:
    app = FastAPI(title="cerealia", version="0.1.0")
    app.state.checker = checker
    names = checker.detector.attribute_names

    @app.post("/ingest", response_model=IngestResponse)
    def ingest(body: IngestRequest) -> IngestResponse:
        try:
            ts = parse_timestamp(body.ts)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail="bad timestamp: %s" % exc)
        missing = [n for n in names if n not in body.values]
        unknown = [n for n in body.values if n not in names]
        if missing or unknown:
            raise HTTPException(
                status_code=422,
                detail={"missing_attributes": missing, "unknown_attributes": unknown},
            )
        sample = WeatherSample(timestamp=ts, values=tuple(body.values[n] for n in names))
        try:
            result = checker.process(sample)
        except CerealiaError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return IngestResponse(
            accepted=True,
            committed=len(result.committed),
            window_fill=checker.window_fill,
            alert=_alert_out(result.alert) if result.alert else None,
        )

    @app.get("/alerts", response_model=AlertsResponse)
    def alerts(since: str | None = Query(default=None)) -> AlertsResponse:
        cutoff = None
        if since is not None:
            try:
                cutoff = parse_timestamp(since)
            except ValueError as exc:
                raise HTTPException(status_code=422, detail="bad since: %s" % exc)
        out = [
            _alert_out(a)
            for a in checker.recent_alerts
            if cutoff is None or a.end_ts >= cutoff
        ]
        return AlertsResponse(alerts=out, dropped=checker.dispatcher.dropped)

    @app.get("/status", response_model=StatusResponse)
    def status() -> StatusResponse:
        s = checker.status()
        return StatusResponse(
            station=s["station"],
            detector_kind=checker.detector.kind,
            window_length=s["window_length"],
            stride=s["stride"],
            window_fill=s["window_fill"],
            samples_seen=s["samples_seen"],
            alerts_emitted=s["alerts_emitted"],
            alerts_buffered=s["alerts_buffered"],
            alerts_dropped=s["alerts_dropped"],
            impute_on_flag=s["impute_on_flag"],
            store_records=s["store_records"],
            attributes=list(names),
        )

    return app
