"""Cloud tier: alert intake and fan-out, batch ingestion, query/chat API.

A single FastAPI process hosts the HTTP API and the NLP engine. The alert
feed is in-memory with an append-only disk journal for restart recovery;
subscribers receive alerts over a server-sent event stream in receipt
order, each stamped with its delivery time.
"""

from __future__ import annotations

import json
import logging
import threading
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Optional

import httpx
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from starlette.concurrency import run_in_threadpool

from .domain import Alert, Patient, now_ms
from .errors import RemoniError, UnknownPatient, ValidationError
from .nlp import Engine, LlmSchemaError, LlmUnavailable, MissingPatient, MllmUnavailable
from .nlp.llm_client import llm_client_from_env, mllm_client_from_env
from .store import Store, UploadBatch

log = logging.getLogger(__name__)

DEFAULT_PORT = 8080
ENV_CLOUD_URL = "REMONI_CLOUD_URL"


class EdgeUnreachable(RemoniError):
    pass


class AlertFeed:
    """Append-only alert log; delivery order equals receipt order and every
    live subscriber sees each alert exactly once (tracked by cursor)."""

    def __init__(self, journal_path: Optional[Path] = None):
        self._log: list[Alert] = []
        self._ids: set[str] = set()
        self._cond = threading.Condition()
        self.journal_path = journal_path
        if journal_path and journal_path.exists():
            for line in journal_path.read_text().splitlines():
                try:
                    alert = Alert.from_json(json.loads(line))
                except (json.JSONDecodeError, KeyError, ValueError):
                    log.warning("skipping corrupt journal line")
                    continue
                if alert.alert_id not in self._ids:
                    self._ids.add(alert.alert_id)
                    self._log.append(alert)

    def publish(self, alert: Alert) -> bool:
        """Returns False for a duplicate alert_id (idempotent edge retries)."""
        with self._cond:
            if alert.alert_id in self._ids:
                return False
            self._ids.add(alert.alert_id)
            self._log.append(alert)
            if self.journal_path:
                self.journal_path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.journal_path, "a") as f:
                    f.write(json.dumps(alert.to_json()) + "\n")
            self._cond.notify_all()
            return True

    def wait_after(self, cursor: int, timeout_s: float = 10.0) -> tuple[list[Alert], int]:
        """Alerts past `cursor` (blocking up to timeout); new cursor."""
        with self._cond:
            if len(self._log) <= cursor:
                self._cond.wait(timeout_s)
            fresh = self._log[cursor:]
            return fresh, cursor + len(fresh)

    def all(self) -> list[Alert]:
        with self._cond:
            return list(self._log)


def load_registry(path: Optional[Path]) -> dict[str, Patient]:
    registry: dict[str, Patient] = {}
    if path and path.exists():
        for entry in json.loads(path.read_text()):
            p = Patient.from_json(entry)
            registry[p.patient_id] = p
    return registry


def _auto_register(registry: dict[str, Patient], patient_id: str) -> None:
    if patient_id not in registry:
        registry[patient_id] = Patient(
            patient_id=patient_id,
            name=f"Patient {patient_id}",
            date_of_birth=date(1970, 1, 1),
            notes="auto-registered from ingest",
        )


def create_app(
    data_dir,
    edge_url: str = "",
    ui_dir: Optional[str] = None,
    registry_file: Optional[str] = None,
    intent_backend: str = "grammar",
    answer_backend: str = "template",
    recognition_backend: str = "stub",
) -> FastAPI:
    data_dir = Path(data_dir)
    store = Store(data_dir / "store")
    feed = AlertFeed(journal_path=data_dir / "alerts.ndjson")
    registry = load_registry(Path(registry_file) if registry_file else data_dir / "patients.json")
    for pid in store.known_patients():
        _auto_register(registry, pid)

    def edge_fetch(patient_id: str) -> dict:
        if not edge_url:
            raise EdgeUnreachable("no edge configured")
        try:
            resp = httpx.get(f"{edge_url.rstrip('/')}/instant/{patient_id}", timeout=3.0)
        except httpx.HTTPError as e:
            raise EdgeUnreachable(f"edge {edge_url} unreachable: {e}") from None
        if resp.status_code == 404:
            raise UnknownPatient(patient_id)
        if resp.status_code != 200:
            raise EdgeUnreachable(f"edge returned {resp.status_code}")
        return resp.json()

    engine = Engine(
        store=store,
        registry=registry,
        edge_fetch=edge_fetch if edge_url else None,
        intent_backend=intent_backend,
        recognition_backend=recognition_backend,
        answer_backend=answer_backend,
        llm_client=llm_client_from_env(),
        mllm_client=mllm_client_from_env(),
    )

    app = FastAPI(title="remoni cloud")
    app.state.store = store
    app.state.feed = feed
    app.state.registry = registry
    app.state.engine = engine

    @app.exception_handler(RemoniError)
    async def remoni_error_handler(request: Request, exc: RemoniError):
        if isinstance(exc, UnknownPatient):
            code = 404
        elif isinstance(exc, (LlmUnavailable, MllmUnavailable)):
            code = 503
        elif isinstance(exc, EdgeUnreachable):
            code = 502
        elif isinstance(exc, (ValidationError, MissingPatient, LlmSchemaError)):
            code = 400
        else:
            code = 400
        return JSONResponse(status_code=code, content={"error": type(exc).__name__, "detail": str(exc)})

    @app.post("/alerts", status_code=202)
    async def post_alert(request: Request):
        try:
            alert = Alert.from_json(await request.json())
        except (KeyError, TypeError, ValueError) as e:
            raise ValidationError("alert", f"bad alert body: {e}") from None
        alert = alert.stamped(t_received=max(now_ms(), alert.t_detected))
        fresh = feed.publish(alert)
        _auto_register(registry, alert.patient_id)
        return {"accepted": True, "duplicate": not fresh}

    @app.post("/ingest/batch")
    async def post_batch(request: Request):
        try:
            batch = UploadBatch.from_json(await request.json())
        except (KeyError, TypeError, ValueError) as e:
            raise ValidationError("batch", f"bad batch body: {e}") from None
        _auto_register(registry, batch.patient_id)
        return await run_in_threadpool(store.append, batch)

    @app.get("/patients")
    async def list_patients():
        return {"patients": [registry[pid].to_json() for pid in sorted(registry)]}

    @app.get("/patients/{patient_id}/vitals")
    async def get_vitals(
        patient_id: str,
        dates: str,
        sign: Optional[str] = None,
        time_from: Optional[str] = None,
        time_to: Optional[str] = None,
    ):
        try:
            day_list = [date.fromisoformat(d) for d in dates.split(",") if d]
        except ValueError as e:
            raise ValidationError("dates", str(e)) from None
        if not day_list:
            raise ValidationError("dates", "at least one date required")
        ranges = [(time_from, time_to)] if time_from and time_to else None
        try:
            records = await run_in_threadpool(
                store.query, patient_id, day_list, "vitals", ranges, sign
            )
        except ValueError as e:
            raise ValidationError("query", str(e)) from None
        return {"records": records}

    @app.get("/patients/{patient_id}/latest")
    async def get_latest(patient_id: str):
        if patient_id not in registry:
            raise UnknownPatient(patient_id)
        if edge_url:
            try:
                instant = edge_fetch(patient_id)
                return {"source": "edge", **instant}
            except UnknownPatient:
                pass  # known to the cloud but not this edge: fall back
            except EdgeUnreachable as e:
                log.warning("%s", e)
        vitals = store.latest(patient_id, "vitals")
        snapshot = store.latest(patient_id, "snapshots")
        if vitals is None and snapshot is None:
            raise EdgeUnreachable("edge unreachable and no stored data")
        t = max(int(r["t"]) for r in (vitals, snapshot) if r)
        return {
            "source": "store",
            "patient_id": patient_id,
            "vitals": vitals,
            "snapshot": snapshot,
            "fall_score": None,
            "t": t,
            "staleness_ms": max(0, now_ms() - t),
        }

    @app.post("/chat")
    def chat(body: dict):
        question = str(body.get("question", ""))
        if not question.strip():
            raise ValidationError("question", "question must be non-empty")
        now = None
        if body.get("now_ms") is not None:
            now = datetime.fromtimestamp(int(body["now_ms"]) / 1000, tz=timezone.utc)
        response = engine.answer(question, now=now)
        return response.to_json()

    @app.get("/alerts/stream")
    async def alerts_stream(request: Request, cursor: int = 0, limit: int = 0):
        start = int(request.headers.get("Last-Event-ID", cursor))

        def gen(pos: int):
            sent = 0
            while True:
                alerts, pos = feed.wait_after(pos, timeout_s=10.0)
                if not alerts:
                    yield ": keepalive\n\n"
                    continue
                for offset, alert in enumerate(alerts, start=pos - len(alerts) + 1):
                    delivered = alert.stamped(t_delivered=max(now_ms(), alert.t_received or 0))
                    payload = json.dumps(delivered.to_json())
                    yield f"id: {offset}\ndata: {payload}\n\n"
                    sent += 1
                    if limit and sent >= limit:
                        return

        return StreamingResponse(gen(start), media_type="text/event-stream")

    @app.get("/alerts/log")
    async def alerts_log():
        return {"alerts": [a.to_json() for a in feed.all()]}

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok"}

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def run(
    host: str = "127.0.0.1",
    port: int = DEFAULT_PORT,
    data_dir: str = "./data",
    edge_url: str = "",
    ui_dir: Optional[str] = None,
    registry_file: Optional[str] = None,
    answer_backend: str = "template",
    intent_backend: str = "grammar",
) -> None:
    import uvicorn

    app = create_app(
        data_dir,
        edge_url=edge_url,
        ui_dir=ui_dir,
        registry_file=registry_file,
        answer_backend=answer_backend,
        intent_backend=intent_backend,
    )
    uvicorn.run(app, host=host, port=port, log_level="warning")
