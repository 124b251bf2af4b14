"""Edge node: terminates ingest sessions, runs detection in-line, pushes
emergency alerts to the cloud immediately, caches latest data and uploads
periodic batches.

Alerts take a dedicated dispatch path: a detection result is delivered to
the cloud before the session processes any further frame, and uploads run
on their own thread so they can never delay an alert.
"""

from __future__ import annotations

import json
import logging
import socketserver
import threading
import time
from dataclasses import dataclass, replace
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional

import httpx

from . import protocol
from .domain import Alert, AlertKind, SnapshotRef, VitalRanges, VitalSample, now_ms
from .errors import RemoniError, UnknownPatient
from .fall_detector import FallScore, ModelWeights, make_detector
from .signal_prep import StreamingResampler, StreamingWindower, rescale
from .store import UploadBatch
from .vitals_guard import VitalsGuard

log = logging.getLogger(__name__)

DEFAULT_UPLOAD_PERIOD_S = 60.0
FALL_COOLDOWN_S = 10.0     # stream time; one alert per fall event
ALERT_RETRIES = 3
UPLOAD_RETRIES = 5


@dataclass(frozen=True)
class CacheEntry:
    vitals: Optional[VitalSample] = None
    snapshot: Optional[SnapshotRef] = None
    fall_score: Optional[FallScore] = None
    t_stream: int = 0          # newest stream timestamp seen
    last_update_ms: int = 0    # wall clock of the newest accepted frame


class LatestCache:
    """Per-patient last-known data; entries are replaced atomically so a
    reader never observes a torn triple."""

    def __init__(self):
        self._entries: dict[str, CacheEntry] = {}
        self._lock = threading.Lock()

    def update(self, patient_id: str, **fields) -> None:
        with self._lock:
            entry = self._entries.get(patient_id, CacheEntry())
            self._entries[patient_id] = replace(
                entry, last_update_ms=now_ms(), **fields
            )

    def get(self, patient_id: str) -> CacheEntry:
        with self._lock:
            entry = self._entries.get(patient_id)
            if entry is None:
                raise UnknownPatient(patient_id)
            return entry

    def patients(self) -> list[str]:
        with self._lock:
            return sorted(self._entries)


class CloudClient:
    """Thin HTTP client for the cloud's alert and ingest endpoints."""

    def __init__(self, base_url: str, timeout_s: float = 5.0):
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s

    def post_alert(self, alert: Alert) -> bool:
        return self._post("/alerts", alert.to_json(), ALERT_RETRIES, backoff_s=0.05)

    def post_batch(self, batch: UploadBatch) -> bool:
        return self._post("/ingest/batch", batch.to_json(), UPLOAD_RETRIES, backoff_s=0.1)

    def _post(self, path: str, payload: dict, retries: int, backoff_s: float) -> bool:
        delay = backoff_s
        for attempt in range(retries):
            try:
                resp = httpx.post(
                    f"{self.base_url}{path}", json=payload, timeout=self.timeout_s
                )
                if resp.status_code < 300:
                    return True
                log.warning("cloud %s returned %s", path, resp.status_code)
            except httpx.HTTPError as e:
                log.warning("cloud %s attempt %d failed: %s", path, attempt + 1, e)
            if attempt + 1 < retries:
                time.sleep(delay)
                delay *= 2
        return False


class _PatientBuffer:
    """Pending records for the next upload batch, tiled by stream time."""

    def __init__(self):
        self.vitals: list[VitalSample] = []
        self.snapshots: list[SnapshotRef] = []
        self.watermark: Optional[int] = None
        self.max_t: Optional[int] = None

    def add_vitals(self, v: VitalSample) -> None:
        self.vitals.append(v)
        self._advance(v.t)

    def add_snapshot(self, s: SnapshotRef) -> None:
        self.snapshots.append(s)
        self._advance(s.t)

    def _advance(self, t: int) -> None:
        if self.watermark is None:
            self.watermark = t
        self.max_t = t if self.max_t is None else max(self.max_t, t)

    def drain(self, patient_id: str) -> Optional[UploadBatch]:
        if not self.vitals and not self.snapshots:
            return None
        assert self.watermark is not None and self.max_t is not None
        batch = UploadBatch(
            batch_id=f"{patient_id}:{self.watermark}:{self.max_t + 1}",
            patient_id=patient_id,
            t_from=self.watermark,
            t_to=self.max_t + 1,
            vitals=tuple(self.vitals),
            snapshots=tuple(self.snapshots),
        )
        return batch

    def clear_after(self, batch: UploadBatch) -> None:
        self.vitals = self.vitals[len(batch.vitals):]
        self.snapshots = self.snapshots[len(batch.snapshots):]
        self.watermark = batch.t_to
        if not self.vitals and not self.snapshots:
            self.max_t = batch.t_to - 1 if self.max_t is None else self.max_t


class EdgeNode:
    """One edge device: ingest pipelines, cache, alert dispatch, uploader."""

    def __init__(
        self,
        cloud: CloudClient | None,
        weights: ModelWeights | None = None,
        ranges: VitalRanges | None = None,
        threshold: float = 0.5,
        upload_period_s: float = DEFAULT_UPLOAD_PERIOD_S,
        fall_cooldown_s: float = FALL_COOLDOWN_S,
    ):
        self.cloud = cloud
        self.detector = make_detector(weights, threshold)
        self.guard = VitalsGuard(ranges)
        self.cache = LatestCache()
        self.upload_period_s = upload_period_s
        self.fall_cooldown_ms = fall_cooldown_s * 1000.0
        self.stats: dict[str, int] = {}
        self.alerts_sent: list[Alert] = []
        self._buffers: dict[str, _PatientBuffer] = {}
        self._last_fall_t: dict[str, int] = {}
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._ingest_server: Optional[socketserver.ThreadingTCPServer] = None
        self._http_server: Optional[ThreadingHTTPServer] = None

    # -- pipeline ----------------------------------------------------------

    def _count(self, kind: str) -> None:
        with self._lock:
            self.stats[kind] = self.stats.get(kind, 0) + 1

    def _buffer(self, patient_id: str) -> _PatientBuffer:
        with self._lock:
            if patient_id not in self._buffers:
                self._buffers[patient_id] = _PatientBuffer()
            return self._buffers[patient_id]

    def _dispatch(self, alert: Alert) -> None:
        """Alerts bypass batching entirely and block the session until sent."""
        self.alerts_sent.append(alert)
        if self.cloud is not None:
            if not self.cloud.post_alert(alert):
                log.error("alert %s could not be delivered", alert.alert_id)

    def _on_window_score(self, patient_id: str, score: FallScore) -> None:
        self.cache.update(patient_id, fall_score=score, t_stream=score.window_t_start)
        if not score.is_fall:
            return
        last = self._last_fall_t.get(patient_id)
        if last is not None and score.window_t_start - last < self.fall_cooldown_ms:
            return
        self._last_fall_t[patient_id] = score.window_t_start
        self._dispatch(
            Alert(
                alert_id=f"{patient_id}:fall:{score.window_t_start}",
                patient_id=patient_id,
                kind=AlertKind.FALL,
                detail=score.to_json(),
                t_detected=now_ms(),
            )
        )

    def handle_session(self, frames) -> str:
        """Run one decoded frame stream through the pipeline.

        Returns the session's patient id. Protocol violations terminate the
        session; detection errors are logged and skipped.
        """
        it = iter(frames)
        try:
            first = next(it)
        except StopIteration:
            raise protocol.ProtocolViolation("empty session") from None
        hello = protocol.check_hello(first)
        patient_id = hello.patient_id
        assert patient_id is not None
        self._count("hello")

        resampler = StreamingResampler()
        windower = StreamingWindower(patient_id=patient_id)
        for frame in it:
            self._count(frame.kind)
            if frame.kind == "accel_batch":
                normalized = rescale([[s.x, s.y, s.z] for s in frame.samples])
                for s, norm in zip(frame.samples, normalized):
                    for gt, gv in resampler.push(s.t, norm):
                        for w in windower.push(gt, gv):
                            try:
                                score = self.detector(w)
                            except Exception:
                                log.exception("detector failed on window at %d", w.t_start)
                                continue
                            self._on_window_score(patient_id, score)
                self.cache.update(patient_id, t_stream=int(frame.samples[-1].t))
            elif frame.kind == "vitals":
                sample = frame.vitals
                assert sample is not None
                for alert in self.guard.observe(patient_id, sample, now_ms=now_ms()):
                    self._dispatch(alert)
                self.cache.update(patient_id, vitals=sample, t_stream=sample.t)
                self._buffer(patient_id).add_vitals(sample)
            elif frame.kind == "snapshot":
                snap = frame.snapshot
                assert snap is not None
                self.cache.update(patient_id, snapshot=snap, t_stream=snap.t)
                self._buffer(patient_id).add_snapshot(snap)
            elif frame.kind == "bye":
                break
            # heartbeat: counted, nothing else to do
        self.upload_once(patient_id)  # flush the session's tail
        return patient_id

    # -- instant reads -------------------------------------------------------

    def get_instant(self, patient_id: str) -> dict:
        entry = self.cache.get(patient_id)
        return {
            "patient_id": patient_id,
            "vitals": entry.vitals.to_json() if entry.vitals else None,
            "snapshot": entry.snapshot.to_json() if entry.snapshot else None,
            "fall_score": entry.fall_score.to_json() if entry.fall_score else None,
            "t": entry.t_stream,
            "staleness_ms": max(0, now_ms() - entry.last_update_ms),
        }

    # -- uploads ---------------------------------------------------------

    def upload_once(self, patient_id: str | None = None) -> int:
        """Drain buffers into batches; failed batches are retained and merge
        into the next attempt. Returns the number of batches delivered."""
        with self._lock:
            targets = [patient_id] if patient_id else list(self._buffers)
        delivered = 0
        for pid in targets:
            buf = self._buffers.get(pid)
            if buf is None:
                continue
            batch = buf.drain(pid)
            if batch is None:
                continue
            if self.cloud is None or self.cloud.post_batch(batch):
                buf.clear_after(batch)
                delivered += 1
            else:
                log.warning("batch %s retained after failed upload", batch.batch_id)
        return delivered

    def _uploader_loop(self) -> None:
        while not self._stop.wait(self.upload_period_s):
            self.upload_once()

    # -- servers -----------------------------------------------------------

    def serve_ingest(self, host: str, port: int) -> int:
        node = self

        class Handler(socketserver.BaseRequestHandler):
            def handle(self):
                decoder = protocol.Decoder()

                def frame_stream():
                    while True:
                        data = self.request.recv(65536)
                        if not data:
                            return
                        yield from decoder.feed(data)

                try:
                    node.handle_session(frame_stream())
                except (protocol.ProtocolViolation, RemoniError) as e:
                    log.warning("session from %s terminated: %s", self.client_address, e)

        class Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self._ingest_server = Server((host, port), Handler)
        t = threading.Thread(target=self._ingest_server.serve_forever, daemon=True)
        t.start()
        self._threads.append(t)
        return self._ingest_server.server_address[1]

    def serve_http(self, host: str, port: int) -> int:
        node = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _send(self, code: int, payload: dict) -> None:
                body = json.dumps(payload).encode()
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_GET(self):
                if self.path == "/healthz":
                    self._send(200, {"status": "ok"})
                elif self.path == "/stats":
                    self._send(200, {"frames": node.stats, "patients": node.cache.patients()})
                elif self.path.startswith("/instant/"):
                    pid = self.path[len("/instant/"):]
                    try:
                        self._send(200, node.get_instant(pid))
                    except UnknownPatient as e:
                        self._send(404, {"error": str(e)})
                else:
                    self._send(404, {"error": "not found"})

        self._http_server = ThreadingHTTPServer((host, port), Handler)
        t = threading.Thread(target=self._http_server.serve_forever, daemon=True)
        t.start()
        self._threads.append(t)
        return self._http_server.server_address[1]

    def start_uploader(self) -> None:
        t = threading.Thread(target=self._uploader_loop, daemon=True)
        t.start()
        self._threads.append(t)

    def stop(self) -> None:
        self._stop.set()
        if self._ingest_server:
            self._ingest_server.shutdown()
        if self._http_server:
            self._http_server.shutdown()
        self.upload_once()
