"""Scriptable smartwatch/camera stand-in.

Synthesizes 238 Hz, ±8 g accelerometry with activity and fall signatures,
periodic vitals with scheduled excursions, and placeholder snapshot images,
then streams everything over the ingest protocol in real or accelerated
time. A scenario plus a seed fully determines every emitted payload.

The fall signature mirrors the slip/trip/syncope phenomenology: a free-fall
dip (magnitude <= 0.4 g for 300 ms), an impact half-sine with its peak drawn
from [3 g, 6 g] and width 40-80 ms centered on the scripted event time, then
post-impact stillness (jitter sigma 0.01 g) for at least 1.5 s.
"""

from __future__ import annotations

import io
import json
import socket
import time
import zlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from PIL import Image, ImageDraw
from PIL.PngImagePlugin import PngInfo

from . import protocol
from .domain import SnapshotRef, VitalSample, now_ms
from .errors import RemoniError
from .signal_prep import RAW_HZ, arrays_to_samples

ACCEL_BATCH_MS = 250
LABEL_KEY = "remoni_label"

BASELINE_SIGMA_G = 0.05
FALL_DIP_S = 0.3
FALL_DIP_MAG = 0.25
FALL_STILL_S = 1.5
FALL_STILL_SIGMA_G = 0.01
ADL_MAG_CLAMP_G = 2.5   # keeps scripted activity below any fall impact

DEFAULT_BASELINE = {
    "temp": (36.8, 0.08),
    "hr": (72.0, 2.0),
    "rr": (16.0, 0.8),
    "sys": (110.0, 3.0),
    "dia": (70.0, 2.0),
    "spo2": (98.0, 0.4),
}


class ConnectionRefused(RemoniError):
    pass


@dataclass(frozen=True)
class Event:
    t_s: float
    kind: str                      # fall | vital_excursion | activity
    sign: Optional[str] = None     # vital_excursion
    value: Optional[float] = None
    hold_s: Optional[float] = None
    name: Optional[str] = None     # activity
    duration_s: Optional[float] = None
    emotion: str = "neutral"
    sigma_g: Optional[float] = None

    @classmethod
    def from_json(cls, d: dict) -> "Event":
        return cls(
            t_s=float(d["t_s"]),
            kind=str(d["kind"]),
            sign=d.get("sign"),
            value=None if d.get("value") is None else float(d["value"]),
            hold_s=None if d.get("hold_s") is None else float(d["hold_s"]),
            name=d.get("name"),
            duration_s=None if d.get("duration_s") is None else float(d["duration_s"]),
            emotion=str(d.get("emotion", "neutral")),
            sigma_g=None if d.get("sigma_g") is None else float(d["sigma_g"]),
        )


@dataclass(frozen=True)
class Scenario:
    patient_id: str
    duration_s: float
    seed: int = 0
    speedup: float = 1.0
    events: tuple[Event, ...] = ()
    baseline: dict = field(default_factory=lambda: dict(DEFAULT_BASELINE))
    vitals_period_s: float = 5.0
    snapshot_period_s: float = 0.0   # 0 disables the snapshot channel
    idle_activity: str = "reading"
    idle_emotion: str = "neutral"
    t0_ms: Optional[int] = None      # stream epoch; defaults to wall clock at emit

    def __post_init__(self):
        if self.speedup < 1.0:
            raise ValueError("speedup must be >= 1")
        for e in self.events:
            if not 0 <= e.t_s <= self.duration_s:
                raise ValueError(f"event at {e.t_s}s outside [0, {self.duration_s}]")

    @classmethod
    def from_json(cls, d: dict) -> "Scenario":
        baseline = dict(DEFAULT_BASELINE)
        for sign, pair in d.get("baseline", {}).items():
            baseline[sign] = (float(pair[0]), float(pair[1]))
        return cls(
            patient_id=str(d["patient_id"]),
            duration_s=float(d["duration_s"]),
            seed=int(d.get("seed", 0)),
            speedup=float(d.get("speedup", 1.0)),
            events=tuple(Event.from_json(e) for e in d.get("events", [])),
            baseline=baseline,
            vitals_period_s=float(d.get("vitals_period_s", 5.0)),
            snapshot_period_s=float(d.get("snapshot_period_s", 0.0)),
            idle_activity=str(d.get("idle_activity", "reading")),
            idle_emotion=str(d.get("idle_emotion", "neutral")),
            t0_ms=None if d.get("t0_ms") is None else int(d["t0_ms"]),
        )

    @classmethod
    def load(cls, path) -> "Scenario":
        with open(path) as f:
            return cls.from_json(json.load(f))


def synth_accel(s: Scenario, t0_ms: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """238 Hz, ±8 g stream: gravity plus seeded jitter, with scripted events.

    Returns (t, xyz) with integer-ms timestamps anchored at t0_ms.
    """
    rng = np.random.default_rng(s.seed)
    n = int(round(s.duration_s * RAW_HZ))
    tau = np.arange(n) / RAW_HZ                    # seconds from stream start
    t = t0_ms + np.round(tau * 1000.0).astype(np.int64)

    mag = np.ones(n)                               # gravity magnitude profile
    sigma = np.full(n, BASELINE_SIGMA_G)
    clampable = np.ones(n, dtype=bool)             # impact samples are exempt

    # Draw per-event parameters first so the stream is deterministic in seed.
    fall_params = []
    for e in s.events:
        if e.kind == "fall":
            peak = rng.uniform(3.0, 6.0)
            width_s = rng.uniform(0.040, 0.080)
            fall_params.append((e, peak, width_s))
        elif e.kind == "activity" and e.sigma_g is None:
            fall_params.append((e, rng.uniform(0.3, 0.8), None))
        else:
            fall_params.append((e, None, None))

    for e, p1, p2 in fall_params:
        if e.kind == "fall":
            peak, width_s = p1, p2
            center = e.t_s
            imp_lo, imp_hi = center - width_s / 2, center + width_s / 2
            dip_lo = imp_lo - FALL_DIP_S
            still_hi = imp_hi + FALL_STILL_S

            dip = (tau >= dip_lo) & (tau < imp_lo)
            mag[dip] = FALL_DIP_MAG
            sigma[dip] = FALL_STILL_SIGMA_G

            imp = (tau >= imp_lo) & (tau < imp_hi)
            mag[imp] = 1.0 + (peak - 1.0) * np.sin(np.pi * (tau[imp] - imp_lo) / width_s)
            sigma[imp] = FALL_STILL_SIGMA_G
            clampable[imp] = False

            still = (tau >= imp_hi) & (tau < still_hi)
            mag[still] = 1.0
            sigma[still] = FALL_STILL_SIGMA_G
        elif e.kind == "activity":
            sig = e.sigma_g if e.sigma_g is not None else p1
            span = (tau >= e.t_s) & (tau < e.t_s + (e.duration_s or 0.0))
            sigma[span] = sig

    noise = rng.normal(0.0, 1.0, size=(n, 3)) * sigma[:, None]
    xyz = np.zeros((n, 3))
    xyz[:, 2] = mag
    xyz += noise

    mags = np.sqrt(np.sum(xyz * xyz, axis=1))
    over = clampable & (mags > ADL_MAG_CLAMP_G)
    if np.any(over):
        xyz[over] *= (ADL_MAG_CLAMP_G / mags[over])[:, None]
    return t, np.clip(xyz, -8.0, 8.0)


def synth_vitals(s: Scenario, t0_ms: int = 0, period_s: float | None = None) -> list[VitalSample]:
    """One sample per period; scripted excursions pin the named sign."""
    rng = np.random.default_rng(s.seed + 1)
    period = period_s if period_s is not None else s.vitals_period_s
    out: list[VitalSample] = []
    k = 0
    while k * period < s.duration_s:
        t_s = k * period
        values = {}
        for sign in ("temp", "hr", "rr", "sys", "dia", "spo2"):
            mean, sd = s.baseline[sign]
            values[sign] = float(rng.normal(mean, sd))
        for e in s.events:
            if e.kind == "vital_excursion" and e.t_s <= t_s <= e.t_s + (e.hold_s or 0.0):
                values[e.sign] = float(e.value)
        values["spo2"] = min(100.0, max(0.0, values["spo2"]))
        if values["sys"] <= values["dia"]:
            values["dia"] = values["sys"] - 1.0
        out.append(VitalSample(t=t0_ms + int(round(t_s * 1000)), **values))
        k += 1
    return out


def _label_at(s: Scenario, t_s: float) -> tuple[str, str]:
    for e in s.events:
        if e.kind == "activity" and e.t_s <= t_s < e.t_s + (e.duration_s or 0.0):
            return (e.name or s.idle_activity, e.emotion)
    return (s.idle_activity, s.idle_emotion)


def render_snapshot_png(label: str) -> bytes:
    """Placeholder image: solid color, the label drawn and embedded as a
    PNG text chunk (the deterministic hook the stub recognizer reads)."""
    shade = (zlib.crc32(label.encode("utf-8")) & 0x7F) + 64  # stable across runs
    img = Image.new("RGB", (160, 120), (shade, 96, 160))
    draw = ImageDraw.Draw(img)
    draw.text((8, 52), label, fill=(255, 255, 255))
    meta = PngInfo()
    meta.add_text(LABEL_KEY, label)
    buf = io.BytesIO()
    img.save(buf, format="PNG", pnginfo=meta)
    return buf.getvalue()


def read_snapshot_label(media: bytes) -> Optional[str]:
    try:
        img = Image.open(io.BytesIO(media))
        return img.info.get(LABEL_KEY)
    except Exception:
        return None


def synth_snapshots(s: Scenario, t0_ms: int = 0) -> list[SnapshotRef]:
    if s.snapshot_period_s <= 0:
        return []
    out: list[SnapshotRef] = []
    k = 0
    while k * s.snapshot_period_s < s.duration_s:
        t_s = k * s.snapshot_period_s
        activity, emotion = _label_at(s, t_s)
        media = render_snapshot_png(f"{activity}/{emotion}")
        out.append(
            SnapshotRef(
                t=t0_ms + int(round(t_s * 1000)),
                patient_id=s.patient_id,
                media=media,
                mime="image/png",
            )
        )
        k += 1
    return out


@dataclass
class SessionSummary:
    frames_sent: dict
    bytes_sent: int
    wall_time_s: float
    error: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "frames_sent": self.frames_sent,
            "bytes_sent": self.bytes_sent,
            "wall_time_s": self.wall_time_s,
            "error": self.error,
        }


def build_frames(s: Scenario, t0_ms: int) -> list[tuple[int, protocol.Frame]]:
    """The session's data frames with their stream timestamps, time-ordered."""
    t, xyz = synth_accel(s, t0_ms)
    frames: list[tuple[int, protocol.Frame]] = []
    lo = 0
    while lo < len(t):
        batch_end = t[lo] + ACCEL_BATCH_MS
        hi = lo
        while hi < len(t) and t[hi] < batch_end:
            hi += 1
        samples = list(arrays_to_samples(t[lo:hi], xyz[lo:hi]))
        frames.append((int(t[hi - 1]), protocol.Frame.accel_batch(samples)))
        lo = hi
    for v in synth_vitals(s, t0_ms):
        frames.append((v.t, protocol.Frame.of_vitals(v)))
    for snap in synth_snapshots(s, t0_ms):
        frames.append((snap.t, protocol.Frame.of_snapshot(snap)))
    frames.sort(key=lambda pair: pair[0])
    return frames


def emit(s: Scenario, endpoint: str, device_id: str = "simwatch") -> SessionSummary:
    """Stream hello, the scenario's frames paced by speedup, then bye.

    Raises ConnectionRefused if the receiver is down; a mid-stream
    disconnect is reported on the (partial) summary instead of raised.
    """
    host, _, port = endpoint.rpartition(":")
    t0 = s.t0_ms if s.t0_ms is not None else now_ms()
    frames = build_frames(s, t0)

    counts: dict[str, int] = {}
    sent_bytes = 0
    start = time.monotonic()
    try:
        sock = socket.create_connection((host or "127.0.0.1", int(port)), timeout=10)
    except (ConnectionRefusedError, OSError) as e:
        raise ConnectionRefused(f"cannot reach {endpoint}: {e}") from None

    def send(frame: protocol.Frame) -> int:
        data = protocol.encode(frame)
        sock.sendall(data)
        counts[frame.kind] = counts.get(frame.kind, 0) + 1
        return len(data)

    error = None
    try:
        sent_bytes += send(protocol.Frame.hello(device_id, s.patient_id))
        for stream_t, frame in frames:
            target = start + (stream_t - t0) / 1000.0 / s.speedup
            delay = target - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            sent_bytes += send(frame)
        sent_bytes += send(protocol.Frame(kind="bye"))
    except OSError as e:
        error = f"disconnected mid-stream: {e}"
    finally:
        try:
            sock.close()
        except OSError:
            pass
    return SessionSummary(
        frames_sent=counts,
        bytes_sent=sent_bytes,
        wall_time_s=time.monotonic() - start,
        error=error,
    )
