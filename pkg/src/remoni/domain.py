"""Shared vocabulary of value types used by every other module.

All timestamps are integer milliseconds since the Unix epoch, UTC.
Every type has a canonical JSON rendering (lower_snake_case field names,
compact separators, stable field order) used by the wire protocol, the
time-series store and the HTTP API.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timezone
from enum import Enum
from typing import Any, Optional

from .errors import ValidationError

RAW_G_RANGE = 8.0    # accelerometer measurement range of the simulated watch
NORM_G_RANGE = 1.0   # range after preprocessing


class Activity(Enum):
    DRINKING = "drinking"
    PUTTING_ON_GLASSES = "putting_on_glasses"
    PUTTING_ON_JACKET = "putting_on_jacket"
    READING = "reading"
    SITTING_DOWN = "sitting_down"
    STANDING_UP = "standing_up"
    TAKING_OFF_GLASSES = "taking_off_glasses"
    TAKING_OFF_JACKET = "taking_off_jacket"
    WRITING = "writing"
    UNIDENTIFIABLE = "unidentifiable"


class Emotion(Enum):
    ANGRY = "angry"
    DISGUST = "disgust"
    HAPPY = "happy"
    NEUTRAL = "neutral"
    SAD = "sad"
    UNIDENTIFIABLE = "unidentifiable"


class AlertKind(Enum):
    FALL = "fall"
    VITAL_OUT_OF_RANGE = "vital_out_of_range"


class FallSource(Enum):
    RULE_BASELINE = "rule_baseline"
    NEURAL_MODEL = "neural_model"


def parse_activity(token: str) -> Activity:
    try:
        return Activity(token)
    except ValueError:
        raise ValidationError("activity", f"unknown activity {token!r}") from None


def parse_emotion(token: str) -> Emotion:
    try:
        return Emotion(token)
    except ValueError:
        raise ValidationError("emotion", f"unknown emotion {token!r}") from None


@dataclass(frozen=True)
class AccelSample:
    """One 3-axis accelerometer reading, components in g-units."""

    t: int
    x: float
    y: float
    z: float

    def to_json(self) -> dict:
        return {"t": self.t, "x": self.x, "y": self.y, "z": self.z}

    @classmethod
    def from_json(cls, d: dict) -> "AccelSample":
        return cls(t=int(d["t"]), x=float(d["x"]), y=float(d["y"]), z=float(d["z"]))


@dataclass(frozen=True)
class VitalSample:
    """One reading of the five monitored vital signs.

    Blood pressure is split into systolic/diastolic numeric fields so
    each bound can be checked independently.
    """

    t: int
    temp: float   # °C
    hr: float     # beats/min
    rr: float     # breaths/min
    sys: float    # mmHg
    dia: float    # mmHg
    spo2: float   # percent

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "temp": self.temp,
            "hr": self.hr,
            "rr": self.rr,
            "sys": self.sys,
            "dia": self.dia,
            "spo2": self.spo2,
        }

    @classmethod
    def from_json(cls, d: dict) -> "VitalSample":
        return cls(
            t=int(d["t"]),
            temp=float(d["temp"]),
            hr=float(d["hr"]),
            rr=float(d["rr"]),
            sys=float(d["sys"]),
            dia=float(d["dia"]),
            spo2=float(d["spo2"]),
        )


@dataclass(frozen=True)
class SnapshotRef:
    """A still image captured from the patient's camera channel."""

    t: int
    patient_id: str
    media: bytes
    mime: str

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "patient_id": self.patient_id,
            "mime": self.mime,
            "media_b64": base64.b64encode(self.media).decode("ascii"),
        }

    @classmethod
    def from_json(cls, d: dict) -> "SnapshotRef":
        return cls(
            t=int(d["t"]),
            patient_id=str(d["patient_id"]),
            media=base64.b64decode(d["media_b64"]),
            mime=str(d["mime"]),
        )


@dataclass(frozen=True)
class Patient:
    patient_id: str
    name: str
    date_of_birth: date
    notes: str = ""

    def to_json(self) -> dict:
        return {
            "patient_id": self.patient_id,
            "name": self.name,
            "date_of_birth": self.date_of_birth.isoformat(),
            "notes": self.notes,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Patient":
        return cls(
            patient_id=str(d["patient_id"]),
            name=str(d["name"]),
            date_of_birth=date.fromisoformat(d["date_of_birth"]),
            notes=str(d.get("notes", "")),
        )


@dataclass(frozen=True)
class Alert:
    """An emergency record on its way from the edge to a caregiver.

    t_detected is stamped by the edge when detection fires, t_received
    by the cloud on ingestion, t_delivered when the alert is written to
    a subscriber stream. Invariant: t_detected <= t_received <= t_delivered
    whenever the later stamps are present.
    """

    alert_id: str
    patient_id: str
    kind: AlertKind
    detail: dict
    t_detected: int
    t_received: Optional[int] = None
    t_delivered: Optional[int] = None

    def to_json(self) -> dict:
        return {
            "alert_id": self.alert_id,
            "patient_id": self.patient_id,
            "kind": self.kind.value,
            "detail": self.detail,
            "t_detected": self.t_detected,
            "t_received": self.t_received,
            "t_delivered": self.t_delivered,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Alert":
        return cls(
            alert_id=str(d["alert_id"]),
            patient_id=str(d["patient_id"]),
            kind=AlertKind(d["kind"]),
            detail=dict(d["detail"]),
            t_detected=int(d["t_detected"]),
            t_received=None if d.get("t_received") is None else int(d["t_received"]),
            t_delivered=None if d.get("t_delivered") is None else int(d["t_delivered"]),
        )

    def stamped(self, **stamps: int) -> "Alert":
        return replace(self, **stamps)


@dataclass(frozen=True)
class VitalRanges:
    """Inclusive healthy interval per vital sign.

    Values equal to a bound count as healthy. SpO2 has a lower bound
    only (there is no unhealthy-high below 100 %).
    """

    temp: tuple[float, float] = (36.5, 37.2)
    hr: tuple[float, float] = (60.0, 100.0)
    rr: tuple[float, float] = (12.0, 20.0)
    sys: tuple[float, float] = (90.0, 120.0)
    dia: tuple[float, float] = (60.0, 80.0)
    spo2_min: float = 95.0

    def __post_init__(self):
        for sign in ("temp", "hr", "rr", "sys", "dia"):
            lo, hi = getattr(self, sign)
            if not lo <= hi:
                raise ValidationError(sign, f"lo {lo} > hi {hi}")

    def to_json(self) -> dict:
        return {
            "temp": list(self.temp),
            "hr": list(self.hr),
            "rr": list(self.rr),
            "sys": list(self.sys),
            "dia": list(self.dia),
            "spo2_min": self.spo2_min,
        }

    @classmethod
    def from_json(cls, d: dict) -> "VitalRanges":
        kwargs: dict[str, Any] = {}
        for sign in ("temp", "hr", "rr", "sys", "dia"):
            if sign in d:
                lo, hi = d[sign]
                kwargs[sign] = (float(lo), float(hi))
        if "spo2_min" in d:
            kwargs["spo2_min"] = float(d["spo2_min"])
        return cls(**kwargs)


def validate_accel(s: AccelSample, limit: float = RAW_G_RANGE) -> None:
    """Raise ValidationError naming the violated field, or return None."""
    for name in ("x", "y", "z"):
        v = getattr(s, name)
        if not math.isfinite(v):
            raise ValidationError(name, "not finite")
        if abs(v) > limit:
            raise ValidationError(name, f"|{v}| exceeds {limit} g")


def validate_vitals(s: VitalSample) -> None:
    for name in ("temp", "hr", "rr", "sys", "dia", "spo2"):
        v = getattr(s, name)
        if not math.isfinite(v):
            raise ValidationError(name, "not finite")
    if not 0.0 <= s.spo2 <= 100.0:
        raise ValidationError("spo2", f"{s.spo2} out of [0, 100]")
    if not s.sys > s.dia:
        raise ValidationError("sys", f"sys {s.sys} must exceed dia {s.dia}")


def validate_snapshot(s: SnapshotRef) -> None:
    if not s.media:
        raise ValidationError("media", "empty media")
    if not s.mime.startswith("image/"):
        raise ValidationError("mime", f"{s.mime!r} is not an image type")


def canonical_json(payload: dict) -> str:
    """Compact JSON with the dict's own key order (types list fields in
    their canonical order already)."""
    return json.dumps(payload, separators=(",", ":"), ensure_ascii=False)


def now_ms() -> int:
    return int(datetime.now(timezone.utc).timestamp() * 1000)


def ms_to_datetime(t: int) -> datetime:
    return datetime.fromtimestamp(t / 1000.0, tz=timezone.utc)


def ms_to_date(t: int) -> date:
    return ms_to_datetime(t).date()
