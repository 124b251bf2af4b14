"""Framed wire protocol between wearable and edge node.

Each frame is a 4-byte big-endian unsigned length N followed by N bytes of
the frame's canonical JSON, N <= 4 MiB. Sessions open with a hello frame
(schema_version "1") and close with bye. Decoding is strict: a malformed
frame poisons the session, resynchronization is not attempted.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Optional

from .domain import AccelSample, SnapshotRef, VitalSample, canonical_json
from .errors import RemoniError

SCHEMA_VERSION = "1"
DEFAULT_PORT = 7400
MAX_FRAME_BYTES = 4 * 1024 * 1024
HEADER = struct.Struct(">I")

FRAME_KINDS = ("hello", "accel_batch", "vitals", "snapshot", "heartbeat", "bye")


class FrameTooLarge(RemoniError):
    pass


class LengthOverflow(RemoniError):
    pass


class MalformedJson(RemoniError):
    pass


class UnknownKind(RemoniError):
    pass


class ProtocolViolation(RemoniError):
    pass


@dataclass(frozen=True)
class Frame:
    kind: str
    device_id: Optional[str] = None
    patient_id: Optional[str] = None
    schema_version: Optional[str] = None
    samples: tuple = ()                      # accel_batch
    vitals: Optional[VitalSample] = None     # vitals
    snapshot: Optional[SnapshotRef] = None   # snapshot

    @staticmethod
    def hello(device_id: str, patient_id: str) -> "Frame":
        return Frame(kind="hello", device_id=device_id, patient_id=patient_id,
                     schema_version=SCHEMA_VERSION)

    @staticmethod
    def accel_batch(samples) -> "Frame":
        return Frame(kind="accel_batch", samples=tuple(samples))

    @staticmethod
    def of_vitals(sample: VitalSample) -> "Frame":
        return Frame(kind="vitals", vitals=sample)

    @staticmethod
    def of_snapshot(snap: SnapshotRef) -> "Frame":
        return Frame(kind="snapshot", snapshot=snap)

    def to_json(self) -> dict:
        if self.kind == "hello":
            return {
                "kind": "hello",
                "device_id": self.device_id,
                "patient_id": self.patient_id,
                "schema_version": self.schema_version,
            }
        if self.kind == "accel_batch":
            return {"kind": "accel_batch", "samples": [s.to_json() for s in self.samples]}
        if self.kind == "vitals":
            assert self.vitals is not None
            return {"kind": "vitals", "sample": self.vitals.to_json()}
        if self.kind == "snapshot":
            assert self.snapshot is not None
            return {"kind": "snapshot", "snapshot": self.snapshot.to_json()}
        return {"kind": self.kind}  # heartbeat / bye

    @classmethod
    def from_json(cls, d: dict) -> "Frame":
        kind = d.get("kind")
        if kind not in FRAME_KINDS:
            raise UnknownKind(f"unknown frame kind {kind!r}")
        try:
            if kind == "hello":
                return cls(
                    kind="hello",
                    device_id=str(d["device_id"]),
                    patient_id=str(d["patient_id"]),
                    schema_version=str(d["schema_version"]),
                )
            if kind == "accel_batch":
                samples = tuple(AccelSample.from_json(s) for s in d["samples"])
                if not samples:
                    raise MalformedJson("accel_batch must be non-empty")
                ts = [s.t for s in samples]
                if any(b <= a for a, b in zip(ts, ts[1:])):
                    raise MalformedJson("accel_batch samples must be time-ordered")
                return cls(kind="accel_batch", samples=samples)
            if kind == "vitals":
                return cls(kind="vitals", vitals=VitalSample.from_json(d["sample"]))
            if kind == "snapshot":
                return cls(kind="snapshot", snapshot=SnapshotRef.from_json(d["snapshot"]))
            return cls(kind=kind)
        except (KeyError, TypeError, ValueError) as e:
            raise MalformedJson(f"bad {kind} frame body: {e}") from None


def encode(frame: Frame) -> bytes:
    payload = canonical_json(frame.to_json()).encode("utf-8")
    if len(payload) > MAX_FRAME_BYTES:
        raise FrameTooLarge(f"frame of {len(payload)} bytes exceeds {MAX_FRAME_BYTES}")
    return HEADER.pack(len(payload)) + payload


@dataclass
class Decoder:
    """Incremental frame decoder over a byte stream.

    feed() yields frames as complete prefixes arrive and never yields a
    frame from a strict prefix of its encoding. Errors are terminal for
    the session.
    """

    _buf: bytearray = field(default_factory=bytearray)

    def feed(self, data: bytes) -> list[Frame]:
        self._buf.extend(data)
        frames: list[Frame] = []
        while True:
            if len(self._buf) < HEADER.size:
                return frames
            (n,) = HEADER.unpack_from(self._buf)
            if n > MAX_FRAME_BYTES:
                raise LengthOverflow(f"declared length {n} exceeds {MAX_FRAME_BYTES}")
            if len(self._buf) < HEADER.size + n:
                return frames
            payload = bytes(self._buf[HEADER.size : HEADER.size + n])
            del self._buf[: HEADER.size + n]
            try:
                doc = json.loads(payload.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as e:
                raise MalformedJson(f"undecodable frame payload: {e}") from None
            if not isinstance(doc, dict):
                raise MalformedJson("frame payload must be a JSON object")
            frames.append(Frame.from_json(doc))

    @property
    def pending_bytes(self) -> int:
        return len(self._buf)


def check_hello(frame: Frame) -> Frame:
    """Session-level gate: the first frame must be a valid hello."""
    if frame.kind != "hello":
        raise ProtocolViolation(f"first frame must be hello, got {frame.kind!r}")
    if frame.schema_version != SCHEMA_VERSION:
        raise ProtocolViolation(
            f"schema_version {frame.schema_version!r} not supported (want {SCHEMA_VERSION!r})"
        )
    if not frame.patient_id:
        raise ProtocolViolation("hello carries an empty patient_id")
    return frame
