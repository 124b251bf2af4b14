"""Append-only, partitioned persistence for vitals and snapshots.

Layout: <data_dir>/<patient>/<YYYY-MM-DD>/<kind>.ndjson with one canonical
JSON record per line, suffixed `#<crc32-hex>`. Appends are idempotent on
batch id and durable (fsync) before acknowledgment; lines that fail their
checksum (torn writes) are skipped with a warning on read.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import zlib
from dataclasses import dataclass, field
from datetime import date, datetime, time as dtime, timezone
from pathlib import Path
from typing import Iterable, Optional

from .domain import SnapshotRef, VitalSample, canonical_json, ms_to_date, ms_to_datetime
from .errors import RemoniError, UnknownPatient

log = logging.getLogger(__name__)

KINDS = ("vitals", "snapshots")

# Query vocabulary -> VitalSample fields; blood pressure projects both bounds.
SIGN_FIELDS = {
    "temperature": ("temp",),
    "heart_rate": ("hr",),
    "respiration_rate": ("rr",),
    "blood_pressure": ("sys", "dia"),
    "spo2": ("spo2",),
}


class StorageFull(RemoniError):
    pass


class CorruptPartition(RemoniError):
    pass


@dataclass(frozen=True)
class UploadBatch:
    """Periodic edge upload covering the half-open interval [t_from, t_to)."""

    batch_id: str
    patient_id: str
    t_from: int
    t_to: int
    vitals: tuple[VitalSample, ...] = ()
    snapshots: tuple[SnapshotRef, ...] = ()

    def to_json(self) -> dict:
        return {
            "batch_id": self.batch_id,
            "patient_id": self.patient_id,
            "t_from": self.t_from,
            "t_to": self.t_to,
            "vitals": [v.to_json() for v in self.vitals],
            "snapshots": [s.to_json() for s in self.snapshots],
        }

    @classmethod
    def from_json(cls, d: dict) -> "UploadBatch":
        return cls(
            batch_id=str(d["batch_id"]),
            patient_id=str(d["patient_id"]),
            t_from=int(d["t_from"]),
            t_to=int(d["t_to"]),
            vitals=tuple(VitalSample.from_json(v) for v in d.get("vitals", [])),
            snapshots=tuple(SnapshotRef.from_json(s) for s in d.get("snapshots", [])),
        )


def encode_line(record: dict) -> str:
    payload = canonical_json(record)
    crc = zlib.crc32(payload.encode("utf-8")) & 0xFFFFFFFF
    return f"{payload}#{crc:08x}"


def decode_line(line: str) -> Optional[dict]:
    """Parse one stored line; None if the checksum or JSON is bad."""
    payload, sep, crc_hex = line.rstrip("\n").rpartition("#")
    if not sep:
        return None
    try:
        if zlib.crc32(payload.encode("utf-8")) & 0xFFFFFFFF != int(crc_hex, 16):
            return None
        doc = json.loads(payload)
    except (ValueError, json.JSONDecodeError):
        return None
    return doc if isinstance(doc, dict) else None


def _parse_hhmm(text: str) -> int:
    hh, mm = text.split(":")
    minutes = int(hh) * 60 + int(mm)
    if not 0 <= minutes <= 24 * 60:
        raise ValueError(f"bad time of day {text!r}")
    return minutes


class Store:
    """Single-process store; appends are serialized, reads are lock-free."""

    def __init__(self, data_dir):
        self.root = Path(data_dir)
        self.root.mkdir(parents=True, exist_ok=True)
        self._append_lock = threading.Lock()
        self._applied: dict[str, set[str]] = {}

    # -- batch registry ------------------------------------------------

    def _batches_path(self, patient_id: str) -> Path:
        return self.root / patient_id / "_batches.ndjson"

    def _applied_ids(self, patient_id: str) -> set[str]:
        if patient_id not in self._applied:
            ids: set[str] = set()
            path = self._batches_path(patient_id)
            if path.exists():
                for line in path.read_text().splitlines():
                    doc = decode_line(line)
                    if doc is None:
                        log.warning("skipping corrupt batch-registry line in %s", path)
                        continue
                    ids.add(doc["batch_id"])
            self._applied[patient_id] = ids
        return self._applied[patient_id]

    # -- write side ----------------------------------------------------

    def append(self, batch: UploadBatch) -> dict:
        """Route records to (patient, date, kind) partitions.

        Replaying an already-applied batch id writes nothing. Records are
        durable before this returns.
        """
        with self._append_lock:
            applied = self._applied_ids(batch.patient_id)
            if batch.batch_id in applied:
                return {"records_written": 0}

            per_file: dict[Path, list[str]] = {}
            for kind, records in (("vitals", batch.vitals), ("snapshots", batch.snapshots)):
                for rec in records:
                    day = ms_to_date(rec.t).isoformat()
                    path = self.root / batch.patient_id / day / f"{kind}.ndjson"
                    per_file.setdefault(path, []).append(encode_line(rec.to_json()))

            written = 0
            try:
                for path, lines in sorted(per_file.items()):
                    path.parent.mkdir(parents=True, exist_ok=True)
                    with open(path, "a") as f:
                        f.write("\n".join(lines) + "\n")
                        f.flush()
                        os.fsync(f.fileno())
                    written += len(lines)
                reg = self._batches_path(batch.patient_id)
                reg.parent.mkdir(parents=True, exist_ok=True)
                with open(reg, "a") as f:
                    f.write(encode_line({"batch_id": batch.batch_id}) + "\n")
                    f.flush()
                    os.fsync(f.fileno())
            except OSError as e:
                if e.errno == 28:  # ENOSPC
                    raise StorageFull(str(e)) from None
                raise
            applied.add(batch.batch_id)
            return {"records_written": written}

    # -- read side -----------------------------------------------------

    def _read_partition(self, patient_id: str, day: date, kind: str) -> list[dict]:
        path = self.root / patient_id / day.isoformat() / f"{kind}.ndjson"
        if not path.exists():
            return []
        records: list[dict] = []
        for line in path.read_text().splitlines():
            if not line:
                continue
            doc = decode_line(line)
            if doc is None:
                log.warning("skipping corrupt line in %s", path)
                continue
            records.append(doc)
        return records

    def known_patients(self) -> list[str]:
        if not self.root.exists():
            return []
        return sorted(p.name for p in self.root.iterdir() if p.is_dir())

    def query(
        self,
        patient_id: str,
        dates: Iterable[date],
        kind: str = "vitals",
        time_ranges: Optional[list[tuple[str, str]]] = None,
        sign: Optional[str] = None,
    ) -> list[dict]:
        """Time-ordered records within the dates ∩ half-open time ranges.

        A sign filter projects the record down to t plus that sign's fields.
        Nothing matching is an empty list, not an error; an unknown patient
        is an error.
        """
        dates = list(dates)
        if not dates:
            raise ValueError("dates must be non-empty")
        if kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if not (self.root / patient_id).exists():
            raise UnknownPatient(patient_id)

        ranges = None
        if time_ranges:
            ranges = [(_parse_hhmm(a), _parse_hhmm(b)) for a, b in time_ranges]

        out: list[dict] = []
        for day in sorted(set(dates)):
            for rec in self._read_partition(patient_id, day, kind):
                if ranges is not None:
                    dt = ms_to_datetime(int(rec["t"]))
                    minute = dt.hour * 60 + dt.minute + dt.second / 60 + dt.microsecond / 6e7
                    if not any(lo <= minute < hi for lo, hi in ranges):
                        continue
                if sign is not None and kind == "vitals":
                    fields = SIGN_FIELDS.get(sign)
                    if fields is None:
                        raise ValueError(f"unknown sign {sign!r}")
                    rec = {"t": rec["t"], **{f: rec[f] for f in fields}}
                out.append(rec)
        out.sort(key=lambda r: int(r["t"]))
        return out

    def latest(self, patient_id: str, kind: str = "vitals") -> Optional[dict]:
        """Maximum-timestamp record of that kind; ties go to the
        later-appended line."""
        base = self.root / patient_id
        if not base.exists():
            return None
        best: Optional[dict] = None
        for day_dir in sorted(base.iterdir(), reverse=True):
            if not day_dir.is_dir():
                continue
            try:
                day = date.fromisoformat(day_dir.name)
            except ValueError:
                continue
            records = self._read_partition(patient_id, day, kind)
            for rec in records:
                if best is None or int(rec["t"]) >= int(best["t"]):
                    best = rec
            if best is not None:
                return best  # later dates cannot hold older maxima
        return best

    def day_bounds(self, day: date) -> tuple[int, int]:
        start = datetime.combine(day, dtime(0, 0), tzinfo=timezone.utc)
        return int(start.timestamp() * 1000), int(start.timestamp() * 1000) + 86_400_000
