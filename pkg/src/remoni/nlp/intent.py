"""Intent detection: clinician question -> seven-key intent record.

The grammar backend is deterministic and fully offline: keyword sets pick
the vital signs and the plot/recognition/image flags, small patterns
resolve the patient and the date/time references against `now` (UTC).
The llm backend sends the intent system prompt plus the question to a
configured chat model and validates its JSON reply against the same
schema, retrying once before giving up.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from datetime import datetime, timedelta
from importlib import resources

from ..errors import RemoniError
from .llm_client import ChatClient, LlmUnavailable

INTENT_KEYS = (
    "patient_id",
    "list_date",
    "list_time",
    "vital_sign",
    "is_plot",
    "is_recognition",
    "is_image",
)

VITAL_SIGN_VOCAB = ("temperature", "heart_rate", "respiration_rate", "blood_pressure", "spo2")

# Keyword sets, matched case-insensitively on word boundaries.
_SIGN_PATTERNS = {
    "temperature": r"\btemperature\b|\bfever\b",
    "heart_rate": r"\bheart\s+rate\b|\bpulse\b",
    "respiration_rate": r"\bbreathing\b|\brespiration\b",
    "blood_pressure": r"\bblood\s+pressure\b",
    "spo2": r"\boxygen\b|\bspo2\b|\bsaturation\b",
}
_PLOT_RE = re.compile(r"\bplot\b|\bchart\b|\bgraph\b", re.I)
_RECOGNITION_RE = re.compile(
    r"\bdoing\b|\bactivity\b|\bemotion\b|\bmood\b|\bfeel(?:s|ing)?\b|\bstate\b", re.I
)
_IMAGE_RE = re.compile(r"\bshow\b|\bpicture\b|\bimage\b|\bsnapshot\b|\bsee\b", re.I)

_PATIENT_RE = re.compile(r"\bpatient\s+#?([A-Za-z0-9_-]+)", re.I)
_ON_DATE_RE = re.compile(r"\bon\s+(\d{4}-\d{2}-\d{2})\b", re.I)
_LAST_N_DAYS_RE = re.compile(r"\blast\s+(\d+)\s+days?\b", re.I)
_AT_TIME_RE = re.compile(r"\bat\s+(\d{1,2}):(\d{2})\b", re.I)

_DAYPARTS = {"morning": ("06:00", "12:00"), "afternoon": ("12:00", "18:00"), "evening": ("18:00", "24:00")}


class MissingPatient(RemoniError):
    pass


class LlmSchemaError(RemoniError):
    pass


@dataclass(frozen=True)
class IntentRecord:
    """The seven-key JSON intent object.

    Empty list_date and list_time together mean an instant query answered
    from the edge's latest data; anything else routes to cloud storage.
    """

    patient_id: str
    list_date: tuple[str, ...] = ()
    list_time: tuple[tuple[str, str], ...] = ()
    vital_sign: tuple[str, ...] = ()
    is_plot: bool = False
    is_recognition: bool = False
    is_image: bool = False

    def to_json(self) -> dict:
        return {
            "patient_id": self.patient_id,
            "list_date": list(self.list_date),
            "list_time": [list(r) for r in self.list_time],
            "vital_sign": list(self.vital_sign),
            "is_plot": self.is_plot,
            "is_recognition": self.is_recognition,
            "is_image": self.is_image,
        }

    @classmethod
    def from_json(cls, d: dict) -> "IntentRecord":
        if not isinstance(d, dict) or set(d.keys()) != set(INTENT_KEYS):
            raise LlmSchemaError(
                f"intent must carry exactly the keys {list(INTENT_KEYS)}, got "
                f"{sorted(d.keys()) if isinstance(d, dict) else type(d).__name__}"
            )
        if not isinstance(d["patient_id"], str) or not d["patient_id"]:
            raise LlmSchemaError("patient_id must be a non-empty string")
        for key in ("is_plot", "is_recognition", "is_image"):
            if not isinstance(d[key], bool):
                raise LlmSchemaError(f"{key} must be a boolean")
        for sign in d["vital_sign"]:
            if sign not in VITAL_SIGN_VOCAB:
                raise LlmSchemaError(f"unknown vital_sign {sign!r}")
        dates = []
        for day in d["list_date"]:
            try:
                datetime.strptime(day, "%Y-%m-%d")
            except (TypeError, ValueError):
                raise LlmSchemaError(f"bad date {day!r}") from None
            dates.append(day)
        times = []
        for pair in d["list_time"]:
            if len(pair) != 2:
                raise LlmSchemaError(f"bad time range {pair!r}")
            times.append((str(pair[0]), str(pair[1])))
        return cls(
            patient_id=d["patient_id"],
            list_date=tuple(dates),
            list_time=tuple(times),
            vital_sign=tuple(d["vital_sign"]),
            is_plot=d["is_plot"],
            is_recognition=d["is_recognition"],
            is_image=d["is_image"],
        )

    @property
    def is_instant(self) -> bool:
        return not self.list_date and not self.list_time


def intent_system_prompt() -> str:
    return resources.files("remoni.nlp").joinpath("prompts/intent_prompt.txt").read_text()


def _resolve_patient(question: str, name_map: dict[str, str] | None) -> str:
    m = _PATIENT_RE.search(question)
    if m:
        return m.group(1)
    if name_map:
        lowered = question.lower()
        for name, pid in sorted(name_map.items(), key=lambda kv: -len(kv[0])):
            if re.search(rf"\b{re.escape(name.lower())}\b", lowered):
                return pid
    raise MissingPatient(f"no patient resolvable from question {question!r}")


def _resolve_dates(question: str, today) -> list[str]:
    dates: set = set()
    if re.search(r"\btoday\b", question, re.I):
        dates.add(today)
    if re.search(r"\byesterday\b", question, re.I):
        dates.add(today - timedelta(days=1))
    for m in _ON_DATE_RE.finditer(question):
        dates.add(datetime.strptime(m.group(1), "%Y-%m-%d").date())
    for m in _LAST_N_DAYS_RE.finditer(question):
        n = max(1, int(m.group(1)))
        for i in range(n):  # the n most recent days, today included
            dates.add(today - timedelta(days=i))
    return [d.isoformat() for d in sorted(dates)]


def _resolve_times(question: str) -> list[tuple[str, str]]:
    ranges: list[tuple[str, str]] = []
    for m in _AT_TIME_RE.finditer(question):
        hh, mm = int(m.group(1)), int(m.group(2))
        if hh > 23 or mm > 59:
            continue
        end_h, end_m = (hh, mm + 1) if mm < 59 else (hh + 1, 0)
        ranges.append((f"{hh:02d}:{mm:02d}", f"{end_h:02d}:{end_m:02d}"))
    lowered = question.lower()
    for word, span in _DAYPARTS.items():
        if re.search(rf"\b{word}\b", lowered):
            ranges.append(span)
    seen = set()
    out = []
    for r in ranges:
        if r not in seen:
            seen.add(r)
            out.append(r)
    return out


def detect_intent_grammar(
    question: str,
    now: datetime,
    name_map: dict[str, str] | None = None,
) -> IntentRecord:
    """Deterministic rule backend; total over non-empty questions except
    for MissingPatient."""
    if not question.strip():
        raise ValueError("question must be non-empty")
    patient_id = _resolve_patient(question, name_map)
    signs = tuple(s for s in VITAL_SIGN_VOCAB if re.search(_SIGN_PATTERNS[s], question, re.I))
    return IntentRecord(
        patient_id=patient_id,
        list_date=tuple(_resolve_dates(question, now.date())),
        list_time=tuple(_resolve_times(question)),
        vital_sign=signs,
        is_plot=bool(_PLOT_RE.search(question)),
        is_recognition=bool(_RECOGNITION_RE.search(question)),
        is_image=bool(_IMAGE_RE.search(question)),
    )


def _strip_code_fence(text: str) -> str:
    text = text.strip()
    if text.startswith("```"):
        text = re.sub(r"^```[a-zA-Z]*\n?", "", text)
        text = re.sub(r"\n?```$", "", text)
    return text.strip()


def detect_intent_llm(question: str, now: datetime, client: ChatClient) -> IntentRecord:
    """LLM backend: one retry on a schema-invalid reply, then LlmSchemaError."""
    system = intent_system_prompt() + f"\nCurrent date (UTC): {now.date().isoformat()}"
    last: Exception | None = None
    for _ in range(2):
        reply = client.complete(system, question)
        try:
            return IntentRecord.from_json(json.loads(_strip_code_fence(reply)))
        except (json.JSONDecodeError, LlmSchemaError) as e:
            last = e
    raise LlmSchemaError(f"model reply failed intent schema twice: {last}")


def detect_intent(
    question: str,
    now: datetime,
    backend: str = "grammar",
    name_map: dict[str, str] | None = None,
    client: ChatClient | None = None,
) -> IntentRecord:
    if backend == "grammar":
        return detect_intent_grammar(question, now, name_map)
    if backend == "llm":
        if client is None:
            raise LlmUnavailable("no LLM endpoint configured (set REMONI_LLM_URL)")
        return detect_intent_llm(question, now, client)
    raise ValueError(f"unknown intent backend {backend!r}")
