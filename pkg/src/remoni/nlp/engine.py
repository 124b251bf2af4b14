"""Assistant pipeline: intent detection -> data preparation -> final output.

An instant question (no dates, no times) is answered from the edge's
latest cached data; anything else queries the store. Recognition and
plotting run only when the intent asks for them. The final text comes
from either the offline deterministic template backend or a configured
chat model fed the composed endpoint prompt.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from datetime import date, datetime, timezone
from typing import Callable, Optional

from ..domain import Patient, SnapshotRef, ms_to_datetime
from ..errors import RemoniError, UnknownPatient
from .intent import VITAL_SIGN_VOCAB, IntentRecord, detect_intent
from .llm_client import ChatClient
from .plotting import EmptyData, PlotSpec, make_plot
from .recognize import RecognitionResult, recognize

log = logging.getLogger(__name__)

ANSWER_PREAMBLE = (
    "You are a remote health monitoring assistant for clinicians. Answer the "
    "user's question using only the data blocks below. Be concise and state "
    "numeric values with their units. If the data is insufficient, say so."
)

SIGN_LABELS = {
    "temperature": "temperature",
    "heart_rate": "heart rate",
    "respiration_rate": "respiration rate",
    "blood_pressure": "blood pressure",
    "spo2": "SpO2",
}
SIGN_UNITS = {
    "temperature": "°C",
    "heart_rate": "beats/min",
    "respiration_rate": "breaths/min",
    "blood_pressure": "mmHg",
    "spo2": "%",
}
_SIGN_FIELD = {
    "temperature": "temp",
    "heart_rate": "hr",
    "respiration_rate": "rr",
    "blood_pressure": "sys",
    "spo2": "spo2",
}


class FetchFailed(RemoniError):
    pass


@dataclass(frozen=True)
class DataPlan:
    """Where to fetch from and which optional stages to run."""

    source: str                      # edge_instant | store_historical
    dates: tuple[date, ...] = ()
    time_ranges: tuple[tuple[str, str], ...] = ()
    needs_recognition: bool = False
    needs_plot: bool = False
    needs_image: bool = False


def plan(intent: IntentRecord, today: date | None = None) -> DataPlan:
    """Instant iff both list_date and list_time are empty; a time-of-day
    range with no date implies today."""
    if intent.is_instant:
        source = "edge_instant"
        dates: tuple[date, ...] = ()
    else:
        source = "store_historical"
        if intent.list_date:
            dates = tuple(date.fromisoformat(d) for d in intent.list_date)
        else:
            dates = (today or datetime.now(timezone.utc).date(),)
    return DataPlan(
        source=source,
        dates=dates,
        time_ranges=intent.list_time,
        needs_recognition=intent.is_recognition,
        needs_plot=intent.is_plot,
        needs_image=intent.is_image,
    )


@dataclass(frozen=True)
class EndpointPrompt:
    """The ordered final prompt: preamble, patient info, recognition,
    vitals, then the user's question."""

    system_preamble: str
    patient_info: str
    vitals_block: str
    recognition_block: str = ""
    question: str = ""

    def render(self) -> str:
        blocks = [self.system_preamble, self.patient_info]
        if self.recognition_block:
            blocks.append(self.recognition_block)
        blocks.append(self.vitals_block)
        blocks.append(f"Question: {self.question}")
        return "\n\n".join(blocks)


@dataclass
class AssistantResponse:
    answer_text: str
    intent: IntentRecord
    timings_ms: dict
    plot: Optional[PlotSpec] = None
    image: Optional[SnapshotRef] = None
    recognition: Optional[RecognitionResult] = None
    data_source: str = ""

    def to_json(self) -> dict:
        return {
            "answer_text": self.answer_text,
            "intent": self.intent.to_json(),
            "timings_ms": self.timings_ms,
            "plot": self.plot.to_json() if self.plot else None,
            "image": self.image.to_json() if self.image else None,
            "recognition": self.recognition.to_json() if self.recognition else None,
            "data_source": self.data_source,
        }


def _fmt_value(sign: str, record: dict) -> str:
    if sign == "blood_pressure":
        return f"{record['sys']:.1f}/{record['dia']:.1f} {SIGN_UNITS[sign]}"
    return f"{record[_SIGN_FIELD[sign]]:.1f} {SIGN_UNITS[sign]}"


def _instant_sentences(signs, vitals: dict, staleness_ms: Optional[int]) -> list[str]:
    when = ms_to_datetime(int(vitals["t"])).strftime("%H:%M:%S UTC")
    suffix = f" (as of {when})"
    if staleness_ms is not None:
        suffix = f" (as of {when}, {staleness_ms / 1000:.1f}s ago)"
    return [
        f"Current {SIGN_LABELS[s]} is {_fmt_value(s, vitals)}{suffix}."
        for s in (signs or VITAL_SIGN_VOCAB)
    ]


def _historical_sentences(signs, records: list[dict], dates) -> list[str]:
    day_text = ", ".join(d.isoformat() for d in dates)
    out = []
    for s in signs or VITAL_SIGN_VOCAB:
        f = _SIGN_FIELD[s]
        values = [float(r[f]) for r in records if f in r]
        if not values:
            continue
        out.append(
            f"{SIGN_LABELS[s].capitalize()} on {day_text}: {len(values)} readings, "
            f"min {min(values):.1f}, max {max(values):.1f}, "
            f"mean {sum(values) / len(values):.1f} {SIGN_UNITS[s]}."
        )
    return out


def _recognition_sentence(rec: RecognitionResult, note: str = "") -> str:
    if rec.activity.value == "unidentifiable" and rec.emotion.value == "unidentifiable":
        text = "The patient's activity and emotion could not be identified"
    else:
        activity = (
            rec.activity.value.replace("_", " ")
            if rec.activity.value != "unidentifiable"
            else "not identifiable"
        )
        emotion = rec.emotion.value if rec.emotion.value != "unidentifiable" else "not identifiable"
        text = f"The patient appears to be {activity} and looks {emotion}"
    return f"{text}{note}."


class Engine:
    """Wires the assistant stages over a store, a patient registry and an
    instant-data fetcher (the edge)."""

    def __init__(
        self,
        store,
        registry: dict[str, Patient] | None = None,
        edge_fetch: Optional[Callable[[str], dict]] = None,
        intent_backend: str = "grammar",
        recognition_backend: str = "stub",
        answer_backend: str = "template",
        llm_client: ChatClient | None = None,
        mllm_client: ChatClient | None = None,
    ):
        self.store = store
        self.registry = registry if registry is not None else {}
        self.edge_fetch = edge_fetch
        self.intent_backend = intent_backend
        self.recognition_backend = recognition_backend
        self.answer_backend = answer_backend
        self.llm_client = llm_client
        self.mllm_client = mllm_client

    # -- data preparation ------------------------------------------------

    def _name_map(self) -> dict[str, str]:
        return {p.name: pid for pid, p in self.registry.items() if p.name}

    def _check_patient(self, patient_id: str) -> None:
        if self.registry and patient_id not in self.registry:
            raise UnknownPatient(patient_id)

    def _fetch_instant(self, patient_id: str) -> tuple[list[dict], Optional[SnapshotRef], Optional[int], str]:
        if self.edge_fetch is not None:
            try:
                instant = self.edge_fetch(patient_id)
                vitals = [instant["vitals"]] if instant.get("vitals") else []
                snap = (
                    SnapshotRef.from_json(instant["snapshot"])
                    if instant.get("snapshot")
                    else None
                )
                return vitals, snap, instant.get("staleness_ms"), "edge"
            except UnknownPatient:
                raise
            except Exception as e:
                log.warning("edge instant fetch failed, falling back to store: %s", e)
        latest = self.store.latest(patient_id, "vitals")
        snap_rec = self.store.latest(patient_id, "snapshots")
        snap = SnapshotRef.from_json(snap_rec) if snap_rec else None
        if latest is None and snap is None:
            raise FetchFailed("edge unreachable and no stored data")
        return ([latest] if latest else []), snap, None, "store (edge unreachable)"

    def _fetch_historical(self, patient_id: str, dplan: DataPlan) -> tuple[list[dict], Optional[SnapshotRef], str]:
        ranges = [list(r) for r in dplan.time_ranges] or None
        records = self.store.query(patient_id, dplan.dates, "vitals", time_ranges=ranges)
        snap = None
        if dplan.needs_image or dplan.needs_recognition:
            snaps = self.store.query(patient_id, dplan.dates, "snapshots", time_ranges=ranges)
            if snaps:
                if dplan.time_ranges:
                    hh, mm = dplan.time_ranges[0][0].split(":")
                    target_minute = int(hh) * 60 + int(mm)

                    def distance(rec):
                        dt = ms_to_datetime(int(rec["t"]))
                        return abs(dt.hour * 60 + dt.minute - target_minute)

                    snap = SnapshotRef.from_json(min(snaps, key=distance))
                else:
                    snap = SnapshotRef.from_json(snaps[-1])
        return records, snap, "store"

    # -- final output ----------------------------------------------------

    def _compose_template(
        self,
        intent: IntentRecord,
        dplan: DataPlan,
        records: list[dict],
        recognition: Optional[RecognitionResult],
        rec_note: str,
        plot: Optional[PlotSpec],
        image_attached: bool,
        staleness_ms: Optional[int],
        failure: str = "",
    ) -> str:
        sentences: list[str] = []
        # image/recognition-only questions skip the vitals block entirely
        vitals_wanted = bool(intent.vital_sign) or not (intent.is_image or intent.is_recognition)
        if failure:
            sentences.append(f"Sorry, I could not retrieve the requested data: {failure}")
        elif dplan.source == "edge_instant":
            if records and vitals_wanted:
                sentences.extend(_instant_sentences(intent.vital_sign, records[0], staleness_ms))
            elif vitals_wanted:
                sentences.append("No vitals have been received for this patient yet.")
        else:
            body = _historical_sentences(intent.vital_sign, records, dplan.dates) if vitals_wanted else []
            if body:
                sentences.extend(body)
            elif vitals_wanted:
                sentences.append("No data in the requested range.")
        if recognition is not None:
            sentences.append(_recognition_sentence(recognition, rec_note))
        elif intent.is_recognition:
            sentences.append("No snapshot is available to assess activity or emotion.")
        if plot is not None:
            n = sum(len(s["points"]) for s in plot.series)
            sentences.append(f"Plot attached ({len(plot.series)} series, {n} points).")
        elif intent.is_plot:
            sentences.append("There is no data in range to plot.")
        if image_attached:
            sentences.append("Snapshot attached.")
        elif intent.is_image:
            sentences.append("No snapshot is available.")
        return " ".join(sentences)

    def _compose_llm(self, prompt: EndpointPrompt) -> str:
        assert self.llm_client is not None
        return self.llm_client.complete(prompt.system_preamble, prompt.render())

    def _patient_info(self, patient_id: str) -> str:
        p = self.registry.get(patient_id)
        if p is None:
            return f"Patient: id {patient_id}"
        return (
            f"Patient: {p.name} (id {p.patient_id}), born {p.date_of_birth.isoformat()}."
            + (f" Notes: {p.notes}" if p.notes else "")
        )

    # -- entry point -------------------------------------------------------

    def answer(self, question: str, now: datetime | None = None) -> AssistantResponse:
        """Run the full pipeline; never crashes on downstream fetch errors."""
        now = now or datetime.now(timezone.utc)
        timings: dict[str, float] = {}
        t_total = time.perf_counter()

        t0 = time.perf_counter()
        intent = detect_intent(
            question,
            now,
            backend=self.intent_backend,
            name_map=self._name_map(),
            client=self.llm_client,
        )
        timings["intent_ms"] = (time.perf_counter() - t0) * 1000
        self._check_patient(intent.patient_id)
        dplan = plan(intent, today=now.date())

        records: list[dict] = []
        snapshot: Optional[SnapshotRef] = None
        staleness_ms: Optional[int] = None
        source = ""
        failure = ""
        t0 = time.perf_counter()
        try:
            if dplan.source == "edge_instant":
                records, snapshot, staleness_ms, source = self._fetch_instant(intent.patient_id)
            else:
                records, snapshot, source = self._fetch_historical(intent.patient_id, dplan)
        except UnknownPatient:
            raise
        except RemoniError as e:
            failure = str(e)
        timings["fetch_ms"] = (time.perf_counter() - t0) * 1000

        recognition = None
        rec_note = ""
        if dplan.needs_recognition and snapshot is not None:
            t0 = time.perf_counter()
            try:
                recognition = recognize(snapshot, self.recognition_backend, self.mllm_client)
            except RemoniError as e:
                log.warning("recognition failed: %s", e)
            if dplan.source == "store_historical" and recognition is not None:
                when = ms_to_datetime(snapshot.t).strftime("%H:%M UTC")
                rec_note = f" (based on the stored snapshot nearest the requested time, {when})"
            timings["recognize_ms"] = (time.perf_counter() - t0) * 1000

        plot = None
        if dplan.needs_plot and not failure:
            try:
                plot = make_plot(records, intent)
            except EmptyData:
                plot = None

        t0 = time.perf_counter()
        image = snapshot if (dplan.needs_image and snapshot is not None) else None
        if self.answer_backend == "llm" and self.llm_client is not None and not failure:
            vitals_lines = [str(r) for r in records[-50:]] or ["(no vitals data)"]
            prompt = EndpointPrompt(
                system_preamble=ANSWER_PREAMBLE,
                patient_info=self._patient_info(intent.patient_id),
                recognition_block=(
                    _recognition_sentence(recognition, rec_note) if recognition else ""
                ),
                vitals_block="Vitals records:\n" + "\n".join(vitals_lines),
                question=question,
            )
            try:
                text = self._compose_llm(prompt)
            except RemoniError as e:
                log.warning("llm compose failed, using template: %s", e)
                text = self._compose_template(
                    intent, dplan, records, recognition, rec_note, plot,
                    image is not None, staleness_ms, failure,
                )
        else:
            text = self._compose_template(
                intent, dplan, records, recognition, rec_note, plot,
                image is not None, staleness_ms, failure,
            )
        timings["compose_ms"] = (time.perf_counter() - t0) * 1000
        timings["total_ms"] = (time.perf_counter() - t_total) * 1000

        return AssistantResponse(
            answer_text=text,
            intent=intent,
            timings_ms=timings,
            plot=plot,
            image=image,
            recognition=recognition,
            data_source=source,
        )
