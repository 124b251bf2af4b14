"""Server-side plot preparation: vitals records -> PlotSpec.

The PlotSpec is pure data (series of (t, value) points plus labels); the
web UI renders it verbatim. Blood pressure contributes its systolic values
so the default all-signs plot stays at exactly five series.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import RemoniError
from .intent import VITAL_SIGN_VOCAB, IntentRecord

SIGN_UNITS = {
    "temperature": "°C",
    "heart_rate": "beats/min",
    "respiration_rate": "breaths/min",
    "blood_pressure": "mmHg (systolic)",
    "spo2": "%",
}
_SIGN_FIELD = {
    "temperature": "temp",
    "heart_rate": "hr",
    "respiration_rate": "rr",
    "blood_pressure": "sys",
    "spo2": "spo2",
}


class EmptyData(RemoniError):
    pass


@dataclass(frozen=True)
class PlotSpec:
    title: str
    x_label: str
    y_label: str
    series: tuple[dict, ...]

    def to_json(self) -> dict:
        return {
            "title": self.title,
            "x_label": self.x_label,
            "y_label": self.y_label,
            "series": [dict(s) for s in self.series],
        }


def make_plot(records: list[dict], intent: IntentRecord) -> PlotSpec:
    """One time-ordered series per requested sign (all five when the intent
    names none). Raises EmptyData when there is nothing to draw."""
    if not records:
        raise EmptyData("no records in the requested range")
    signs = intent.vital_sign or VITAL_SIGN_VOCAB
    ordered = sorted(records, key=lambda r: int(r["t"]))
    series = []
    for sign in signs:
        points = [
            [int(r["t"]), float(r[_SIGN_FIELD[sign]])]
            for r in ordered
            if _SIGN_FIELD[sign] in r
        ]
        series.append({"sign": sign, "points": points})
    if len(signs) == 1:
        y_label = f"{signs[0]} ({SIGN_UNITS[signs[0]]})"
    else:
        y_label = "value (per-sign units)"
    when = ", ".join(intent.list_date) if intent.list_date else "recent data"
    return PlotSpec(
        title=f"Patient {intent.patient_id}: {', '.join(signs)} ({when})",
        x_label="time (UTC)",
        y_label=y_label,
        series=tuple(series),
    )
