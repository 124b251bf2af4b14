"""Threshold-based vital-sign anomaly detection with alert deduplication.

check() is a pure per-sample evaluation against the inclusive healthy
ranges. VitalsGuard adds per-(patient, sign) cooldown state: an alert
fires on the first out-of-range sample, repeats are suppressed for 60 s
unless the excursion doubles, and the cooldown resets once the sign
returns in range.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .domain import Alert, AlertKind, VitalRanges, VitalSample

DEFAULT_COOLDOWN_S = 60.0
ESCALATION_FACTOR = 2.0

SIGN_UNITS = {
    "temp": "°C",
    "hr": "beats/min",
    "rr": "breaths/min",
    "sys": "mmHg",
    "dia": "mmHg",
    "spo2": "%",
}


class Direction(Enum):
    LOW = "low"
    HIGH = "high"


@dataclass(frozen=True)
class Violation:
    sign: str
    value: float
    healthy_lo: float
    healthy_hi: Optional[float]  # absent for spo2 (lower bound only)
    direction: Direction

    @property
    def excess(self) -> float:
        """Distance from the nearest healthy bound, > 0 for violations."""
        if self.direction is Direction.LOW:
            return self.healthy_lo - self.value
        assert self.healthy_hi is not None
        return self.value - self.healthy_hi

    def to_json(self) -> dict:
        return {
            "sign": self.sign,
            "value": self.value,
            "healthy_lo": self.healthy_lo,
            "healthy_hi": self.healthy_hi,
            "direction": self.direction.value,
        }


def check(v: VitalSample, r: VitalRanges | None = None) -> list[Violation]:
    """One Violation per out-of-range sign; empty iff all healthy.

    Bounds are inclusive-healthy: a value equal to a bound is in range.
    """
    r = r or VitalRanges()
    out: list[Violation] = []
    for sign in ("temp", "hr", "rr", "sys", "dia"):
        lo, hi = getattr(r, sign)
        value = getattr(v, sign)
        if value < lo:
            out.append(Violation(sign, value, lo, hi, Direction.LOW))
        elif value > hi:
            out.append(Violation(sign, value, lo, hi, Direction.HIGH))
    if v.spo2 < r.spo2_min:
        out.append(Violation("spo2", v.spo2, r.spo2_min, None, Direction.LOW))
    return out


@dataclass
class _SignState:
    last_alert_t: int
    last_excess: float


class VitalsGuard:
    """Stateful alert gate over a per-patient, time-ordered vitals stream."""

    def __init__(self, ranges: VitalRanges | None = None, cooldown_s: float = DEFAULT_COOLDOWN_S):
        self.ranges = ranges or VitalRanges()
        self.cooldown_ms = cooldown_s * 1000.0
        self._state: dict[tuple[str, str], _SignState] = {}

    def observe(self, patient_id: str, sample: VitalSample, now_ms: int | None = None) -> list[Alert]:
        """Feed one sample; returns the alerts it triggers (possibly empty).

        Cooldown arithmetic runs on sample (stream) time; now_ms, when given,
        stamps t_detected with the wall clock instead of the stream clock
        (needed when replaying accelerated streams).
        """
        violations = {v.sign: v for v in check(sample, self.ranges)}
        alerts: list[Alert] = []

        # A sign back in range clears its cooldown.
        for key in [k for k in self._state if k[0] == patient_id]:
            if key[1] not in violations:
                del self._state[key]

        for sign, violation in violations.items():
            key = (patient_id, sign)
            state = self._state.get(key)
            fire = (
                state is None
                or sample.t - state.last_alert_t >= self.cooldown_ms
                or violation.excess >= ESCALATION_FACTOR * state.last_excess
            )
            if fire:
                self._state[key] = _SignState(sample.t, violation.excess)
                alerts.append(
                    Alert(
                        alert_id=f"{patient_id}:vital:{sign}:{sample.t}",
                        patient_id=patient_id,
                        kind=AlertKind.VITAL_OUT_OF_RANGE,
                        detail=violation.to_json(),
                        t_detected=sample.t if now_ms is None else now_ms,
                    )
                )
        return alerts
