"""Activity/emotion recognition from snapshot images.

Two backends: `stub` deterministically reads the label the simulator
embeds in its placeholder PNGs; `mllm` sends the recognition system prompt
plus the image to a configured vision model and maps its free-form reply
onto the closed class sets (exact match first, then earliest substring
match; anything unmappable becomes unidentifiable).
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from ..domain import Activity, Emotion, SnapshotRef
from ..wearable_sim import read_snapshot_label
from .llm_client import ChatClient, MllmUnavailable


@dataclass(frozen=True)
class RecognitionResult:
    activity: Activity
    emotion: Emotion
    raw_model_text: str = ""

    def to_json(self) -> dict:
        return {
            "activity": self.activity.value,
            "emotion": self.emotion.value,
            "raw_model_text": self.raw_model_text,
        }


def recognition_system_prompt() -> str:
    return resources.files("remoni.nlp").joinpath("prompts/recognition_prompt.txt").read_text()


def _surface_forms(value: str) -> list[str]:
    forms = [value]
    if "_" in value:
        forms.append(value.replace("_", " "))
    return forms


def map_class(text: str, enum_cls):
    """Free-form model text -> enum member.

    Exact match on the whole (normalized) text wins; otherwise the class
    whose surface form appears earliest in the text (ties to the longer
    form); otherwise unidentifiable.
    """
    normalized = text.strip().lower()
    candidates = [m for m in enum_cls if m is not enum_cls.UNIDENTIFIABLE]
    for member in list(candidates) + [enum_cls.UNIDENTIFIABLE]:
        if normalized in _surface_forms(member.value):
            return member
    best = None  # (position, -length, member)
    for member in candidates:
        for form in _surface_forms(member.value):
            pos = normalized.find(form)
            if pos >= 0:
                key = (pos, -len(form))
                if best is None or key < best[0]:
                    best = (key, member)
    return best[1] if best else enum_cls.UNIDENTIFIABLE


def parse_model_reply(text: str) -> RecognitionResult:
    return RecognitionResult(
        activity=map_class(text, Activity),
        emotion=map_class(text, Emotion),
        raw_model_text=text,
    )


def recognize_stub(snapshot: SnapshotRef) -> RecognitionResult:
    label = read_snapshot_label(snapshot.media) or ""
    activity_token, _, emotion_token = label.partition("/")
    try:
        activity = Activity(activity_token)
    except ValueError:
        activity = Activity.UNIDENTIFIABLE
    try:
        emotion = Emotion(emotion_token)
    except ValueError:
        emotion = Emotion.UNIDENTIFIABLE
    return RecognitionResult(activity=activity, emotion=emotion, raw_model_text=label)


def recognize_mllm(snapshot: SnapshotRef, client: ChatClient) -> RecognitionResult:
    reply = client.complete(
        recognition_system_prompt(),
        "Identify the patient's activity and emotion in this image.",
        image=snapshot.media,
        mime=snapshot.mime,
    )
    return parse_model_reply(reply)


def recognize(
    snapshot: SnapshotRef,
    backend: str = "stub",
    client: ChatClient | None = None,
) -> RecognitionResult:
    if backend == "stub":
        return recognize_stub(snapshot)
    if backend == "mllm":
        if client is None:
            raise MllmUnavailable("no MLLM endpoint configured (set REMONI_MLLM_URL)")
        return recognize_mllm(snapshot, client)
    raise ValueError(f"unknown recognition backend {backend!r}")
