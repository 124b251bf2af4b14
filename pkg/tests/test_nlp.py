import json
from datetime import date, datetime, timezone

import pytest

from remoni.domain import Activity, Emotion, Patient, SnapshotRef, VitalSample
from remoni.errors import UnknownPatient
from remoni.nlp import (
    Engine,
    IntentRecord,
    LengthMismatch,
    LlmSchemaError,
    MissingPatient,
    detect_intent,
    evaluate_recognition,
    make_plot,
    plan,
    recognize,
)
from remoni.nlp.intent import INTENT_KEYS, detect_intent_llm
from remoni.nlp.plotting import EmptyData
from remoni.nlp.recognize import map_class, parse_model_reply
from remoni.store import Store, UploadBatch
from remoni.wearable_sim import render_snapshot_png

NOW = datetime(2025, 1, 10, 9, 0, tzinfo=timezone.utc)


class FakeChat:
    def __init__(self, replies):
        self.replies = list(replies)
        self.calls = []

    def complete(self, system, user, image=None, mime="image/png"):
        self.calls.append((system, user, image))
        return self.replies.pop(0)


class TestIntentRecord:
    def test_exactly_seven_keys(self):
        d = IntentRecord(patient_id="7").to_json()
        assert tuple(d.keys()) == INTENT_KEYS

    def test_schema_rejects_missing_or_extra_keys(self):
        good = IntentRecord(patient_id="7").to_json()
        missing = {k: v for k, v in good.items() if k != "is_plot"}
        with pytest.raises(LlmSchemaError):
            IntentRecord.from_json(missing)
        extra = dict(good, extra=1)
        with pytest.raises(LlmSchemaError):
            IntentRecord.from_json(extra)

    def test_schema_rejects_bad_sign(self):
        d = IntentRecord(patient_id="7").to_json()
        d["vital_sign"] = ["bp"]
        with pytest.raises(LlmSchemaError):
            IntentRecord.from_json(d)

    def test_round_trip(self):
        rec = IntentRecord(
            patient_id="7",
            list_date=("2025-01-09",),
            list_time=(("09:00", "09:01"),),
            vital_sign=("heart_rate",),
            is_plot=True,
        )
        assert IntentRecord.from_json(json.loads(json.dumps(rec.to_json()))) == rec

    def test_grammar_always_serializes_validly(self):
        questions = [
            "patient 1 pulse",
            "show chart of patient 2 today at 10:15 morning",
            "how does patient 3 feel about the evening of 2025-01-02",
        ]
        for q in questions:
            rec = detect_intent(q, NOW)
            assert IntentRecord.from_json(rec.to_json()) == rec

    def test_missing_patient(self):
        with pytest.raises(MissingPatient):
            detect_intent("how is the weather?", NOW)


class TestLlmBackend:
    def test_valid_reply_parses(self):
        reply = json.dumps(IntentRecord(patient_id="9", vital_sign=("spo2",)).to_json())
        client = FakeChat([reply])
        rec = detect_intent_llm("q", NOW, client)
        assert rec.patient_id == "9" and rec.vital_sign == ("spo2",)

    def test_code_fenced_reply_parses(self):
        body = json.dumps(IntentRecord(patient_id="9").to_json())
        client = FakeChat([f"```json\n{body}\n```"])
        assert detect_intent_llm("q", NOW, client).patient_id == "9"

    def test_retries_once_then_fails(self):
        client = FakeChat(["not json", "also not json"])
        with pytest.raises(LlmSchemaError):
            detect_intent_llm("q", NOW, client)
        assert len(client.calls) == 2

    def test_second_attempt_can_succeed(self):
        body = json.dumps(IntentRecord(patient_id="9").to_json())
        client = FakeChat(["garbage", body])
        assert detect_intent_llm("q", NOW, client).patient_id == "9"


class TestPlan:
    def test_instant_routes_to_edge(self):
        p = plan(IntentRecord(patient_id="1"))
        assert p.source == "edge_instant" and p.dates == ()

    def test_dates_route_to_store(self):
        p = plan(IntentRecord(patient_id="1", list_date=("2025-01-09",)))
        assert p.source == "store_historical"
        assert p.dates == (date(2025, 1, 9),)

    def test_time_only_defaults_to_today(self):
        p = plan(
            IntentRecord(patient_id="1", list_time=(("09:00", "09:01"),)),
            today=date(2025, 1, 10),
        )
        assert p.source == "store_historical"
        assert p.dates == (date(2025, 1, 10),)
        assert p.time_ranges == (("09:00", "09:01"),)

    def test_flags_copied(self):
        p = plan(IntentRecord(patient_id="1", is_plot=True, is_recognition=True, is_image=True))
        assert p.needs_plot and p.needs_recognition and p.needs_image


class TestRecognize:
    def snapshot(self, label: str) -> SnapshotRef:
        return SnapshotRef(t=0, patient_id="p", media=render_snapshot_png(label), mime="image/png")

    def test_stub_reads_embedded_label(self):
        out = recognize(self.snapshot("reading/neutral"))
        assert out.activity is Activity.READING and out.emotion is Emotion.NEUTRAL

    def test_stub_unknown_label_maps_to_unidentifiable(self):
        out = recognize(self.snapshot("juggling/ecstatic"))
        assert out.activity is Activity.UNIDENTIFIABLE
        assert out.emotion is Emotion.UNIDENTIFIABLE

    def test_substring_mapping(self):
        out = parse_model_reply("The person appears to be drinking water and looks happy.")
        assert out.activity is Activity.DRINKING and out.emotion is Emotion.HAPPY

    def test_no_class_token_is_unidentifiable(self):
        out = parse_model_reply("I cannot tell what is happening here.")
        assert out.activity is Activity.UNIDENTIFIABLE
        assert out.emotion is Emotion.UNIDENTIFIABLE

    def test_exact_match_wins(self):
        assert map_class("sitting_down", Activity) is Activity.SITTING_DOWN
        assert map_class("sitting down", Activity) is Activity.SITTING_DOWN
        assert map_class("unidentifiable", Emotion) is Emotion.UNIDENTIFIABLE

    def test_earliest_substring_wins(self):
        out = parse_model_reply("standing up after sitting down, looking sad not happy")
        assert out.activity is Activity.STANDING_UP
        assert out.emotion is Emotion.SAD

    def test_mllm_backend_uses_client(self):
        client = FakeChat(["activity: writing\nemotion: sad"])
        out = recognize(self.snapshot("x/y"), backend="mllm", client=client)
        assert out.activity is Activity.WRITING and out.emotion is Emotion.SAD
        system, _, image = client.calls[0]
        assert "unidentifiable" in system and image is not None


class TestMakePlot:
    def records(self, n=3):
        return [
            dict(t=1000 * k, temp=36.8, hr=70.0 + k, rr=16.0, sys=110.0, dia=70.0, spo2=98.0)
            for k in range(n)
        ]

    def test_single_sign_series(self):
        spec = make_plot(self.records(3), IntentRecord(patient_id="1", vital_sign=("heart_rate",)))
        assert len(spec.series) == 1
        assert spec.series[0]["sign"] == "heart_rate"
        assert len(spec.series[0]["points"]) == 3
        assert "heart_rate" in spec.y_label and "beats/min" in spec.y_label

    def test_empty_vital_sign_defaults_to_five_series(self):
        spec = make_plot(self.records(4), IntentRecord(patient_id="1"))
        assert len(spec.series) == 5

    def test_points_time_ordered(self):
        records = list(reversed(self.records(5)))
        spec = make_plot(records, IntentRecord(patient_id="1", vital_sign=("spo2",)))
        ts = [p[0] for p in spec.series[0]["points"]]
        assert ts == sorted(ts)

    def test_empty_records_raise(self):
        with pytest.raises(EmptyData):
            make_plot([], IntentRecord(patient_id="1"))


class TestEvaluateRecognition:
    # 6-item toy fixture, 3 classes; hand-computed before implementation:
    # accuracy 4/6, macro P = (1/2 + 2/3 + 1)/3 = 13/18,
    # macro R = (1/2 + 1 + 1/2)/3 = 2/3, macro F1 = (1/2 + 4/5 + 2/3)/3 = 59/90
    GOLD = [
        {"activity": "reading", "emotion": "happy"},
        {"activity": "reading", "emotion": "happy"},
        {"activity": "writing", "emotion": "sad"},
        {"activity": "writing", "emotion": "sad"},
        {"activity": "drinking", "emotion": "neutral"},
        {"activity": "drinking", "emotion": "neutral"},
    ]
    PRED = [
        {"activity": "reading", "emotion": "happy"},
        {"activity": "writing", "emotion": "sad"},
        {"activity": "writing", "emotion": "sad"},
        {"activity": "writing", "emotion": "sad"},
        {"activity": "drinking", "emotion": "neutral"},
        {"activity": "reading", "emotion": "happy"},
    ]

    def test_toy_fixture_exact_values(self):
        out = evaluate_recognition(self.PRED, self.GOLD)
        for task in ("activity", "emotion"):
            assert out[task]["accuracy"] == pytest.approx(4 / 6)
            assert out[task]["macro_precision"] == pytest.approx(13 / 18)
            assert out[task]["macro_recall"] == pytest.approx(2 / 3)
            assert out[task]["macro_f1"] == pytest.approx(59 / 90)

    def test_perfect_predictions_are_all_ones(self):
        out = evaluate_recognition(self.GOLD, self.GOLD)
        for task in ("activity", "emotion"):
            assert out[task] == {
                "accuracy": 1.0,
                "macro_precision": 1.0,
                "macro_recall": 1.0,
                "macro_f1": 1.0,
            }

    def test_permutation_invariance(self):
        import random

        pairs = list(zip(self.PRED, self.GOLD))
        random.Random(3).shuffle(pairs)
        pred, gold = [p for p, _ in pairs], [g for _, g in pairs]
        assert evaluate_recognition(pred, gold) == evaluate_recognition(self.PRED, self.GOLD)

    def test_hand_counted_half_accuracy(self):
        gold = self.GOLD[:4]  # reading, reading, writing, writing
        pred = [self.GOLD[0], self.GOLD[2], self.GOLD[2], self.GOLD[0]]
        out = evaluate_recognition(pred, gold)  # hits at items 0 and 2 only
        assert out["activity"]["accuracy"] == pytest.approx(0.5)

    def test_unidentifiable_is_its_own_class(self):
        gold = [{"activity": "unidentifiable", "emotion": "unidentifiable"}]
        pred = [{"activity": "reading", "emotion": "unidentifiable"}]
        out = evaluate_recognition(pred, gold)
        assert out["activity"]["accuracy"] == 0.0
        assert out["emotion"]["accuracy"] == 1.0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            evaluate_recognition(self.PRED[:2], self.GOLD)

    def test_accepts_recognition_results(self):
        from remoni.nlp import RecognitionResult

        pred = [RecognitionResult(Activity.READING, Emotion.HAPPY)]
        gold = [{"activity": "reading", "emotion": "happy"}]
        assert evaluate_recognition(pred, gold)["activity"]["accuracy"] == 1.0


def seeded_engine(tmp_path, with_edge=True):
    store = Store(tmp_path / "store")
    day = "2025-01-09"
    base = int(datetime(2025, 1, 9, 8, 0, tzinfo=timezone.utc).timestamp() * 1000)
    vitals = tuple(
        VitalSample(t=base + k * 300_000, temp=36.8, hr=70.0 + (k % 5), rr=16.0,
                    sys=110.0, dia=70.0, spo2=98.0)
        for k in range(12)
    )
    snaps = tuple(
        SnapshotRef(t=base + k * 1_800_000, patient_id="7",
                    media=render_snapshot_png("reading/neutral"), mime="image/png")
        for k in range(3)
    )
    store.append(UploadBatch(
        batch_id="seed", patient_id="7",
        t_from=base, t_to=base + 12 * 300_000,
        vitals=vitals, snapshots=snaps,
    ))

    registry = {"7": Patient(patient_id="7", name="Alex Doe", date_of_birth=date(1950, 3, 2))}

    instant_snapshot = SnapshotRef(
        t=1_736_500_000_000, patient_id="7",
        media=render_snapshot_png("writing/sad"), mime="image/png",
    )

    def edge_fetch(pid):
        if pid != "7":
            raise UnknownPatient(pid)
        return {
            "patient_id": "7",
            "vitals": VitalSample(t=1_736_500_000_000, temp=36.9, hr=72.0, rr=15.0,
                                  sys=112.0, dia=71.0, spo2=97.0).to_json(),
            "snapshot": instant_snapshot.to_json(),
            "fall_score": None,
            "t": 1_736_500_000_000,
            "staleness_ms": 1200,
        }

    return Engine(store=store, registry=registry, edge_fetch=edge_fetch if with_edge else None)


class TestEngineAnswer:
    def test_instant_heart_rate(self, tmp_path):
        engine = seeded_engine(tmp_path)
        out = engine.answer("What is the current heart rate of patient 7?", now=NOW)
        assert "heart rate" in out.answer_text
        assert "72" in out.answer_text
        assert out.plot is None and out.image is None
        assert out.data_source == "edge"
        assert set(out.timings_ms) == {"intent_ms", "fetch_ms", "compose_ms", "total_ms"}

    def test_plot_question_attaches_12_points(self, tmp_path):
        engine = seeded_engine(tmp_path)
        out = engine.answer("Plot patient 7's heart rate on 2025-01-09.", now=NOW)
        assert out.plot is not None
        assert len(out.plot.series) == 1
        assert len(out.plot.series[0]["points"]) == 12

    def test_recognition_with_image(self, tmp_path):
        engine = seeded_engine(tmp_path)
        out = engine.answer("What is patient 7 doing right now? Show me.", now=NOW)
        assert "writing" in out.answer_text and "sad" in out.answer_text
        assert out.image is not None
        assert "recognize_ms" in out.timings_ms

    def test_recognize_stage_absent_without_recognition(self, tmp_path):
        engine = seeded_engine(tmp_path)
        out = engine.answer("What is the current heart rate of patient 7?", now=NOW)
        assert "recognize_ms" not in out.timings_ms

    def test_historical_recognition_uses_nearest_snapshot_and_says_so(self, tmp_path):
        engine = seeded_engine(tmp_path)
        out = engine.answer("What was patient 7 doing at 08:30 on 2025-01-09?", now=NOW)
        assert "reading" in out.answer_text
        assert "snapshot nearest the requested time" in out.answer_text

    def test_unknown_patient_propagates(self, tmp_path):
        engine = seeded_engine(tmp_path)
        with pytest.raises(UnknownPatient):
            engine.answer("What is the current heart rate of patient 99?", now=NOW)

    def test_edge_failure_falls_back_to_store(self, tmp_path):
        engine = seeded_engine(tmp_path)

        def broken(pid):
            raise ConnectionError("edge down")

        engine.edge_fetch = broken
        out = engine.answer("What is the current heart rate of patient 7?", now=NOW)
        assert "heart rate" in out.answer_text
        assert out.data_source == "store (edge unreachable)"

    def test_no_data_in_range_is_apologetic_not_crash(self, tmp_path):
        engine = seeded_engine(tmp_path)
        out = engine.answer("Plot patient 7's heart rate on 2024-12-25.", now=NOW)
        assert out.plot is None
        assert "no data" in out.answer_text.lower()

    def test_template_answer_deterministic(self, tmp_path):
        engine = seeded_engine(tmp_path)
        q = "Plot patient 7's temperature on 2025-01-09."
        a = engine.answer(q, now=NOW)
        b = engine.answer(q, now=NOW)
        assert a.answer_text == b.answer_text
        assert a.plot == b.plot
        assert a.intent == b.intent

    def test_intent_echoed_for_audit(self, tmp_path):
        engine = seeded_engine(tmp_path)
        out = engine.answer("Show me patient 7's pulse today.", now=NOW)
        assert out.intent.patient_id == "7"
        assert out.intent.is_image
