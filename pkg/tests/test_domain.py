import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from remoni.domain import (
    AccelSample,
    Activity,
    Alert,
    AlertKind,
    Emotion,
    Patient,
    SnapshotRef,
    VitalRanges,
    VitalSample,
    canonical_json,
    parse_activity,
    parse_emotion,
    validate_accel,
    validate_snapshot,
    validate_vitals,
)
from remoni.errors import ValidationError


def nominal_vitals(**overrides) -> VitalSample:
    base = dict(t=1000, temp=36.8, hr=72.0, rr=16.0, sys=110.0, dia=70.0, spo2=98.0)
    base.update(overrides)
    return VitalSample(**base)


class TestValidate:
    def test_zero_accel_ok(self):
        validate_accel(AccelSample(t=0, x=0.0, y=0.0, z=0.0))

    def test_accel_over_range_names_field(self):
        with pytest.raises(ValidationError) as e:
            validate_accel(AccelSample(t=0, x=0.0, y=8.5, z=0.0))
        assert e.value.field == "y"

    def test_spo2_out_of_range(self):
        with pytest.raises(ValidationError) as e:
            validate_vitals(nominal_vitals(spo2=101.0))
        assert e.value.field == "spo2"

    def test_sys_must_exceed_dia(self):
        with pytest.raises(ValidationError) as e:
            validate_vitals(nominal_vitals(sys=80.0, dia=90.0))
        assert e.value.field == "sys"

    def test_nominal_vitals_pass(self):
        validate_vitals(nominal_vitals())

    def test_non_finite_vitals(self):
        with pytest.raises(ValidationError):
            validate_vitals(nominal_vitals(hr=float("nan")))

    def test_snapshot_needs_media_and_image_mime(self):
        with pytest.raises(ValidationError):
            validate_snapshot(SnapshotRef(t=0, patient_id="p", media=b"", mime="image/png"))
        with pytest.raises(ValidationError):
            validate_snapshot(SnapshotRef(t=0, patient_id="p", media=b"x", mime="text/plain"))
        validate_snapshot(SnapshotRef(t=0, patient_id="p", media=b"x", mime="image/png"))

    def test_validate_is_pure(self):
        bad = nominal_vitals(spo2=101.0)
        for _ in range(3):
            with pytest.raises(ValidationError) as e:
                validate_vitals(bad)
            assert e.value.field == "spo2"


class TestEnums:
    @pytest.mark.parametrize("member", list(Activity))
    def test_activity_round_trip(self, member):
        assert parse_activity(member.value) is member

    @pytest.mark.parametrize("member", list(Emotion))
    def test_emotion_round_trip(self, member):
        assert parse_emotion(member.value) is member

    def test_unknown_tokens_rejected(self):
        with pytest.raises(ValidationError):
            parse_activity("jumping")
        with pytest.raises(ValidationError):
            parse_emotion("confused")

    def test_closed_sets(self):
        assert len(Activity) == 10  # nine classes + unidentifiable
        assert len(Emotion) == 6    # five classes + unidentifiable


class TestJsonRendering:
    def test_vitals_field_names(self):
        d = nominal_vitals().to_json()
        assert list(d) == ["t", "temp", "hr", "rr", "sys", "dia", "spo2"]
        assert VitalSample.from_json(d) == nominal_vitals()

    def test_accel_round_trip(self):
        s = AccelSample(t=5, x=0.1, y=-0.25, z=1.0)
        assert AccelSample.from_json(json.loads(canonical_json(s.to_json()))) == s

    def test_snapshot_media_round_trips_base64(self):
        s = SnapshotRef(t=9, patient_id="p7", media=b"\x89PNG...", mime="image/png")
        assert SnapshotRef.from_json(s.to_json()) == s

    def test_patient_round_trip(self):
        from datetime import date

        p = Patient(patient_id="7", name="Alex Doe", date_of_birth=date(1950, 3, 2), notes="x")
        assert Patient.from_json(p.to_json()) == p

    def test_alert_round_trip_and_optional_stamps(self):
        a = Alert(
            alert_id="p:fall:1",
            patient_id="p",
            kind=AlertKind.FALL,
            detail={"probability": 0.9},
            t_detected=100,
        )
        d = a.to_json()
        assert d["t_received"] is None and d["t_delivered"] is None
        assert Alert.from_json(d) == a
        stamped = a.stamped(t_received=110, t_delivered=115)
        assert stamped.t_detected <= stamped.t_received <= stamped.t_delivered

    @given(
        st.integers(min_value=0, max_value=2**53),
        st.floats(-8, 8, allow_nan=False),
        st.floats(-8, 8, allow_nan=False),
        st.floats(-8, 8, allow_nan=False),
    )
    def test_accel_json_round_trip_property(self, t, x, y, z):
        s = AccelSample(t=t, x=x, y=y, z=z)
        assert AccelSample.from_json(json.loads(canonical_json(s.to_json()))) == s


class TestVitalRanges:
    def test_defaults_match_clinical_values(self):
        r = VitalRanges()
        assert r.temp == (36.5, 37.2)
        assert r.hr == (60.0, 100.0)
        assert r.rr == (12.0, 20.0)
        assert r.sys == (90.0, 120.0)
        assert r.dia == (60.0, 80.0)
        assert r.spo2_min == 95.0

    def test_inverted_interval_rejected(self):
        with pytest.raises(ValidationError):
            VitalRanges(hr=(100.0, 60.0))

    def test_json_overrides(self):
        r = VitalRanges.from_json({"hr": [50, 110], "spo2_min": 92})
        assert r.hr == (50.0, 110.0)
        assert r.spo2_min == 92.0
        assert r.temp == (36.5, 37.2)
