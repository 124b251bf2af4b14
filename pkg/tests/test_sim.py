import threading

import numpy as np
import pytest

from remoni import protocol
from remoni.domain import Activity, Emotion
from remoni.fall_detector import detect_rule
from remoni.signal_prep import preprocess
from remoni.wearable_sim import (
    ConnectionRefused,
    Event,
    Scenario,
    build_frames,
    emit,
    read_snapshot_label,
    render_snapshot_png,
    synth_accel,
    synth_snapshots,
    synth_vitals,
)


def scenario(**overrides) -> Scenario:
    base = dict(patient_id="p1", duration_s=30.0, seed=7)
    base.update(overrides)
    return Scenario(**base)


class TestSynthAccel:
    def test_baseline_magnitude_mean_near_1g(self):
        t, xyz = synth_accel(scenario(seed=7))
        mags = np.sqrt((xyz ** 2).sum(axis=1))
        assert abs(mags.mean() - 1.0) <= 0.02  # frozen from a seeded run: 1.0026

    def test_sampling_rate_and_range(self):
        s = scenario(duration_s=2.0)
        t, xyz = synth_accel(s)
        assert len(t) == 476
        assert np.all(np.abs(xyz) <= 8.0)
        assert np.all(np.diff(t) > 0)

    def test_single_fall_gives_one_high_g_interval_at_event_time(self):
        s = scenario(duration_s=20.0, events=(Event(t_s=10.0, kind="fall"),))
        t, xyz = synth_accel(s)
        mags = np.sqrt((xyz ** 2).sum(axis=1))
        over = np.where(mags >= 3.0)[0]
        assert len(over) > 0
        assert np.all(np.diff(over) < 238)  # a single contiguous burst
        center_ms = (t[over[0]] + t[over[-1]]) / 2
        assert abs(center_ms - 10_000) <= 100

    def test_determinism(self):
        s = scenario(events=(Event(t_s=10.0, kind="fall"),))
        t1, x1 = synth_accel(s)
        t2, x2 = synth_accel(s)
        assert np.array_equal(t1, t2) and np.array_equal(x1, x2)

    def test_different_seeds_differ(self):
        _, x1 = synth_accel(scenario(seed=1))
        _, x2 = synth_accel(scenario(seed=2))
        assert not np.array_equal(x1, x2)

    def test_activity_raises_jitter_but_stays_below_fall_peaks(self):
        s = scenario(duration_s=20.0, events=(Event(t_s=2.0, kind="activity", name="writing", duration_s=16.0),))
        t, xyz = synth_accel(s)
        mags = np.sqrt((xyz ** 2).sum(axis=1))
        active = mags[(t >= 2000) & (t < 18_000)]
        assert active.std() > 0.15
        assert active.max() <= 2.5 + 1e-9


class TestSynthVitals:
    def test_sample_count(self):
        assert len(synth_vitals(scenario(duration_s=60.0))) == 12

    def test_baseline_within_seven_sigma(self):
        s = scenario(duration_s=600.0, baseline={**scenario().baseline, "hr": (72.0, 2.0)})
        out = synth_vitals(s)
        assert all(58.0 <= v.hr <= 86.0 for v in out)

    def test_excursion_pins_value(self):
        s = scenario(
            duration_s=120.0,
            events=(Event(t_s=60.0, kind="vital_excursion", sign="spo2", value=91.0, hold_s=30.0),),
        )
        for v in synth_vitals(s):
            if 60_000 <= v.t <= 90_000:
                assert v.spo2 == 91.0
            else:
                assert v.spo2 > 94.0

    def test_sys_always_above_dia(self):
        out = synth_vitals(scenario(duration_s=600.0, seed=123))
        assert all(v.sys > v.dia for v in out)


class TestSnapshots:
    def test_label_round_trip(self):
        png = render_snapshot_png("reading/neutral")
        assert read_snapshot_label(png) == "reading/neutral"

    def test_snapshots_follow_activity_schedule(self):
        s = scenario(
            duration_s=30.0,
            snapshot_period_s=10.0,
            idle_activity="sitting_down",
            idle_emotion="neutral",
            events=(Event(t_s=10.0, kind="activity", name="drinking", duration_s=10.0, emotion="happy"),),
        )
        snaps = synth_snapshots(s)
        assert len(snaps) == 3
        labels = [read_snapshot_label(x.media) for x in snaps]
        assert labels == ["sitting_down/neutral", "drinking/happy", "sitting_down/neutral"]
        for snap in snaps:
            assert snap.mime == "image/png"
            assert snap.media.startswith(b"\x89PNG")

    def test_labels_are_valid_enum_values(self):
        s = scenario(snapshot_period_s=5.0)
        for snap in synth_snapshots(s):
            activity, _, emotion = read_snapshot_label(snap.media).partition("/")
            Activity(activity)
            Emotion(emotion)


class TestFallToDetectorLink:
    def test_scripted_falls_satisfy_rule_after_preprocessing(self):
        detected = 0
        n = 40  # the acceptance suite runs the full 200
        for seed in range(n):
            s = Scenario(
                patient_id="p", duration_s=8.0, seed=seed, events=(Event(t_s=4.0, kind="fall"),)
            )
            t, xyz = synth_accel(s)
            if any(detect_rule(w).is_fall for w in preprocess(t, xyz, "p")):
                detected += 1
        assert detected == n


class _Receiver(threading.Thread):
    """Accepts one connection and decodes every frame."""

    def __init__(self):
        super().__init__(daemon=True)
        import socket

        self.sock = socket.socket()
        self.sock.bind(("127.0.0.1", 0))
        self.sock.listen(1)
        self.port = self.sock.getsockname()[1]
        self.frames = []

    def run(self):
        conn, _ = self.sock.accept()
        decoder = protocol.Decoder()
        while True:
            data = conn.recv(65536)
            if not data:
                break
            self.frames.extend(decoder.feed(data))
        conn.close()


class TestEmit:
    def test_frame_conservation_and_speedup(self):
        rx = _Receiver()
        rx.start()
        s = scenario(duration_s=10.0, speedup=10.0, vitals_period_s=2.0, snapshot_period_s=5.0)
        summary = emit(s, f"127.0.0.1:{rx.port}")
        rx.join(timeout=5)
        assert summary.error is None
        assert 0.8 <= summary.wall_time_s <= 1.4
        got = {}
        for f in rx.frames:
            got[f.kind] = got.get(f.kind, 0) + 1
        assert got["hello"] == 1 and got["bye"] == 1
        for kind in ("accel_batch", "vitals", "snapshot"):
            assert got.get(kind, 0) == summary.frames_sent.get(kind, 0)
        assert summary.frames_sent["vitals"] == 5
        assert summary.frames_sent["snapshot"] == 2

    def test_frames_are_time_ordered(self):
        s = scenario(duration_s=6.0, vitals_period_s=1.0, snapshot_period_s=2.0)
        frames = build_frames(s, t0_ms=0)
        times = [t for t, _ in frames]
        assert times == sorted(times)

    def test_refused_connection(self):
        with pytest.raises(ConnectionRefused):
            emit(scenario(duration_s=1.0, speedup=100.0), "127.0.0.1:1")

    def test_mid_stream_disconnect_reports_partial_summary(self):
        import socket as socket_mod

        srv = socket_mod.socket()
        srv.bind(("127.0.0.1", 0))
        srv.listen(1)
        port = srv.getsockname()[1]

        def accept_then_slam():
            conn, _ = srv.accept()
            conn.recv(1024)
            conn.setsockopt(socket_mod.SOL_SOCKET, socket_mod.SO_LINGER,
                            __import__("struct").pack("ii", 1, 0))
            conn.close()

        t = threading.Thread(target=accept_then_slam, daemon=True)
        t.start()
        summary = emit(scenario(duration_s=30.0, speedup=2.0, vitals_period_s=1.0),
                       f"127.0.0.1:{port}")
        assert summary.error is not None
        assert "disconnected mid-stream" in summary.error
        assert summary.frames_sent.get("bye", 0) == 0

    def test_payload_determinism(self):
        s = scenario(duration_s=4.0, vitals_period_s=1.0, snapshot_period_s=2.0, t0_ms=1000)
        a = [(t, protocol.encode(f)) for t, f in build_frames(s, 1000)]
        b = [(t, protocol.encode(f)) for t, f in build_frames(s, 1000)]
        assert a == b
