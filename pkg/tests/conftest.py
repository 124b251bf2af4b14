import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for oracles.py

from remoni.signal_prep import Window, preprocess
from remoni.wearable_sim import Event, Scenario, synth_accel

GRID_MS = 31  # nominal spacing used when fabricating windows directly


def make_window(data: np.ndarray, patient_id: str = "p", t_start: int = 0) -> Window:
    t = t_start + np.array([(1000 * k) // 32 for k in range(len(data))], dtype=np.int64)
    return Window(patient_id=patient_id, t_start=t_start, t=t, data=np.asarray(data, dtype=np.float64))


def constant_window(x: float, y: float, z: float) -> Window:
    return make_window(np.tile([x, y, z], (128, 1)))


def fall_windows(seed: int) -> list[Window]:
    """All windows of an 8 s scenario with one scripted fall at t=4 s."""
    s = Scenario(patient_id="p", duration_s=8.0, seed=seed, events=(Event(t_s=4.0, kind="fall"),))
    t, xyz = synth_accel(s)
    return preprocess(t, xyz, "p")


def adl_windows(seed: int, active: bool) -> list[Window]:
    events = (Event(t_s=1.0, kind="activity", name="writing", duration_s=6.0),) if active else ()
    s = Scenario(patient_id="p", duration_s=8.0, seed=seed, events=events)
    t, xyz = synth_accel(s)
    return preprocess(t, xyz, "p")


@pytest.fixture
def tmp_store(tmp_path):
    from remoni.store import Store

    return Store(tmp_path / "store")
