"""Walk a synthetic fall through the accelerometer preprocessing pipeline.

Shows the three stages the edge applies to every raw stream: rescale the
±8 g signal to ±1 g, downsample 238 Hz -> 32 Hz by linear interpolation,
and cut the stream into 4 s windows with 50 % overlap.

Run: python3 demos/01_signal_pipeline.py
"""

import numpy as np

from remoni.signal_prep import rescale, resample, window
from remoni.wearable_sim import Event, Scenario, synth_accel

scenario = Scenario(
    patient_id="demo",
    duration_s=12.0,
    seed=11,
    events=(Event(t_s=6.0, kind="fall"),),
)
t, xyz = synth_accel(scenario)
mags = np.sqrt((xyz ** 2).sum(axis=1))
print(f"raw stream: {len(t)} samples at 238 Hz, span {t[-1] - t[0]} ms")
print(f"  magnitude: mean {mags.mean():.3f} g, min {mags.min():.3f} g, max {mags.max():.3f} g")
print(f"  (the dip below 0.4 g and the impact above 3 g are the fall signature)")

norm = rescale(xyz)
nmags = np.sqrt((norm ** 2).sum(axis=1))
print(f"\nafter rescale to ±1 g: max magnitude {nmags.max():.3f}")
print(f"  peak sample index preserved: {np.argmax(mags) == np.argmax(nmags)}")

gt, gv = resample(t, norm)
print(f"\nafter resample to 32 Hz: {len(gt)} samples, spacing {set(np.diff(gt).tolist())} ms")

windows = window(gt, gv, patient_id="demo")
print(f"\nwindowing: {len(windows)} windows of 128 samples (4.0 s), stride 64")
for w in windows:
    wm = w.magnitudes()
    marker = "  <-- contains the impact" if wm.max() > 0.35 else ""
    print(f"  window @ {w.t_start:6d} ms: peak magnitude {wm.max():.3f}{marker}")
