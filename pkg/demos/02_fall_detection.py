"""Fall detection on a seeded corpus: the feature-rule baseline and the
neural forward pass side by side.

The rule baseline looks for the canonical fall phases in each window:
an impact peak (>= 0.35 normalized), a free-fall dip just before it
(<= 0.06), and post-impact stillness (variance <= 1e-3). The neural path
runs the same windows through the fixed Conv1D+LSTM+sigmoid architecture;
here it carries seeded random weights, so its scores hover near 0.5 and
only the plumbing is demonstrated.

Run: python3 demos/02_fall_detection.py
"""

from remoni.fall_detector import detect_rule, featurize, infer, random_weights
from remoni.signal_prep import preprocess
from remoni.wearable_sim import Event, Scenario, synth_accel

N_FALLS, N_ADL = 30, 60

print(f"corpus: {N_FALLS} scripted falls, {N_ADL} ADL segments (8 s each)\n")

tp = fn = fp = 0
for seed in range(N_FALLS + N_ADL):
    if seed < N_FALLS:
        events = (Event(t_s=3.25 + 0.125 * (seed % 10), kind="fall"),)
    elif seed % 2 == 0:
        events = (Event(t_s=1.0, kind="activity", name="writing", duration_s=6.0),)
    else:
        events = ()
    s = Scenario(patient_id="demo", duration_s=8.0, seed=seed, events=events)
    t, xyz = synth_accel(s)
    fired = any(detect_rule(w).is_fall for w in preprocess(t, xyz, "demo"))
    if seed < N_FALLS:
        tp += fired
        fn += not fired
    else:
        fp += fired

recall = tp / N_FALLS
precision = tp / (tp + fp) if tp + fp else 1.0
print(f"rule baseline, per event: recall {recall:.3f}  precision {precision:.3f}")
print(f"  (tp={tp} fn={fn} fp={fp})\n")

s = Scenario(patient_id="demo", duration_s=8.0, seed=1, events=(Event(t_s=4.0, kind="fall"),))
t, xyz = synth_accel(s)
windows = preprocess(t, xyz, "demo")
weights = random_weights(seed=42)
print("one fall recording, window by window:")
print(f"{'t_start':>8} {'peak':>6} {'dip':>6} {'stillvar':>9} {'rule p':>7} {'neural p':>9}")
for w in windows:
    fv = featurize(w)
    rule = detect_rule(w)
    neural = infer(weights, w)
    print(
        f"{w.t_start:>8} {fv.peak_mag:>6.3f} {fv.min_mag:>6.3f} {fv.post_peak_var:>9.6f} "
        f"{rule.probability:>7.3f} {neural.probability:>9.3f}"
        + ("   FALL (rule)" if rule.is_fall else "")
    )
print("\n(the neural column becomes meaningful once trained weights are loaded")
print(" from a remoni-hdl-v1 JSON file via `remoni replay --model weights.json`)")
