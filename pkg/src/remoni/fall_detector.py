"""Window classification: fall vs non-fall.

Two detectors share the FallScore output type:

* a deterministic feature-rule baseline (impact peak + preceding free-fall
  dip + post-impact stillness), which needs no trained weights, and
* a from-scratch forward pass through a fixed Conv1D+LSTM+sigmoid
  architecture with a portable JSON weight format.

Fixed reference architecture (arch tag "remoni-hdl-v1"):

    input (128, 3)
    -> Conv1D(16 filters, kernel 5, stride 1, same padding, ReLU)
    -> MaxPool(2)
    -> Conv1D(32 filters, kernel 5, same, ReLU)
    -> MaxPool(2)                      # sequence (32, 32)
    -> LSTM(hidden 32, final state)    # gate order: input, forget, cell, output
    -> Dense(1) -> sigmoid
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .domain import FallSource
from .errors import RemoniError
from .signal_prep import TARGET_HZ, WINDOW_LEN, Window

ARCH_TAG = "remoni-hdl-v1"
DEFAULT_THRESHOLD = 0.5

# Rule-baseline thresholds on the normalized (+-1 g) signal. 0.35 ~ a 2.8 g
# impact, 0.06 ~ a 0.5 g free-fall dip, 1e-3 ~ post-impact stillness.
RULE_PEAK_MAG = 0.35
RULE_MIN_MAG = 0.06
RULE_STILL_VAR = 1e-3

PRE_PEAK_SAMPLES = TARGET_HZ // 2        # 0.5 s before the peak
POST_PEAK_SKIP = TARGET_HZ // 4          # clears the <=80 ms impact transient
POST_PEAK_SAMPLES = TARGET_HZ            # 1.0 s of settle time


class SchemaError(RemoniError):
    pass


class ShapeError(RemoniError):
    def __init__(self, layer: str, expected, got):
        self.layer = layer
        self.expected = expected
        self.got = got
        super().__init__(f"layer {layer!r}: expected shape {expected}, got {got}")


class NonFiniteError(RemoniError):
    pass


@dataclass(frozen=True)
class FallScore:
    probability: float
    is_fall: bool
    source: FallSource
    window_t_start: int
    threshold: float = DEFAULT_THRESHOLD

    def to_json(self) -> dict:
        return {
            "probability": self.probability,
            "is_fall": self.is_fall,
            "source": self.source.value,
            "window_t_start": self.window_t_start,
            "threshold": self.threshold,
        }

    @classmethod
    def from_json(cls, d: dict) -> "FallScore":
        return cls(
            probability=float(d["probability"]),
            is_fall=bool(d["is_fall"]),
            source=FallSource(d["source"]),
            window_t_start=int(d["window_t_start"]),
            threshold=float(d.get("threshold", DEFAULT_THRESHOLD)),
        )


@dataclass(frozen=True)
class FeatureVector:
    peak_mag: float
    min_mag: float
    post_peak_var: float
    max_jerk: float


# (kind, {array name: shape}) per layer, in network order. Array order within
# a layer is the flattening order of its values list.
ARCHITECTURE: list[tuple[str, str, dict[str, tuple[int, ...]]]] = [
    ("conv1", "conv1d", {"kernel": (5, 3, 16), "bias": (16,)}),
    ("pool1", "maxpool", {}),
    ("conv2", "conv1d", {"kernel": (5, 16, 32), "bias": (32,)}),
    ("pool2", "maxpool", {}),
    ("lstm", "lstm", {"kernel": (32, 128), "recurrent": (32, 128), "bias": (128,)}),
    ("dense", "dense", {"kernel": (32, 1), "bias": (1,)}),
]


@dataclass(frozen=True)
class ModelWeights:
    """Validated parameter arrays keyed by layer name then array name."""

    arrays: dict

    def __getitem__(self, key: tuple[str, str]) -> np.ndarray:
        return self.arrays[key]


def load_weights(document: dict) -> ModelWeights:
    """Validate a parsed weight-file document against the fixed architecture.

    Shape mismatches, unknown layers and non-finite values are rejected at
    load time so that inference itself never fails.
    """
    if not isinstance(document, dict):
        raise SchemaError("weight document must be a JSON object")
    if document.get("arch") != ARCH_TAG:
        raise SchemaError(f"arch must be {ARCH_TAG!r}, got {document.get('arch')!r}")
    layers = document.get("layers")
    if not isinstance(layers, list):
        raise SchemaError("layers must be a list")

    by_name = {}
    for entry in layers:
        if not isinstance(entry, dict) or "name" not in entry or "kind" not in entry:
            raise SchemaError("each layer needs name and kind")
        by_name[entry["name"]] = entry

    arrays: dict = {}
    for name, kind, spec in ARCHITECTURE:
        if not spec:  # maxpool carries no parameters; entry optional
            continue
        entry = by_name.pop(name, None)
        if entry is None:
            raise SchemaError(f"missing layer {name!r}")
        if entry["kind"] != kind:
            raise SchemaError(f"layer {name!r}: kind must be {kind!r}, got {entry['kind']!r}")
        shape_meta = entry.get("shape", {})
        for arr_name, want in spec.items():
            got = tuple(shape_meta.get(arr_name, ()))
            if got != want:
                raise ShapeError(name, {arr_name: list(want)}, {arr_name: list(got)})
        values = entry.get("values")
        total = sum(int(np.prod(s)) for s in spec.values())
        if not isinstance(values, list) or len(values) != total:
            raise SchemaError(
                f"layer {name!r}: values must hold {total} numbers, got "
                f"{len(values) if isinstance(values, list) else type(values).__name__}"
            )
        flat = np.asarray(values, dtype=np.float64)
        if not np.all(np.isfinite(flat)):
            raise NonFiniteError(f"layer {name!r} contains non-finite values")
        offset = 0
        for arr_name, shape in spec.items():
            size = int(np.prod(shape))
            arrays[(name, arr_name)] = flat[offset : offset + size].reshape(shape)
            offset += size

    leftovers = [n for n, e in by_name.items() if e.get("kind") != "maxpool"]
    if leftovers:
        raise SchemaError(f"unknown layers: {leftovers}")
    return ModelWeights(arrays=arrays)


def load_weights_file(path) -> ModelWeights:
    with open(path) as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as e:
            raise SchemaError(f"{path}: invalid JSON ({e})") from None
    return load_weights(document)


def dump_weights(weights: ModelWeights) -> dict:
    """Inverse of load_weights, for writing weight files."""
    layers = []
    for name, kind, spec in ARCHITECTURE:
        entry: dict = {"name": name, "kind": kind, "shape": {}, "values": []}
        if kind == "maxpool":
            entry["shape"] = {"pool": [2]}
        for arr_name, shape in spec.items():
            entry["shape"][arr_name] = list(shape)
            entry["values"].extend(weights[(name, arr_name)].reshape(-1).tolist())
        layers.append(entry)
    return {"arch": ARCH_TAG, "layers": layers}


def random_weights(seed: int, scale: float = 0.1) -> ModelWeights:
    """Seeded random parameters (useful for tests and demos, not trained)."""
    rng = np.random.default_rng(seed)
    arrays = {}
    for name, _, spec in ARCHITECTURE:
        for arr_name, shape in spec.items():
            arrays[(name, arr_name)] = rng.normal(0.0, scale, size=shape)
    return ModelWeights(arrays=arrays)


def _conv1d_same(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    # x: (n, c_in), kernel: (k, c_in, c_out); zero same-padding, stride 1
    k = kernel.shape[0]
    pad = (k - 1) // 2
    xp = np.pad(x, ((pad, pad), (0, 0)))
    windows = np.lib.stride_tricks.sliding_window_view(xp, k, axis=0)  # (n, c_in, k)
    out = np.tensordot(windows, kernel, axes=([2, 1], [0, 1])) + bias
    return np.maximum(out, 0.0)


def _maxpool2(x: np.ndarray) -> np.ndarray:
    n = x.shape[0] - (x.shape[0] % 2)
    return x[:n].reshape(n // 2, 2, x.shape[1]).max(axis=1)


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def conv_features(weights: ModelWeights, data: np.ndarray) -> np.ndarray:
    """The (32, 32) feature sequence entering the LSTM."""
    h = _conv1d_same(data, weights[("conv1", "kernel")], weights[("conv1", "bias")])
    h = _maxpool2(h)
    h = _conv1d_same(h, weights[("conv2", "kernel")], weights[("conv2", "bias")])
    return _maxpool2(h)


def _lstm_final_state(weights: ModelWeights, seq: np.ndarray) -> np.ndarray:
    wx = weights[("lstm", "kernel")]
    wh = weights[("lstm", "recurrent")]
    b = weights[("lstm", "bias")]
    hidden = wh.shape[0]
    h = np.zeros(hidden)
    c = np.zeros(hidden)
    for x_t in seq:
        z = x_t @ wx + h @ wh + b
        i = _sigmoid(z[0 * hidden : 1 * hidden])
        f = _sigmoid(z[1 * hidden : 2 * hidden])
        g = np.tanh(z[2 * hidden : 3 * hidden])
        o = _sigmoid(z[3 * hidden : 4 * hidden])
        c = f * c + i * g
        h = o * np.tanh(c)
    return h


def infer(weights: ModelWeights, w: Window, threshold: float = DEFAULT_THRESHOLD) -> FallScore:
    """Deterministic forward pass; probability strictly in (0, 1)."""
    if w.data.shape != (WINDOW_LEN, 3):
        raise ValueError(f"window data must be ({WINDOW_LEN}, 3), got {w.data.shape}")
    seq = conv_features(weights, w.data)
    h = _lstm_final_state(weights, seq)
    logit = float(h @ weights[("dense", "kernel")][:, 0] + weights[("dense", "bias")][0])
    p = float(_sigmoid(logit))
    return FallScore(
        probability=p,
        is_fall=p >= threshold,
        source=FallSource.NEURAL_MODEL,
        window_t_start=w.t_start,
        threshold=threshold,
    )


def featurize(w: Window) -> FeatureVector:
    """Magnitude features of one window.

    min_mag looks at the 0.5 s before the peak (the free-fall dip);
    post_peak_var measures stillness over 1.0 s after the peak, skipping
    0.25 s so the impact transient (<= 80 ms wide) cannot dominate the
    variance; max_jerk is the largest |d mag / dt| in g/s.
    """
    mags = w.magnitudes()
    p = int(np.argmax(mags))
    peak_mag = float(mags[p])

    pre = mags[max(0, p - PRE_PEAK_SAMPLES) : p]
    min_mag = float(pre.min()) if pre.size else peak_mag

    post = mags[p + POST_PEAK_SKIP : p + POST_PEAK_SKIP + POST_PEAK_SAMPLES]
    post_peak_var = float(post.var()) if post.size else 0.0

    dt_s = np.diff(w.t) / 1000.0
    jerk = np.abs(np.diff(mags)) / dt_s
    max_jerk = float(jerk.max()) if jerk.size else 0.0
    return FeatureVector(peak_mag, min_mag, post_peak_var, max_jerk)


def detect_rule(w: Window, threshold: float = DEFAULT_THRESHOLD) -> FallScore:
    """Feature-rule baseline.

    Fall iff peak_mag >= 0.35 and min_mag <= 0.06 and post_peak_var <= 1e-3.
    The probability is a monotone squashing of the worst normalized margin,
    so probability >= 0.5 exactly when all three conditions hold.
    """
    fv = featurize(w)
    margins = (
        (fv.peak_mag - RULE_PEAK_MAG) / RULE_PEAK_MAG,
        (RULE_MIN_MAG - fv.min_mag) / RULE_MIN_MAG,
        (RULE_STILL_VAR - fv.post_peak_var) / RULE_STILL_VAR,
    )
    margin = min(margins)
    p = 1.0 / (1.0 + math.exp(-4.0 * margin))
    return FallScore(
        probability=p,
        is_fall=p >= threshold,
        source=FallSource.RULE_BASELINE,
        window_t_start=w.t_start,
        threshold=threshold,
    )


def make_detector(weights: ModelWeights | None, threshold: float = DEFAULT_THRESHOLD):
    """Callable Window -> FallScore for the configured detector."""
    if weights is None:
        return lambda w: detect_rule(w, threshold)
    return lambda w: infer(weights, w, threshold)
