"""Accelerometer preprocessing: range rescaling, rate downsampling, windowing.

Raw streams arrive at 238 Hz with a ±8 g range; downstream detection runs
on ±1 g, 32 Hz signals cut into fixed windows of 128 samples (4.0 s) with
50 % overlap.

Batch functions operate on numpy arrays: timestamps as int64 milliseconds,
components as float64 of shape (n, 3). Streaming counterparts (used by the
edge node) produce bit-identical output to the batch functions when fed the
same stream.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

import numpy as np

from .domain import AccelSample
from .errors import RemoniError

RAW_HZ = 238
TARGET_HZ = 32
WINDOW_LEN = 128          # 4.0 s at 32 Hz
WINDOW_STRIDE = 64        # 50 % overlap


class TooFewSamples(RemoniError):
    pass


@dataclass(frozen=True)
class Window:
    """Fixed-length segment of the normalized 32 Hz stream.

    data has shape (128, 3) with all component magnitudes <= 1.0; t has
    shape (128,) and holds the integer-millisecond grid timestamps.
    """

    patient_id: str
    t_start: int
    t: np.ndarray
    data: np.ndarray

    def magnitudes(self) -> np.ndarray:
        return np.sqrt(np.sum(self.data * self.data, axis=1))


def rescale(xyz: np.ndarray, from_g: float = 8.0, to_g: float = 1.0) -> np.ndarray:
    """Map components v -> clamp(v * to_g/from_g, -to_g, +to_g).

    Timestamps are untouched (they are carried separately); output length
    equals input length. Total: never raises on finite input.
    """
    if from_g <= 0 or to_g <= 0:
        raise ValueError("g ranges must be positive")
    scaled = np.asarray(xyz, dtype=np.float64) * (to_g / from_g)
    return np.clip(scaled, -to_g, to_g)


def resample_grid(t0: int, span_ms: int, hz: int = TARGET_HZ) -> np.ndarray:
    """Integer-millisecond output grid t_k = t0 + floor(1000*k/hz).

    The ideal grid spacing (31.25 ms at 32 Hz) is not an integer, so grid
    points are the floor of the ideal times; spacing stays within 1 ms of
    the ideal. Covers k = 0 .. floor(span*hz/1000).
    """
    k_max = (span_ms * hz) // 1000
    k = np.arange(k_max + 1, dtype=np.int64)
    return t0 + (1000 * k) // hz


def resample(t: np.ndarray, xyz: np.ndarray, hz: int = TARGET_HZ) -> tuple[np.ndarray, np.ndarray]:
    """Downsample to `hz` by per-axis linear interpolation.

    Output timestamps follow resample_grid over the input span; each output
    value is the linear interpolation of the two bracketing input samples.
    Requires >= 2 strictly increasing input timestamps.
    """
    t = np.asarray(t, dtype=np.int64)
    xyz = np.asarray(xyz, dtype=np.float64)
    if len(t) < 2:
        raise TooFewSamples(f"need >= 2 samples to resample, got {len(t)}")
    if np.any(np.diff(t) <= 0):
        raise ValueError("input timestamps must be strictly increasing")
    grid = resample_grid(int(t[0]), int(t[-1] - t[0]), hz)
    out = np.empty((len(grid), xyz.shape[1]), dtype=np.float64)
    for axis in range(xyz.shape[1]):
        out[:, axis] = np.interp(grid, t, xyz[:, axis])
    return grid, out


def window(
    t: np.ndarray,
    xyz: np.ndarray,
    patient_id: str = "",
    length: int = WINDOW_LEN,
    stride: int = WINDOW_STRIDE,
) -> list[Window]:
    """Cut a uniform 32 Hz stream into overlapping windows.

    Windows are ordered by t_start; fewer than `length` samples yields an
    empty list. Every sample except the final tail (< stride samples beyond
    the last full window) appears in at least one window.
    """
    t = np.asarray(t, dtype=np.int64)
    xyz = np.asarray(xyz, dtype=np.float64)
    n = len(t)
    out: list[Window] = []
    for start in range(0, n - length + 1, stride):
        sl = slice(start, start + length)
        out.append(
            Window(
                patient_id=patient_id,
                t_start=int(t[start]),
                t=t[sl].copy(),
                data=xyz[sl].copy(),
            )
        )
    return out


def preprocess(
    t: np.ndarray, xyz: np.ndarray, patient_id: str = ""
) -> list[Window]:
    """Full pipeline: rescale 8 g -> 1 g, resample 238 -> 32 Hz, window."""
    gt, gv = resample(t, rescale(xyz))
    return window(gt, gv, patient_id=patient_id)


class StreamingResampler:
    """Incremental form of resample(): push raw samples, collect grid samples.

    Emits exactly the samples batch resample() would produce for the stream
    seen so far (the grid is anchored at the first pushed timestamp).
    """

    def __init__(self, hz: int = TARGET_HZ):
        self.hz = hz
        self._t0: Optional[int] = None
        self._prev: Optional[tuple[int, np.ndarray]] = None
        self._k = 0

    def _grid_t(self, k: int) -> int:
        assert self._t0 is not None
        return self._t0 + (1000 * k) // self.hz

    def push(self, t: int, xyz: np.ndarray) -> list[tuple[int, np.ndarray]]:
        xyz = np.asarray(xyz, dtype=np.float64)
        out: list[tuple[int, np.ndarray]] = []
        if self._prev is None:
            self._t0 = t
            self._prev = (t, xyz)
            return out
        pt, pv = self._prev
        if t <= pt:
            raise ValueError("input timestamps must be strictly increasing")
        # gate on the ideal grid time (1000k/hz), matching the batch count
        # formula; the emitted integer timestamp is its floor
        while 1000 * self._k <= self.hz * (t - (self._t0 or 0)):
            gt = self._grid_t(self._k)
            if gt < pt:  # unreachable once anchored, kept as a guard
                self._k += 1
                continue
            frac = (gt - pt) / (t - pt)
            out.append((gt, pv + (xyz - pv) * frac))
            self._k += 1
        self._prev = (t, xyz)
        return out


class StreamingWindower:
    """Incremental form of window(): push grid samples, collect Windows."""

    def __init__(self, patient_id: str = "", length: int = WINDOW_LEN, stride: int = WINDOW_STRIDE):
        self.patient_id = patient_id
        self.length = length
        self.stride = stride
        self._t: list[int] = []
        self._v: list[np.ndarray] = []

    def push(self, t: int, xyz: np.ndarray) -> list[Window]:
        self._t.append(t)
        self._v.append(np.asarray(xyz, dtype=np.float64))
        out: list[Window] = []
        while len(self._t) >= self.length:
            wt = np.array(self._t[: self.length], dtype=np.int64)
            wv = np.stack(self._v[: self.length])
            out.append(Window(self.patient_id, int(wt[0]), wt, wv))
            self._t = self._t[self.stride:]
            self._v = self._v[self.stride:]
        return out


def read_csv(path) -> tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    """Replay reader: CSV with header t_ms,x,y,z in g-units.

    An optional trailing `label` column (0/1) is returned as the third
    element when present, else None.
    """
    ts: list[int] = []
    rows: list[tuple[float, float, float]] = []
    labels: list[int] = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or reader.fieldnames[:4] != ["t_ms", "x", "y", "z"]:
            raise RemoniError(f"{path}: expected header t_ms,x,y,z")
        has_label = "label" in (reader.fieldnames or [])
        for row in reader:
            ts.append(int(row["t_ms"]))
            rows.append((float(row["x"]), float(row["y"]), float(row["z"])))
            if has_label:
                labels.append(int(row["label"]))
    t = np.array(ts, dtype=np.int64)
    xyz = np.array(rows, dtype=np.float64)
    lab = np.array(labels, dtype=np.int64) if labels else None
    return t, xyz, lab


def write_csv(path, t: np.ndarray, xyz: np.ndarray, labels: Optional[np.ndarray] = None) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        header = ["t_ms", "x", "y", "z"] + (["label"] if labels is not None else [])
        writer.writerow(header)
        for i in range(len(t)):
            row = [int(t[i]), repr(float(xyz[i, 0])), repr(float(xyz[i, 1])), repr(float(xyz[i, 2]))]
            if labels is not None:
                row.append(int(labels[i]))
            writer.writerow(row)


def samples_to_arrays(samples: Iterable[AccelSample]) -> tuple[np.ndarray, np.ndarray]:
    samples = list(samples)
    t = np.array([s.t for s in samples], dtype=np.int64)
    xyz = np.array([[s.x, s.y, s.z] for s in samples], dtype=np.float64)
    return t, xyz


def arrays_to_samples(t: np.ndarray, xyz: np.ndarray) -> Iterator[AccelSample]:
    for i in range(len(t)):
        yield AccelSample(int(t[i]), float(xyz[i, 0]), float(xyz[i, 1]), float(xyz[i, 2]))
