"""Independent reference implementations used only by the test suite.

Each oracle is written straight from the defining equations, on a
different computational route than the library (explicit position loops
and per-gate slices instead of im2col/tensordot and fused gate matmuls),
so agreement between the two is meaningful evidence of correctness.
"""

from __future__ import annotations

import math
from datetime import datetime, timezone

import numpy as np


# -- neural forward pass -------------------------------------------------


def conv1d_same_oracle(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """y[t] = b + sum_k x_padded[t+k] @ kernel[k], then ReLU."""
    n, _ = x.shape
    k, _, c_out = kernel.shape
    pad = (k - 1) // 2
    xp = np.concatenate([np.zeros((pad, x.shape[1])), x, np.zeros((pad, x.shape[1]))])
    out = np.empty((n, c_out))
    for t in range(n):
        acc = bias.copy()
        for j in range(k):
            acc = acc + xp[t + j] @ kernel[j]
        out[t] = acc
    return np.where(out > 0.0, out, 0.0)


def maxpool2_oracle(x: np.ndarray) -> np.ndarray:
    rows = []
    for i in range(x.shape[0] // 2):
        rows.append(np.maximum(x[2 * i], x[2 * i + 1]))
    return np.stack(rows)


def _sig(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def lstm_oracle(seq: np.ndarray, wx: np.ndarray, wh: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Standard gates, computed one gate at a time from sliced parameters."""
    hidden = wh.shape[0]
    h = np.zeros(hidden)
    c = np.zeros(hidden)
    for x in seq:
        i = _sig(x @ wx[:, 0:hidden] + h @ wh[:, 0:hidden] + b[0:hidden])
        f = _sig(x @ wx[:, hidden:2 * hidden] + h @ wh[:, hidden:2 * hidden] + b[hidden:2 * hidden])
        g = np.tanh(x @ wx[:, 2 * hidden:3 * hidden] + h @ wh[:, 2 * hidden:3 * hidden] + b[2 * hidden:3 * hidden])
        o = _sig(x @ wx[:, 3 * hidden:4 * hidden] + h @ wh[:, 3 * hidden:4 * hidden] + b[3 * hidden:4 * hidden])
        c = f * c + i * g
        h = o * np.tanh(c)
    return h


def forward_oracle(weights, data: np.ndarray) -> float:
    """Probability of the full fixed architecture, by the layer equations."""
    h = conv1d_same_oracle(data, weights[("conv1", "kernel")], weights[("conv1", "bias")])
    h = maxpool2_oracle(h)
    h = conv1d_same_oracle(h, weights[("conv2", "kernel")], weights[("conv2", "bias")])
    h = maxpool2_oracle(h)
    state = lstm_oracle(
        h, weights[("lstm", "kernel")], weights[("lstm", "recurrent")], weights[("lstm", "bias")]
    )
    logit = 0.0
    for j in range(state.shape[0]):
        logit += state[j] * weights[("dense", "kernel")][j, 0]
    logit += weights[("dense", "bias")][0]
    return 1.0 / (1.0 + math.exp(-logit))


# -- resampling ------------------------------------------------------------


def resample_oracle(t: np.ndarray, xyz: np.ndarray, hz: int = 32, oversample: int = 10):
    """Downsample via a 10x-oversampled intermediate grid.

    The signal is first linearly interpolated onto a dense grid at
    oversample*hz, then each output point takes the nearest dense value.
    Output times follow the same integer-millisecond grid as the library.
    """
    t = np.asarray(t, dtype=np.float64)
    span = t[-1] - t[0]
    k_max = int(span * hz) // 1000
    targets = t[0] + (1000 * np.arange(k_max + 1)) // hz

    step = 1000.0 / (hz * oversample)
    dense_t = t[0] + np.arange(int(span / step) + 1) * step
    out = np.empty((len(targets), xyz.shape[1]))
    for axis in range(xyz.shape[1]):
        dense_v = np.interp(dense_t, t, xyz[:, axis])
        idx = np.clip(np.round((targets - t[0]) / step).astype(int), 0, len(dense_t) - 1)
        out[:, axis] = dense_v[idx]
    return targets.astype(np.int64), out


# -- store query ---------------------------------------------------------


def brute_force_query(records, dates, time_ranges=None, sign_fields=None):
    """Reference filter for the partitioned store: date set intersection,
    half-open [hh:mm, hh:mm) time-of-day ranges, optional projection."""
    wanted_days = {d.isoformat() for d in dates}
    ranges = None
    if time_ranges:
        def minutes(text):
            hh, mm = text.split(":")
            return int(hh) * 60 + int(mm)
        ranges = [(minutes(a), minutes(b)) for a, b in time_ranges]

    out = []
    for rec in records:
        dt = datetime.fromtimestamp(int(rec["t"]) / 1000.0, tz=timezone.utc)
        if dt.date().isoformat() not in wanted_days:
            continue
        if ranges is not None:
            minute = dt.hour * 60 + dt.minute + dt.second / 60 + dt.microsecond / 6e7
            if not any(lo <= minute < hi for lo, hi in ranges):
                continue
        if sign_fields is not None:
            rec = {"t": rec["t"], **{f: rec[f] for f in sign_fields}}
        out.append(rec)
    out.sort(key=lambda r: int(r["t"]))
    return out
