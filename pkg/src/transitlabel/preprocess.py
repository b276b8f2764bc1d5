"""Reorientation, smoothing, audio-band denoising and microphone gating."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .config import ConfigError, PreprocessConfig
from .model import SAMPLE_DT, Motion, SensorTrace


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrices for an (n, 4) array of w-x-y-z unit quaternions."""
    q = np.asarray(q, dtype=float)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    m = np.empty(q.shape[:-1] + (3, 3))
    m[..., 0, 0] = 1 - 2 * (y * y + z * z)
    m[..., 0, 1] = 2 * (x * y - w * z)
    m[..., 0, 2] = 2 * (x * z + w * y)
    m[..., 1, 0] = 2 * (x * y + w * z)
    m[..., 1, 1] = 1 - 2 * (x * x + z * z)
    m[..., 1, 2] = 2 * (y * z - w * x)
    m[..., 2, 0] = 2 * (x * z - w * y)
    m[..., 2, 1] = 2 * (y * z + w * x)
    m[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def axis_angle_quat(axis: Sequence[float], angle_rad: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    h = angle_rad / 2
    return np.concatenate([[np.cos(h)], np.sin(h) * axis])


def leveling_quaternions(gravity: np.ndarray) -> np.ndarray:
    """Shortest-arc rotations taking each measured gravity direction onto +z."""
    g = np.asarray(gravity, dtype=float)
    g = g / np.linalg.norm(g, axis=1, keepdims=True)
    up = np.array([0.0, 0.0, 1.0])
    axis = np.cross(g, up)
    dot = g @ up
    q = np.column_stack([1.0 + dot, axis])
    flipped = dot < -1 + 1e-12
    q[flipped] = [0.0, 1.0, 0.0, 0.0]
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def estimate_orientation(trace: SensorTrace, cutoff: float = 2.0) -> np.ndarray:
    """Fallback attitude: gravity direction from a first-order low-pass of accel.

    Only tilt is estimated; the horizontal frame keeps the device heading so
    that compass heading and gyro yaw rate remain available to the PDR.
    """
    a = np.asarray(trace.accel, dtype=float)
    k = SAMPLE_DT / (cutoff + SAMPLE_DT)
    g = np.empty_like(a)
    acc = a[0].copy()
    for i in range(len(a)):
        acc += k * (a[i] - acc)
        g[i] = acc
    return leveling_quaternions(g)


def to_world_frame(trace: SensorTrace, config: PreprocessConfig | None = None) -> SensorTrace:
    """Rotate accel, gyro and mag from the device frame into the world frame."""
    config = config or PreprocessConfig()
    q = trace.orientation
    if q is None:
        if not config.fallback_orientation:
            raise ConfigError("trace has no orientation and the estimation fallback is disabled")
        q = estimate_orientation(trace, config.gravity_cutoff)
    rot = quat_to_matrix(q)
    rotate = lambda v: np.einsum("nij,nj->ni", rot, v)  # noqa: E731
    identity = np.tile([1.0, 0.0, 0.0, 0.0], (len(trace.t), 1))
    return trace.replace(
        accel=rotate(trace.accel),
        gyro=rotate(trace.gyro),
        mag=rotate(trace.mag),
        orientation=identity,
    )


def _tricube(u: np.ndarray) -> np.ndarray:
    u = np.clip(np.abs(u), 0.0, 1.0)
    return (1 - u**3) ** 3


def smooth(series: Sequence[float], half_width: int = 10) -> np.ndarray:
    """Degree-1 LOWESS on the sample index with tricube weights.

    Every output point is the local linear fit over ``[i - half_width, i +
    half_width]``, truncated at the series ends.  Weights use a distance scale
    of ``half_width + 1`` so all points in the window contribute.
    """
    y = np.asarray(series, dtype=float)
    n = len(y)
    if half_width < 1:
        raise ValueError("half_width must be at least 1")
    if n < 2 * half_width + 1:
        raise ValueError(f"series of length {n} shorter than window {2 * half_width + 1}")
    d = np.arange(-half_width, half_width + 1, dtype=float)
    w = _tricube(d / (half_width + 1))
    pad = np.zeros(half_width)
    ypad = np.concatenate([pad, y, pad])
    mask = np.concatenate([pad, np.ones(n), pad])
    yw = sliding_window_view(ypad, 2 * half_width + 1)
    mw = sliding_window_view(mask, 2 * half_width + 1) * w
    s0 = mw.sum(axis=1)
    s1 = mw @ d
    s2 = mw @ (d * d)
    t0 = (mw * yw).sum(axis=1)
    t1 = (mw * yw) @ d
    det = s0 * s2 - s1 * s1
    return (s2 * t0 - s1 * t1) / det


def denoise_band(series: Sequence[float], window: int = 32) -> np.ndarray:
    """Centered moving average of width ``window``; edges average what exists.

    Output ``i`` averages inputs ``i - window//2`` through ``i + window - window//2 - 1``.
    """
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < window:
        raise ValueError(f"series of length {n} shorter than window {window}")
    left = window // 2
    c = np.concatenate([[0.0], np.cumsum(x)])
    lo = np.clip(np.arange(n) - left, 0, n)
    hi = np.clip(np.arange(n) - left + window, 0, n)
    return (c[hi] - c[lo]) / (hi - lo)


@dataclass(frozen=True)
class GatingSchedule:
    intervals: tuple[tuple[float, float], ...] = ()

    @property
    def total(self) -> float:
        return sum(b - a for a, b in self.intervals)


def stationary_bouts(states: Iterable[tuple[float, Motion]]) -> list[tuple[float, float]]:
    """Maximal stationary runs; each ends at the first non-stationary entry."""
    bouts = []
    start = None
    last_t = None
    for t, state in states:
        if Motion(state) is Motion.STATIONARY:
            if start is None:
                start = t
        elif start is not None:
            bouts.append((start, t))
            start = None
        last_t = t
    if start is not None and last_t is not None:
        bouts.append((start, last_t))
    return bouts


def gate_microphone(
    states: Iterable[tuple[float, Motion]], trigger: float = 4.0, cap: float = 60.0
) -> GatingSchedule:
    """Open the microphone ``trigger`` s into each stationary bout, for at most ``cap`` s."""
    intervals = []
    for start, end in stationary_bouts(states):
        if end - start <= trigger:
            continue
        on = start + trigger
        intervals.append((on, min(end, on + cap)))
    return GatingSchedule(tuple(intervals))
