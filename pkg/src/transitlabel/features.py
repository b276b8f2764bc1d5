"""Windowed detectors turning preprocessed series into feature events.

All detectors take a 1-D series sampled at 50 Hz plus an optional matching
time axis; without one, sample ``i`` is at ``i / 50`` s.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .config import ThresholdProfile
from .model import SAMPLE_RATE, Motion

DEFAULT_PROFILE = ThresholdProfile()


@dataclass(frozen=True)
class MagneticPeak:
    start_t: float
    end_t: float
    strength: float  # uT above the pre-peak baseline

    @property
    def duration(self) -> float:
        return self.end_t - self.start_t

    @property
    def mid_t(self) -> float:
        return 0.5 * (self.start_t + self.end_t)


@dataclass(frozen=True)
class GyroSurge:
    t: float
    turn_angle: float  # degrees, signed (counter-clockwise positive)


@dataclass(frozen=True)
class MotionState:
    window_start_t: float
    state: Motion
    variance: float


@dataclass(frozen=True)
class ElevationEvent:
    start_t: float
    end_t: float
    delta_p: float  # hPa, end minus start
    ramp_start_t: float
    ramp_end_t: float

    @property
    def direction(self) -> str:
        return "up" if self.delta_p < 0 else "down"


def _time_axis(n: int, t: np.ndarray | None) -> np.ndarray:
    if t is None:
        return np.arange(n) / SAMPLE_RATE
    t = np.asarray(t, dtype=float)
    if len(t) != n:
        raise ValueError("time axis length does not match series")
    return t


def _trailing(x: np.ndarray, size: int, reducer) -> np.ndarray:
    """reducer over x[i - size + 1 .. i], edge-padded with x[0]."""
    padded = np.concatenate([np.full(size - 1, x[0]), x])
    return reducer(sliding_window_view(padded, size), axis=1)


def detect_magnetic_peaks(
    magnitude, profile: ThresholdProfile = DEFAULT_PROFILE, t=None
) -> list[MagneticPeak]:
    """Stream peak detector on the magnetic-field magnitude.

    A peak opens when the signal sits ``mag_peak_rise`` above the minimum of
    the trailing ``mag_peak_window`` samples; its start is that minimum.  It
    closes on the mirror condition (a drop of the same size below the trailing
    maximum) and the end is extended while the signal keeps falling.
    """
    x = np.asarray(magnitude, dtype=float)
    n = len(x)
    t = _time_axis(n, t)
    if n < 2:
        return []
    w = profile.mag_peak_window
    rise = profile.mag_peak_rise
    tmin = _trailing(x, w + 1, np.min)
    tmax = _trailing(x, w + 1, np.max)
    opens = np.flatnonzero(x - tmin >= rise)
    closes = np.flatnonzero(tmax - x >= rise)
    peaks = []
    i = 0
    while True:
        k = np.searchsorted(opens, i)
        if k >= len(opens):
            break
        o = opens[k]
        lo = max(i, o - w)  # never reach back into the previous peak
        seg = x[lo:o + 1]
        start = o - int(np.argmin(seg[::-1]))  # latest minimum: flat baselines start at the rise
        baseline = x[start]
        c = np.searchsorted(closes, o + 1)
        if c < len(closes):
            end = closes[c]
            while end + 1 < n and x[end + 1] < x[end] and x[end] - baseline > 0.1 * rise:
                end += 1
        else:
            end = n - 1
        strength = float(x[start:end + 1].max() - baseline)
        if t[end] > t[start] and strength >= rise:
            peaks.append(MagneticPeak(float(t[start]), float(t[end]), strength))
        i = end + 1
    return peaks


def integrate_heading(gyro_z, t=None) -> np.ndarray:
    """Unwrapped relative heading (degrees) from yaw rate (degrees/s)."""
    g = np.asarray(gyro_z, dtype=float)
    t = _time_axis(len(g), t)
    out = np.zeros(len(g))
    if len(g) > 1:
        out[1:] = np.cumsum(0.5 * (g[1:] + g[:-1]) * np.diff(t))
    return out


def detect_gyro_surges(heading, profile: ThresholdProfile = DEFAULT_PROFILE, t=None) -> list[GyroSurge]:
    h = np.asarray(heading, dtype=float)
    n = len(h)
    t = _time_axis(n, t)
    w = profile.surge_window
    if n <= w:
        return []
    diff = h[w:] - h[:-w]
    fire = np.flatnonzero(np.abs(diff) >= profile.surge_angle)
    surges = []
    if not fire.size:
        return surges
    groups = np.split(fire, np.flatnonzero(np.diff(fire) > w) + 1)
    for g in groups:
        best = g[int(np.argmax(np.abs(diff[g])))]
        surges.append(GyroSurge(float(t[best + w]), float(diff[best])))
    return surges


def windowed_variance(x, window: int, stride: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if len(x) < window:
        raise ValueError(f"series of length {len(x)} shorter than one window ({window})")
    view = sliding_window_view(x, window)[::stride]
    return view.var(axis=1)


def classify_motion(accel_magnitude, profile: ThresholdProfile = DEFAULT_PROFILE, t=None) -> list[MotionState]:
    x = np.asarray(accel_magnitude, dtype=float)
    t = _time_axis(len(x), t)
    var = windowed_variance(x, profile.var_window, profile.window_stride)
    states = []
    for k, v in enumerate(var):
        if v < profile.var_stationary:
            s = Motion.STATIONARY
        elif v < profile.var_slow:
            s = Motion.SLOW_WALK
        else:
            s = Motion.NORMAL_WALK
        states.append(MotionState(float(t[k * profile.window_stride]), s, float(v)))
    return states


def magnetic_variance(magnitude, profile: ThresholdProfile = DEFAULT_PROFILE, t=None):
    """(window start time, variance) per ``mag_var_window`` window, stride ``window_stride``."""
    x = np.asarray(magnitude, dtype=float)
    t = _time_axis(len(x), t)
    if len(x) < profile.mag_var_window:
        return np.empty(0), np.empty(0)
    var = windowed_variance(x, profile.mag_var_window, profile.window_stride)
    starts = t[np.arange(len(var)) * profile.window_stride]
    return starts, var


def _ramp_bounds(p: np.ndarray, t: np.ndarray) -> tuple[float, float]:
    """Ramp start/end from 10%/90% crossings, extrapolated to 0%/100%."""
    k = max(1, min(len(p) // 10, 100))
    p0, p1 = np.median(p[:k]), np.median(p[-k:])
    span = p1 - p0
    frac = (p - p0) / span if span != 0 else np.zeros_like(p)
    above10 = np.flatnonzero(frac >= 0.1)
    below90 = np.flatnonzero(frac <= 0.9)
    if not above10.size or not below90.size:
        return float(t[0]), float(t[-1])
    t10 = t[above10[0]]
    t90 = t[below90[-1]]
    if t90 <= t10:
        return float(t10), float(t90)
    pad = 0.125 * (t90 - t10)
    return float(max(t[0], t10 - pad)), float(min(t[-1], t90 + pad))


def detect_elevation_change(pressure, profile: ThresholdProfile = DEFAULT_PROFILE, t=None) -> list[ElevationEvent]:
    p = np.asarray(pressure, dtype=float)
    n = len(p)
    t = _time_axis(n, t)
    w = int(round(profile.baro_window * SAMPLE_RATE))
    stride = max(1, w // 2)
    if n < w or np.isnan(p).any():
        return []
    starts = list(range(0, n - w + 1, stride))
    if starts[-1] != n - w:
        starts.append(n - w)  # final window flush with the series end
    view = sliding_window_view(p, w)[starts]
    active = (view.max(axis=1) - view.min(axis=1)) > profile.baro_noise_floor
    events = []
    k = 0
    while k < len(active):
        if not active[k]:
            k += 1
            continue
        j = k
        while j + 1 < len(active) and active[j + 1]:
            j += 1
        a, b = starts[k], starts[j] + w - 1
        rs, re = _ramp_bounds(p[a:b + 1], t[a:b + 1])
        events.append(ElevationEvent(float(t[a]), float(t[b]), float(p[b] - p[a]), rs, re))
        k = j + 1
    return events
