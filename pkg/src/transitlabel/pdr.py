"""Pedestrian dead reckoning with landmark resets.

Headings are degrees in the floor frame: 0 deg along +x, counter-clockwise
positive, magnetic north along +x.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks, lfilter

from .config import PdrConfig
from .model import SAMPLE_RATE

DEFAULT_PDR = PdrConfig()


@dataclass(frozen=True)
class StepEvent:
    t: float
    stride: float

    def __post_init__(self):
        if not 0.3 <= self.stride <= 1.2:
            raise ValueError(f"stride {self.stride} m outside [0.3, 1.2]")


def detect_steps(accel_magnitude, config: PdrConfig = DEFAULT_PDR, t=None) -> list[StepEvent]:
    """One event per gait peak above gravity + ``step_margin``.

    Peaks closer than ``min_step_gap`` are suppressed (the larger one wins) and
    a peak with no neighbour within ``max_step_gap`` is not a gait cycle.
    """
    x = np.asarray(accel_magnitude, dtype=float)
    if t is None:
        t = np.arange(len(x)) / SAMPLE_RATE
    t = np.asarray(t, dtype=float)
    if len(x) < 3:
        return []
    distance = max(1, int(round(config.min_step_gap * SAMPLE_RATE)))
    idx, _ = find_peaks(x, height=config.gravity + config.step_margin, distance=distance)
    if not idx.size:
        return []
    times = t[idx]
    gaps = np.diff(times)
    near_prev = np.concatenate([[False], gaps <= config.max_step_gap])
    near_next = np.concatenate([gaps <= config.max_step_gap, [False]])
    keep = near_prev | near_next
    return [StepEvent(float(s), config.stride) for s in times[keep]]


def compass_heading(mag_level) -> np.ndarray:
    """Heading (deg, wrapped) from a levelled magnetometer (x right, y forward)."""
    m = np.asarray(mag_level, dtype=float)
    return np.degrees(np.arctan2(m[:, 0], m[:, 1]))


def _runs(mask: np.ndarray):
    edges = np.flatnonzero(np.diff(mask.astype(np.int8))) + 1
    bounds = np.concatenate([[0], edges, [len(mask)]])
    for a, b in zip(bounds[:-1], bounds[1:]):
        yield int(a), int(b), bool(mask[a])


def estimate_heading(
    gyro_z,
    compass,
    alpha: float = DEFAULT_PDR.alpha,
    gated=None,
    t=None,
) -> np.ndarray:
    """Complementary filter ``h = a (h_prev + w dt) + (1 - a) c``.

    ``gated`` marks samples (e.g. inside magnetic peaks) where the compass is
    ignored and the gyro integrates alone.  Output is unwrapped and starts at
    the first compass reading.
    """
    g = np.asarray(gyro_z, dtype=float)
    c = np.degrees(np.unwrap(np.radians(np.asarray(compass, dtype=float))))
    n = len(g)
    if n == 0:
        return np.empty(0)
    if t is None:
        dt = np.full(n, 1.0 / SAMPLE_RATE)
    else:
        dt = np.diff(np.asarray(t, dtype=float), prepend=np.nan)
    dt[0] = 0.0
    inc = g * dt  # rectangular integration with the current rate
    gated = np.zeros(n, bool) if gated is None else np.asarray(gated, bool)
    out = np.empty(n)
    prev = c[0]
    for a, b, off in _runs(gated):
        if off:
            out[a:b] = prev + np.cumsum(inc[a:b])
        else:
            # h_i - alpha h_{i-1} = alpha inc_i + (1 - alpha) c_i
            drive = alpha * inc[a:b] + (1 - alpha) * c[a:b]
            zi = np.array([alpha * prev])
            out[a:b], _ = lfilter([1.0], [1.0, -alpha], drive, zi=zi)
        prev = out[b - 1]
    return out


@dataclass(frozen=True, eq=False)
class PositionTrail:
    """Dead-reckoned positions after each step.

    ``travel`` is the cumulative walked distance since the trace start and
    ``dist`` the distance since the last reset.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    dist: np.ndarray
    travel: np.ndarray
    resets: tuple[tuple[float, tuple[float, float]], ...] = field(default=())

    @property
    def points(self) -> list[tuple[float, float, float, float]]:
        return list(zip(self.t.tolist(), self.x.tolist(), self.y.tolist(), self.dist.tolist()))

    def _index(self, t: float) -> int:
        if not self.t[0] <= t <= self.t[-1] + 1e-9:
            raise ValueError(f"time {t} outside trail [{self.t[0]}, {self.t[-1]}]")
        return int(np.searchsorted(self.t, t, side="right")) - 1

    def position_at(self, t: float) -> tuple[float, float]:
        i = self._index(t)
        return float(self.x[i]), float(self.y[i])

    def dist_at(self, t: float) -> float:
        return float(self.dist[self._index(t)])

    @property
    def end(self) -> tuple[float, float]:
        return float(self.x[-1]), float(self.y[-1])


def dead_reckon(steps, heading, start, t=None, t0: float = 0.0, t_end: float | None = None) -> PositionTrail:
    """Advance ``stride`` along the heading at each step.

    ``heading`` is either a per-step sequence (same length as ``steps`` and no
    ``t``) or a sampled series with optional time axis ``t``.
    """
    steps = list(steps)
    h = np.asarray(heading, dtype=float)
    if t is None and len(h) == len(steps):
        hs = h
    else:
        ts = np.arange(len(h)) / SAMPLE_RATE if t is None else np.asarray(t, dtype=float)
        hs = np.interp([s.t for s in steps], ts, h) if steps else np.empty(0)
    strides = np.array([s.stride for s in steps])
    rad = np.radians(hs)
    dx = np.concatenate([[0.0], np.cumsum(strides * np.cos(rad))]) if steps else np.zeros(1)
    dy = np.concatenate([[0.0], np.cumsum(strides * np.sin(rad))]) if steps else np.zeros(1)
    travel = np.concatenate([[0.0], np.cumsum(strides)]) if steps else np.zeros(1)
    times = np.array([t0] + [s.t for s in steps], dtype=float)
    if t_end is not None and t_end > times[-1]:
        times = np.append(times, t_end)
        dx, dy, travel = (np.append(a, a[-1]) for a in (dx, dy, travel))
    return PositionTrail(times, start[0] + dx, start[1] + dy, travel.copy(), travel)


def reset_at_landmark(trail: PositionTrail, t_reset: float, landmark) -> PositionTrail:
    """Snap the trail to ``landmark`` at ``t_reset``.

    The correction is spread back over the segment since the previous reset
    (or the trace start) in proportion to the distance walked, falling back to
    time when no steps were taken; everything later moves by the full
    correction and the distance-since-reset restarts from zero.
    """
    i = trail._index(t_reset)
    t, x, y, dist, travel = (a.copy() for a in (trail.t, trail.x, trail.y, trail.dist, trail.travel))
    if t[i] != t_reset:
        i += 1
        t = np.insert(t, i, t_reset)
        x, y, dist, travel = (np.insert(a, i, a[i - 1]) for a in (x, y, dist, travel))
    prev_t = max([r[0] for r in trail.resets if r[0] < t_reset], default=t[0])
    j = int(np.searchsorted(t, prev_t, side="left"))
    cx, cy = landmark[0] - x[i], landmark[1] - y[i]
    span = travel[i] - travel[j]
    if span > 0:
        frac = (travel[j:i + 1] - travel[j]) / span
    elif t[i] > t[j]:
        frac = (t[j:i + 1] - t[j]) / (t[i] - t[j])
    else:
        frac = np.ones(i - j + 1)
    x[j:i + 1] += frac * cx
    y[j:i + 1] += frac * cy
    x[i + 1:] += cx
    y[i + 1:] += cy
    next_t = min([r[0] for r in trail.resets if r[0] > t_reset], default=np.inf)
    k = int(np.searchsorted(t, next_t, side="left"))
    dist[i + 1:k] -= dist[i]
    dist[i] = 0.0
    x[i], y[i] = landmark[0], landmark[1]  # exact snap
    resets = tuple(sorted(trail.resets + ((float(t_reset), (float(landmark[0]), float(landmark[1]))),)))
    return PositionTrail(t, x, y, dist, travel, resets)


def detection_weight(dist_since_reset: float) -> float:
    if dist_since_reset < 0:
        raise ValueError("distance must be non-negative")
    return 1.0 / (1.0 + dist_since_reset)
