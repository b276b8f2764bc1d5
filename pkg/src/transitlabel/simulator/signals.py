"""Kinematic timeline to 50 Hz sensor channels.

Motion is composed in the levelled body frame (x right, y forward, z up)
and the floor frame (x along magnetic north, counter-clockwise headings).
Gait amplitudes are specified as the acceleration variance seen after the
pipeline's default smoothing, so that the motion thresholds apply to what
the detectors actually measure.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..model import SAMPLE_DT, SAMPLE_RATE, AudioSegment, GroundTruthSpan, SemanticClass
from ..preprocess import axis_angle_quat, quat_to_matrix, smooth
from .config import NoiseModel

GRAVITY = 9.80665
EARTH_H = 25.0  # uT, horizontal component along floor +x
EARTH_V = 38.0  # uT, downward
HPA_PER_M = 0.12
SLOW_TURN = 30.0  # deg/s mean rate of unhurried turns


@lru_cache(maxsize=256)
def smoothing_gain(freq: float, half_width: int = 10) -> float:
    """Amplitude gain of the default smoother for a sinusoid at ``freq`` Hz."""
    n = 2000
    x = np.sin(2 * np.pi * freq * np.arange(n) * SAMPLE_DT)
    y = smooth(x, half_width)
    core = slice(100, n - 100)
    return float(np.std(y[core]) / np.std(x[core]))


def _gain(freq: float) -> float:
    return smoothing_gain(round(freq, 2))


def _raised_cosine(u: np.ndarray) -> np.ndarray:
    u = np.clip(u, 0.0, 1.0)
    return 0.5 * (1 - np.cos(np.pi * u))


def _quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = np.moveaxis(a, -1, 0)
    w2, x2, y2, z2 = np.moveaxis(b, -1, 0)
    return np.stack([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ], axis=-1)


@dataclass
class _Overlay:
    kind: str
    t0: float
    t1: float
    params: dict


class TraceBuilder:
    """Appends motion primitives and renders the sensor channels."""

    def __init__(self, rng: np.random.Generator, start, heading: float, noise: NoiseModel,
                 var_scale: float = 1.0, stride: float = 0.7):
        self.rng = rng
        self.noise = noise
        self.var_scale = var_scale
        self.stride = stride
        self.x, self.y, self.z, self.psi = float(start[0]), float(start[1]), 0.0, float(heading)
        self._chunks: list[dict[str, np.ndarray]] = []
        self.n = 0
        self.overlays: list[_Overlay] = []
        self.truth: list[GroundTruthSpan] = []
        self.step_times: list[float] = []
        self.audio_events: list[tuple[float, float, str, dict]] = []
        self.restroom_spans: list[tuple[float, float]] = []
        self.marks: dict[str, float] = {}

    # -- bookkeeping ---------------------------------------------------------

    @property
    def t(self) -> float:
        return self.n * SAMPLE_DT

    def _append(self, x, y, z, psi, acc=None):
        m = len(x)
        if acc is None:
            acc = np.zeros((m, 3))
        self._chunks.append({"x": np.asarray(x, float), "y": np.asarray(y, float),
                             "z": np.asarray(z, float), "psi": np.asarray(psi, float), "acc": acc})
        self.n += m
        self.x, self.y, self.z, self.psi = float(x[-1]), float(y[-1]), float(z[-1]), float(psi[-1])

    def label(self, cls: SemanticClass, t0: float, t1: float):
        self.truth.append(GroundTruthSpan(float(t0), float(t1), SemanticClass(cls)))

    def gait_variance(self, kind: str) -> float:
        lo, hi = {"normal": (8.4, 14.0), "slow": (2.5, 5.0), "stairs": (8.4, 14.0)}[kind]
        return float(self.rng.uniform(lo, hi)) * self.var_scale

    def cadence(self, kind: str) -> float:
        lo, hi = {"normal": (1.8, 2.2), "slow": (1.22, 1.55), "stairs": (1.5, 1.9)}[kind]
        return round(float(self.rng.uniform(lo, hi)), 3)

    # -- primitives ----------------------------------------------------------

    def still(self, duration: float, tremor: float = 0.05):
        m = max(1, int(round(duration * SAMPLE_RATE)))
        acc = self.rng.normal(0.0, tremor, (m, 3))
        acc = np.cumsum(acc, axis=0) * 0.05  # slow hand drift
        acc -= np.linspace(0, 1, m)[:, None] * acc[-1]
        jitter = np.cumsum(self.rng.normal(0, 0.05, m))
        jitter -= np.linspace(0, 1, m) * jitter[-1]
        self._append(np.full(m, self.x), np.full(m, self.y), np.full(m, self.z), self.psi + jitter, acc)

    def turn(self, delta: float, rate: float = SLOW_TURN):
        """In-place turn by ``delta`` degrees at mean ``rate`` deg/s."""
        if abs(delta) < 1e-6:
            return
        m = max(2, int(round(abs(delta) / rate * SAMPLE_RATE)))
        u = (np.arange(m) + 1) / m
        psi = self.psi + delta * _raised_cosine(u)
        self._append(np.full(m, self.x), np.full(m, self.y), np.full(m, self.z), psi)

    def face(self, heading: float, rate: float = SLOW_TURN):
        self.turn(wrap180(heading - self.psi), rate)

    def walk(self, waypoints, kind: str = "normal", cadence: float | None = None, variance: float | None = None,
             stride: float | None = None, climb: float = 0.0, final_turn: tuple[float, float] | None = None,
             n_steps: int | None = None, turn_first: bool = True, hold_heading: bool = False) -> list[float]:
        """Walk a polyline in whole gait cycles; returns the step times.

        ``climb`` is the height gained over the walk (negative going down).
        ``final_turn`` = (delta, rate) adds a turn completing on the last step;
        with ``hold_heading`` the path direction does not steer the heading.
        """
        pts = [(self.x, self.y)] + [tuple(map(float, p)) for p in waypoints]
        seg = np.diff(np.asarray(pts), axis=0)
        lens = np.hypot(seg[:, 0], seg[:, 1])
        keep = lens > 1e-6
        seg, lens = seg[keep], lens[keep]
        total = float(lens.sum())
        stride = stride or self.stride
        if n_steps is None:
            if total <= 1e-6:
                return []
            n_steps = max(1, int(round(total / stride)))
        f = cadence or self.cadence(kind)
        var = variance if variance is not None else self.gait_variance(kind)
        if len(seg) and turn_first and not hold_heading:
            first = np.degrees(np.arctan2(seg[0, 1], seg[0, 0]))
            if abs(wrap180(first - self.psi)) > 60.0:
                self.face(first)
        duration = n_steps / f
        m = max(2, int(round(duration * SAMPLE_RATE)))
        k = np.arange(1, m + 1)
        phase = 2 * np.pi * n_steps * k / m
        amp = np.sqrt(2 * var) / _gain(f)
        acc = np.column_stack([0.1 * amp * np.sin(phase / 2), 0.2 * amp * np.sin(phase), amp * np.sin(phase)])
        s = total * k / m
        if len(seg):
            bounds = np.concatenate([[0.0], np.cumsum(lens)])
            j = np.clip(np.searchsorted(bounds, s, side="right") - 1, 0, len(seg) - 1)
            frac = (s - bounds[j]) / lens[j]
            base = np.asarray(pts)[:-1][keep]
            x = base[j, 0] + frac * seg[j, 0]
            y = base[j, 1] + frac * seg[j, 1]
            heads = np.degrees(np.arctan2(seg[:, 1], seg[:, 0]))
            psi = np.full(m, self.psi)
            prev = self.psi
            tt = k / SAMPLE_RATE
            corner_t = bounds[:-1] / total * duration
            for h, tc in zip(heads if not hold_heading else [], corner_t):
                d = wrap180(h - prev)
                width = max(abs(d) / SLOW_TURN, 0.2)
                psi += d * _raised_cosine((tt - tc + width / 2) / width)
                prev = prev + d
        else:
            x, y, psi = np.full(m, self.x), np.full(m, self.y), np.full(m, self.psi)
        if final_turn is not None:
            d, rate = final_turn
            width = abs(d) / rate
            tt = k / SAMPLE_RATE
            t_end = duration - 0.75 / f  # the turn completes on the last step
            psi = psi + d * _raised_cosine((tt - (t_end - width)) / width)
        psi = psi + 1.5 * np.sin(phase / 2)  # gait yaw wobble
        z = self.z + climb * k / m
        t0 = self.t
        steps = [t0 + (i + 0.25) / f for i in range(n_steps)]
        self.step_times.extend(steps)
        self._append(x, y, z, psi, acc)
        self.psi = float(psi[-1] - 1.5 * np.sin(phase[-1] / 2))
        return steps

    def glide(self, duration: float, dx: float, dy: float, dz: float, vibration: float = 0.05):
        """Carried motion without steps (escalator belt, elevator cab)."""
        m = max(2, int(round(duration * SAMPLE_RATE)))
        u = (np.arange(m) + 1) / m
        acc = self.rng.normal(0.0, vibration, (m, 3))
        self._append(self.x + dx * u, self.y + dy * u, self.z + dz * u, np.full(m, self.psi), acc)

    def ride(self, duration: float, dz: float, bump: float = 0.6):
        """Elevator cab: smooth height change with accelerate/decelerate bumps."""
        m = max(2, int(round(duration * SAMPLE_RATE)))
        u = (np.arange(m) + 1) / m
        z = self.z + dz * _raised_cosine(u)
        acc = np.zeros((m, 3))
        edge = min(int(1.5 * SAMPLE_RATE), m // 3)
        pulse = np.sin(np.pi * np.arange(edge) / edge)
        sign = np.sign(dz)
        acc[:edge, 2] += sign * bump * pulse
        acc[m - edge:, 2] -= sign * bump * pulse
        acc += self.rng.normal(0.0, 0.03, (m, 3))
        self._append(np.full(m, self.x), np.full(m, self.y), z, np.full(m, self.psi), acc)

    def sway(self, duration: float, freq: float = 0.4, variance: float | None = None):
        """Train motion: low-frequency sway, no steps."""
        m = max(2, int(round(duration * SAMPLE_RATE)))
        var = variance if variance is not None else float(self.rng.uniform(2.5, 5.0)) * self.var_scale
        amp = np.sqrt(2 * var) / _gain(freq)
        k = np.arange(1, m + 1)
        ramp = np.clip(k / (2 * SAMPLE_RATE), 0, 1)
        ph = 2 * np.pi * freq * k * SAMPLE_DT
        acc = np.column_stack([0.3 * amp * np.sin(ph + 1.0), 0.5 * amp * np.cos(ph), amp * np.sin(ph)]) * ramp[:, None]
        acc += self.rng.normal(0.0, 0.1, (m, 3))
        wob = 2.0 * np.sin(2 * np.pi * 0.13 * k * SAMPLE_DT)
        self._append(np.full(m, self.x), np.full(m, self.y), np.full(m, self.z), self.psi + wob, acc)

    def pulse_forward(self, t0: float, duration: float, mean_shift: float, vertical: float = 0.0):
        """Forward (and vertical) acceleration pulse, e.g. sitting down."""
        self.overlays.append(_Overlay("pulse", t0, t0 + duration,
                                      {"mean": mean_shift, "vertical": vertical}))

    # -- time overlays -------------------------------------------------------

    def magnetic_event(self, t0: float, t1: float, strength: float, ramp: float = 0.4, tilt: float | None = None):
        if tilt is None:
            tilt = float(self.rng.uniform(-20.0, 20.0))
        self.overlays.append(_Overlay("mag", t0, t1, {"strength": strength, "ramp": ramp, "tilt": tilt}))

    def magnetic_ripple(self, t0: float, t1: float, amplitude: float, freq: float):
        self.overlays.append(_Overlay("ripple", t0, t1, {"amp": amplitude / _gain(freq), "freq": freq}))

    def sound(self, t0: float, duration: float, kind: str, **params):
        self.audio_events.append((t0, duration, kind, params))

    # -- rendering -----------------------------------------------------------

    def render(self, placement: str, pressure_base: float):
        """Device-frame channels plus orientation; returns a dict of arrays."""
        rng, nz = self.rng, self.noise
        cat = {k: np.concatenate([c[k] for c in self._chunks]) for k in ("x", "y", "z", "psi")}
        acc = np.concatenate([c["acc"] for c in self._chunks])
        n = len(cat["x"])
        t = np.arange(n) * SAMPLE_DT
        psi = cat["psi"]
        mag_floor = np.tile([EARTH_H, 0.0, -EARTH_V], (n, 1))
        field_dir = mag_floor[0] / np.linalg.norm(mag_floor[0])
        for ov in self.overlays:
            sel = (t >= ov.t0 - 2.0) & (t <= ov.t1 + 2.0)
            tt = t[sel]
            if ov.kind == "mag":
                r = ov.params["ramp"]
                env = _raised_cosine((tt - ov.t0) / r) * (1 - _raised_cosine((tt - ov.t1 + r) / r))
                b = np.radians(ov.params["tilt"])
                u = np.array([field_dir[0] * np.cos(b), field_dir[0] * np.sin(b), field_dir[2]])
                mag_floor[sel] += ov.params["strength"] * env[:, None] * u
            elif ov.kind == "ripple":
                inside = (tt >= ov.t0) & (tt <= ov.t1)
                wave = ov.params["amp"] * np.sin(2 * np.pi * ov.params["freq"] * (tt - ov.t0)) * inside
                mag_floor[sel] += wave[:, None] * field_dir
            elif ov.kind == "pulse":
                d = ov.t1 - ov.t0
                inside = (tt >= ov.t0) & (tt <= ov.t1)
                shape = np.sin(np.pi * (tt - ov.t0) / d) * inside
                peak = ov.params["mean"] * np.pi / 2
                acc[sel, 1] += peak * shape
                acc[sel, 2] += ov.params["vertical"] * np.sin(2 * np.pi * (tt - ov.t0) / d) * inside
        # levelled frame
        rad = np.radians(psi)
        right = np.column_stack([np.sin(rad), -np.cos(rad)])
        fwd = np.column_stack([np.cos(rad), np.sin(rad)])
        mx = (mag_floor[:, :2] * right).sum(axis=1)
        my = (mag_floor[:, :2] * fwd).sum(axis=1)
        if nz.compass_sigma > 0:
            e = np.radians(rng.normal(0.0, nz.compass_sigma, n))
            mx, my = mx * np.cos(e) + my * np.sin(e), -mx * np.sin(e) + my * np.cos(e)
        mag = np.column_stack([mx, my, mag_floor[:, 2]]) + rng.normal(0.0, nz.mag_sigma, (n, 3))
        accel = acc + np.array([0.0, 0.0, GRAVITY]) + rng.normal(0.0, nz.accel_sigma, (n, 3))
        yaw_rate = np.gradient(psi, SAMPLE_DT)
        bias = rng.uniform(-nz.heading_drift, nz.heading_drift)
        gyro = rng.normal(0.0, nz.gyro_sigma, (n, 3))
        gyro[:, 2] += yaw_rate + bias
        pressure = pressure_base - HPA_PER_M * cat["z"] + rng.normal(0.0, nz.pressure_sigma, n)
        # device attitude: tilt only, the levelled frame keeps the heading
        if placement == "pocket":
            pitch, roll = rng.uniform(70, 88), rng.uniform(-20, 20)
        else:
            pitch, roll = rng.uniform(25, 45), rng.uniform(-10, 10)
        wob = 2.0 * np.sin(2 * np.pi * 0.2 * t + rng.uniform(0, 2 * np.pi))
        qx = np.array([axis_angle_quat((1, 0, 0), np.radians(p)) for p in pitch + wob])
        qy = axis_angle_quat((0, 1, 0), np.radians(roll))
        q = _quat_mul(qx, np.broadcast_to(qy, qx.shape))
        q /= np.linalg.norm(q, axis=1, keepdims=True)
        rot = quat_to_matrix(q)  # device -> level
        to_dev = lambda v: np.einsum("nji,nj->ni", rot, v)  # noqa: E731  (R^T v)
        return {
            "t": t,
            "accel": to_dev(accel),
            "gyro": to_dev(gyro),
            "mag": to_dev(mag),
            "pressure": pressure,
            "orientation": q,
            "world_accel": accel,
            "position": np.column_stack([cat["x"], cat["y"]]),
            "heading": psi,
        }


def wrap180(a: float) -> float:
    return (a + 180.0) % 360.0 - 180.0


# ---------------------------------------------------------------------------
# audio


def render_audio(events, intervals, rate: int, snr_db: float, rng: np.random.Generator) -> list[AudioSegment]:
    """PCM for each gated interval: white noise plus the scheduled sounds.

    SNR is tone power over total noise power.
    """
    noise_rms = 800.0
    tone_amp = noise_rms * np.sqrt(2.0) * 10 ** (snr_db / 20.0)
    segments = []
    for a, b in intervals:
        m = int(round((b - a) * rate))
        if m < 2:
            continue
        tt = a + np.arange(m) / rate
        x = rng.normal(0.0, noise_rms, m)
        for t0, dur, kind, params in events:
            sel = (tt >= t0) & (tt < t0 + dur)
            if not sel.any():
                continue
            local = tt[sel] - t0
            freq = params.get("freq", 1000.0)
            if kind == "tone":
                env = np.minimum(1.0, np.minimum(local, dur - local) / 0.01)
                x[sel] += tone_amp * env * np.sin(2 * np.pi * freq * local)
            elif kind == "clink":
                env = (1 - np.exp(-local / 0.004)) * np.exp(-local / 0.05)
                x[sel] += 0.8 * tone_amp * env * np.sin(2 * np.pi * freq * local)
        pcm = np.clip(np.round(x), -32768, 32767).astype(np.int16)
        segments.append(AudioSegment(float(round(a, 6)), rate, pcm))
    return segments
