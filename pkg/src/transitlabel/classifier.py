"""Hierarchical activity classifier.

A trace is cut into stationary, moving and elevation-change segments; each
segment then goes through the decision tree of its branch.  Classification
works on time only, positions are attached afterwards by the pipeline.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import acoustic
from .config import ClassifierConfig, PipelineConfig, ThresholdProfile
from .features import (
    ElevationEvent,
    GyroSurge,
    MagneticPeak,
    MotionState,
    classify_motion,
    detect_elevation_change,
    detect_gyro_surges,
    detect_magnetic_peaks,
    integrate_heading,
    magnetic_variance,
)
from .model import SAMPLE_RATE, AudioSegment, Motion, SemanticClass, SensorTrace
from .pdr import StepEvent, compass_heading, detect_steps, estimate_heading
from .preprocess import smooth, to_world_frame

C = SemanticClass


# ---------------------------------------------------------------------------
# feature bundle


@dataclass(frozen=True, eq=False)
class TraceFeatures:
    trace_id: str
    placement: str
    profile: ThresholdProfile
    t: np.ndarray
    acc_mag: np.ndarray  # smoothed world-frame magnitude
    acc_y: np.ndarray  # smoothed world-frame forward component
    mag_mag: np.ndarray
    gyro_heading: np.ndarray  # integrated yaw rate, relative
    heading: np.ndarray  # fused gyro/compass heading
    pressure: np.ndarray | None
    states: tuple[MotionState, ...]
    peaks: tuple[MagneticPeak, ...]
    surges: tuple[GyroSurge, ...]
    elevation: tuple[ElevationEvent, ...]
    steps: tuple[StepEvent, ...]
    mag_var_t: np.ndarray
    mag_var: np.ndarray
    audio: tuple[AudioSegment, ...]
    probes: tuple[tuple[float, float], ...]
    step_t: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "step_t", np.array([s.t for s in self.steps], dtype=float))

    @property
    def start(self) -> float:
        return float(self.t[0])

    @property
    def end(self) -> float:
        return float(self.t[-1])

    def index(self, t: float) -> int:
        return int(np.clip(np.searchsorted(self.t, t), 0, len(self.t) - 1))

    def steps_in(self, a: float, b: float) -> np.ndarray:
        st = self.step_t
        return st[(st >= a) & (st <= b)]

    def mean(self, series: np.ndarray, a: float, b: float) -> float:
        i, j = self.index(a), self.index(b)
        return float(series[i:max(j, i + 1)].mean())


def extract_features(trace: SensorTrace, config: PipelineConfig | None = None) -> TraceFeatures:
    config = config or PipelineConfig()
    pre = config.preprocess
    profile = config.features.profile(trace.placement)
    world = to_world_frame(trace, pre)
    t = world.t
    hw = pre.half_width
    acc_mag = smooth(np.linalg.norm(world.accel, axis=1), hw)
    acc_y = smooth(world.accel[:, 1], hw)
    mag_mag = smooth(np.linalg.norm(world.mag, axis=1), hw)
    peaks = detect_magnetic_peaks(mag_mag, profile, t)
    gyro_heading = integrate_heading(world.gyro[:, 2], t)
    gated = np.zeros(len(t), bool)
    for p in peaks:
        gated[(t >= p.start_t) & (t <= p.end_t)] = True
    heading = estimate_heading(world.gyro[:, 2], compass_heading(world.mag), config.pdr.alpha, gated, t)
    pressure = None
    if not np.isnan(world.pressure).any():
        pressure = smooth(world.pressure, min(pre.pressure_half_width, (len(t) - 1) // 2))
    elevation = detect_elevation_change(pressure, profile, t) if pressure is not None else []
    mv_t, mv = magnetic_variance(mag_mag, profile, t)
    return TraceFeatures(
        trace_id=trace.trace_id,
        placement=trace.placement.value,
        profile=profile,
        t=t,
        acc_mag=acc_mag,
        acc_y=acc_y,
        mag_mag=mag_mag,
        gyro_heading=gyro_heading,
        heading=heading,
        pressure=pressure,
        states=tuple(classify_motion(acc_mag, profile, t)),
        peaks=tuple(peaks),
        surges=tuple(detect_gyro_surges(gyro_heading, profile, t)),
        elevation=tuple(elevation),
        steps=tuple(detect_steps(acc_mag, config.pdr, t)),
        mag_var_t=mv_t,
        mag_var=mv,
        audio=world.audio,
        probes=world.probe_features,
    )


# ---------------------------------------------------------------------------
# transport mode


class TransportMode(str, enum.Enum):
    STATIONARY = "stationary"
    WALKING = "walking"
    MOTORIZED = "motorized"


def dominant_frequency(window: np.ndarray, rate: float = SAMPLE_RATE) -> float:
    x = np.asarray(window, dtype=float)
    x = (x - x.mean()) * np.hanning(len(x))
    spec = np.abs(np.fft.rfft(x))
    spec[0] = 0.0
    return float(np.fft.rfftfreq(len(x), 1.0 / rate)[int(np.argmax(spec))])


def detect_transport_mode(
    acc_mag, profile: ThresholdProfile = ThresholdProfile(), max_freq: float = 1.0
) -> list[TransportMode]:
    """Per variance window: stationary, walking, or motorized (low-frequency sway)."""
    x = np.asarray(acc_mag, dtype=float)
    w, s = profile.var_window, profile.window_stride
    if len(x) < w:
        raise ValueError(f"series of length {len(x)} shorter than one window ({w})")
    modes = []
    for win in sliding_window_view(x, w)[::s]:
        if win.var() < profile.var_stationary:
            modes.append(TransportMode.STATIONARY)
        elif dominant_frequency(win) < max_freq:
            modes.append(TransportMode.MOTORIZED)
        else:
            modes.append(TransportMode.WALKING)
    return modes


# ---------------------------------------------------------------------------
# segmentation


class SegmentKind(str, enum.Enum):
    STATIONARY = "stationary"
    MOVING = "moving"
    ELEVATION = "elevation"


@dataclass(frozen=True, eq=False)
class ActivitySegment:
    start_t: float
    end_t: float
    kind: SegmentKind
    features: TraceFeatures
    elevation: ElevationEvent | None = None
    fsm: SemanticClass | None = None
    preceding_activity: SemanticClass | None = None

    @property
    def span(self) -> tuple[float, float]:
        return self.start_t, self.end_t

    @property
    def duration(self) -> float:
        return self.end_t - self.start_t

    @property
    def peaks(self) -> list[MagneticPeak]:
        return [p for p in self.features.peaks if p.end_t > self.start_t and p.start_t < self.end_t]

    @property
    def surges(self) -> list[GyroSurge]:
        return [s for s in self.features.surges if self.start_t <= s.t <= self.end_t]

    @property
    def steps(self) -> np.ndarray:
        return self.features.steps_in(self.start_t, self.end_t)

    @property
    def motion_states(self) -> list[MotionState]:
        return [s for s in self.features.states if self.start_t <= s.window_start_t < self.end_t]


def _window_len(f: TraceFeatures) -> float:
    return f.profile.var_window / SAMPLE_RATE


def stationary_spans(f: TraceFeatures, min_duration: float) -> list[tuple[float, float]]:
    """Stationary bouts from window coverage, edges refined with step times."""
    wl = _window_len(f)
    runs = []
    start = last = None
    for s in f.states:
        if s.state is Motion.STATIONARY:
            if start is None:
                start = s.window_start_t
            last = s.window_start_t
        elif start is not None:
            runs.append((start, last + wl))
            start = None
    if start is not None:
        runs.append((start, last + wl))
    spans = []
    for a, b in runs:
        b = min(b, f.end)
        lead = f.steps_in(a - 1.0, a + 2.0)
        onset = float(lead[-1]) if lead.size else a
        trail = f.steps_in(max(onset, b - 3.0), b + 1.0)
        end = float(trail[0]) if trail.size else b
        if end - onset >= min_duration:
            spans.append((onset, end))
    return spans


def _states_between(f: TraceFeatures, a: float, b: float) -> list[MotionState]:
    """Motion windows lying inside [a, b]; the most central one if none fit."""
    wl = _window_len(f)
    inside = [s for s in f.states if s.window_start_t >= a and s.window_start_t + wl <= b]
    if inside or not f.states:
        return inside
    mid = 0.5 * (a + b) - 0.5 * wl
    return [min(f.states, key=lambda s: abs(s.window_start_t - mid))]


def run_elevator_fsm(
    f: TraceFeatures, event: ElevationEvent, config: ClassifierConfig = ClassifierConfig()
) -> tuple[SemanticClass | None, tuple[float, float] | None]:
    """Match waiting, stepping in, optional turn, still ride, stepping out.

    Returns the elevator class (or None) and the matched span from the start
    of the wait to the end of the walk out.
    """
    rs, re = event.ramp_start_t, event.ramp_end_t
    st = f.step_t
    # (e) the cab moves while the passenger stays still
    if f.steps_in(rs, re).size:
        return None, None
    if any(s.state is not Motion.STATIONARY for s in _states_between(f, rs, re)):
        return None, None
    # (d) doors close: still for a while before the ramp
    before = st[st < rs]
    if not before.size or rs - before[-1] < config.elevator_still_before_ramp:
        return None, None
    # (b) a short run of steps into the cab
    k = len(before) - 1
    while k > 0 and before[k] - before[k - 1] <= 1.0:
        k -= 1
    steps_in = before[k:]
    if len(steps_in) > config.elevator_max_steps_in or steps_in[0] < rs - config.elevator_lead:
        return None, None
    # (a) waiting in front of the doors
    wait_from = before[k - 1] if k > 0 else f.start
    if steps_in[0] - wait_from < config.elevator_wait:
        return None, None
    # (f, g) stop, then step out
    after = st[st > re]
    if not after.size or after[0] - re > config.elevator_exit_window:
        return None, None
    # (c) turning around inside the cab is what single-door cabs force
    turned = any(steps_in[-1] - 1.0 <= s.t <= rs for s in f.surges)
    span_start = max(wait_from, steps_in[0] - config.elevator_lead)
    span_end = float(after[min(len(after), 3) - 1])
    cls = C.ELEVATOR_SINGLE if turned else C.ELEVATOR_DOUBLE
    return cls, (float(span_start), span_end)


def segment_trace(f: TraceFeatures, config: ClassifierConfig = ClassifierConfig()) -> list[ActivitySegment]:
    """Cover the trace with stationary, elevation and moving segments, in time order."""
    elevation = []
    for ev in f.elevation:
        cls, span = run_elevator_fsm(f, ev, config)
        if span is None:
            span = (ev.ramp_start_t - config.ramp_margin, ev.ramp_end_t + config.ramp_margin)
        elevation.append([max(span[0], f.start), min(span[1], f.end), ev, cls])
    stationary = []
    for a, b in stationary_spans(f, config.min_stationary):
        hit = [e for e in elevation if e[0] < b and e[1] > a]
        if not hit:
            stationary.append((a, b))
            continue
        for e in hit:  # the bout belongs to the ride
            e[0], e[1] = min(e[0], a), max(e[1], b)
    elevation.sort(key=lambda e: e[0])
    merged: list[list] = []
    for e in elevation:
        if merged and e[0] < merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], e[1])
            continue
        merged.append(e)
    fixed = [ActivitySegment(a, b, SegmentKind.ELEVATION, f, ev, cls) for a, b, ev, cls in merged]
    fixed += [ActivitySegment(a, b, SegmentKind.STATIONARY, f) for a, b in stationary
              if not any(e.start_t < b and e.end_t > a for e in fixed)]
    fixed.sort(key=lambda s: s.start_t)
    out = []
    cursor = f.start
    for seg in fixed:
        if seg.start_t > cursor:
            out.append(ActivitySegment(cursor, seg.start_t, SegmentKind.MOVING, f))
        start = max(seg.start_t, cursor)
        if seg.end_t > start:
            out.append(ActivitySegment(start, seg.end_t, seg.kind, f, seg.elevation, seg.fsm))
            cursor = seg.end_t
    if cursor < f.end:
        out.append(ActivitySegment(cursor, f.end, SegmentKind.MOVING, f))
    return out


def split_semantic_type(segment: ActivitySegment) -> str:
    """``elevation_change`` iff an elevation event overlaps the segment."""
    f = segment.features
    if f.pressure is None:
        return "station_specific"
    for ev in f.elevation:
        if ev.start_t < segment.end_t and ev.end_t > segment.start_t:
            return "elevation_change"
    return "station_specific"


# ---------------------------------------------------------------------------
# elevation branch


def level_or_floor(event: ElevationEvent, profile: ThresholdProfile = ThresholdProfile()) -> str:
    return "floor_change" if abs(event.delta_p) >= profile.floor_change_hpa else "level_change"


def classify_elevation(segment: ActivitySegment, config: ClassifierConfig = ClassifierConfig()) -> SemanticClass:
    f = segment.features
    ev = segment.elevation
    if ev is None:
        raise ValueError("segment carries no elevation event")
    fsm = segment.fsm
    if fsm is None:
        fsm, _ = run_elevator_fsm(f, ev, config)
    if fsm is not None:
        return fsm
    rs, re = ev.ramp_start_t, ev.ramp_end_t
    states = _states_between(f, rs, re)
    still = sum(s.state is Motion.STATIONARY for s in states)
    if states and still >= config.standing_fraction * len(states):
        return C.ESCALATOR_STANDING
    third = (re - rs) / 3.0
    if any(rs + third <= s.t <= re - third for s in f.surges):
        return C.STAIRS_HALF_LANDING
    wl = _window_len(f)
    inside = (f.mag_var_t >= rs) & (f.mag_var_t + wl <= re)
    if not inside.any():
        inside = (f.mag_var_t + wl > rs) & (f.mag_var_t < re)
    if inside.any() and np.median(f.mag_var[inside]) > f.profile.mag_var_threshold:
        return C.ESCALATOR_CLIMBING
    return C.STAIRS_STRAIGHT


# ---------------------------------------------------------------------------
# station-specific branch


def detect_sitting_transition(f: TraceFeatures, onset: float, config: ClassifierConfig = ClassifierConfig()) -> bool:
    """A turn just before stopping plus a shift of the forward acceleration."""
    lead = config.sitting_surge_lead
    if not any(onset - lead - 0.5 <= s.t <= onset + 0.5 for s in f.surges):
        return False
    after = f.mean(f.acc_y, onset, onset + 1.0)
    before = f.mean(f.acc_y, onset - 1.0, onset)
    return abs(after - before) >= config.sitting_y_threshold


def _audio_between(f: TraceFeatures, a: float, b: float) -> list[AudioSegment]:
    return [s for s in f.audio if s.start_t < b and s.end_t > a]


def _is_coin_machine(segment: ActivitySegment, config: ClassifierConfig) -> bool:
    a, b = segment.span
    w = config.departure_window
    peak = any(min(p.end_t, b) - max(p.start_t, a) >= 1.0 for p in segment.peaks)
    if not peak:
        return False
    return any(b - w <= s.t <= b + w for s in segment.features.surges)


def classify_stationary(
    segment: ActivitySegment, config: PipelineConfig | None = None, boarding_after: bool = False
) -> tuple[SemanticClass, str]:
    """Stationary decision list; returns the class and a detail tag."""
    config = config or PipelineConfig()
    cc = config.classifier
    f = segment.features
    a, b = segment.span
    if _is_coin_machine(segment, cc):
        cls, confident = acoustic.classify_coin_machine_sound(_audio_between(f, a, b), config.acoustic)
        return cls, "" if confident else "no-audio"
    probes = [v for t, v in f.probes if a <= t <= b]
    feature = float(np.mean(probes)) if probes else None
    if acoustic.restroom_probe_test(feature, config.acoustic.restroom_threshold):
        return C.RESTROOM, ""
    if detect_sitting_transition(f, a, cc):
        return C.SITTING_AREA, ""
    if boarding_after:
        return C.WAITING_LINE, ""
    return C.STANDING, ""


def _motorized_runs(f: TraceFeatures, config: ClassifierConfig) -> list[float]:
    """Start times of runs of at least ``motorized_min_windows`` motorized windows."""
    p = f.profile
    w, s = p.var_window, p.window_stride
    if len(f.acc_mag) < w:
        return []
    starts, run = [], 0
    view = sliding_window_view(f.acc_mag, w)[::s]
    for k, win in enumerate(view):
        motor = win.var() >= p.var_stationary and dominant_frequency(win) < config.motorized_freq
        run = run + 1 if motor else 0
        if run == config.motorized_min_windows:
            starts.append(float(f.t[(k - run + 1) * s]))
    return starts


def find_boarding(f: TraceFeatures, a: float, b: float, config: ClassifierConfig) -> tuple[float, float] | None:
    """Standing, a few steps, then motorized motion: (first, last) boarding step times."""
    wl = _window_len(f)
    for tm in _motorized_runs(f, config):
        if not a <= tm <= b:
            continue
        cand = f.steps_in(max(a, tm - 40.0), tm)
        if not cand.size:
            continue
        k = len(cand) - 1
        while k > 0 and cand[k] - cand[k - 1] <= 2.0:
            k -= 1
        chain = cand[k:]
        if len(chain) > config.boarding_max_steps or tm - chain[-1] > 30.0:
            continue
        still = [s for s in f.states if s.state is Motion.STATIONARY
                 and chain[0] - 3.0 - wl <= s.window_start_t and s.window_start_t + wl <= chain[0] + 1.0]
        if len(still) >= 2:
            return float(chain[0]), float(chain[-1])
    return None


def gate_pattern(f: TraceFeatures, peak: MagneticPeak, config: ClassifierConfig) -> str | None:
    """``"pause"``, ``"slow"`` or None from step timing around a magnetic peak."""
    mid = peak.mid_t
    steps = f.steps_in(mid - config.gate_window, mid + config.gate_window)
    if (steps < mid).sum() < 2 or (steps > mid).sum() < 2:
        return None
    gaps = np.diff(steps)
    if gaps.max() >= config.gate_pause_gap:
        return "pause"
    if (gaps >= config.gate_slow_gap).sum() >= 2:
        return "slow"
    return None


def classify_moving(segment: ActivitySegment, config: ClassifierConfig = ClassifierConfig()) -> SemanticClass:
    """Gate rules on the segment's magnetic peaks, else walking.

    Platform boarding is found on whole moving stretches by ``find_boarding``
    before this is applied to the pieces.
    """
    f = segment.features
    for peak in segment.peaks:
        if not segment.start_t <= peak.mid_t <= segment.end_t:
            continue
        kind = gate_pattern(f, peak, config)
        if kind == "pause":
            return C.ENTRANCE_GATE_TICKET
        if kind == "slow" and segment.preceding_activity is not C.TICKET_VENDING:
            return C.ENTRANCE_GATE_IC
    return C.WALKING


# ---------------------------------------------------------------------------
# whole-trace classification


@dataclass(frozen=True)
class Labeled:
    cls: SemanticClass
    start_t: float
    end_t: float
    anchor_t: float  # time whose trail position locates the semantic
    detail: str = ""
    ramp: tuple[float, float, float] | None = None  # (start, end, |delta_p|) for elevation classes

    @property
    def span(self) -> tuple[float, float]:
        return self.start_t, self.end_t


def _moving_pieces(f: TraceFeatures, seg: ActivitySegment, config: PipelineConfig, history) -> list[Labeled]:
    cc = config.classifier
    a, b = seg.span
    out: list[Labeled] = []
    board = find_boarding(f, a, b, cc)
    limit = board[0] if board else b
    cursor = a
    for peak in f.peaks:
        mid = peak.mid_t
        if not cursor <= mid <= limit:
            continue
        lo = max(cursor, mid - cc.gate_window)
        hi = min(limit, mid + cc.gate_window)
        if hi - lo <= 0:
            continue
        recent = any(h.cls is C.TICKET_VENDING and h.end_t >= lo - cc.gate_context for h in history + out)
        piece = ActivitySegment(lo, hi, SegmentKind.MOVING, f,
                                preceding_activity=C.TICKET_VENDING if recent else None)
        cls = classify_moving(piece, cc)
        if cls is C.WALKING:
            continue
        if lo > cursor:
            out.append(Labeled(C.WALKING, cursor, lo, 0.5 * (cursor + lo)))
        out.append(Labeled(cls, lo, hi, mid))
        cursor = hi
    if limit > cursor:
        out.append(Labeled(C.WALKING, cursor, limit, 0.5 * (cursor + limit)))
    if board:
        out.append(Labeled(C.PLATFORM_TRACK, board[0], b, board[1], "boarding"))
    return out


def _merge_walking(labels: list[Labeled]) -> list[Labeled]:
    out: list[Labeled] = []
    for lb in labels:
        if out and lb.cls is C.WALKING and out[-1].cls is C.WALKING and abs(out[-1].end_t - lb.start_t) < 1e-9:
            prev = out.pop()
            lb = Labeled(C.WALKING, prev.start_t, lb.end_t, 0.5 * (prev.start_t + lb.end_t))
        out.append(lb)
    return out


def classify_trace(f: TraceFeatures, config: PipelineConfig | None = None) -> list[Labeled]:
    """Label every segment of the trace, in time order."""
    config = config or PipelineConfig()
    cc = config.classifier
    segments = segment_trace(f, cc)
    labels: list[Labeled | None] = [None] * len(segments)
    stationary_pending = []
    history: list[Labeled] = []
    for k, seg in enumerate(segments):
        if seg.kind is SegmentKind.ELEVATION:
            cls = classify_elevation(seg, cc)
            ev = seg.elevation
            mid = 0.5 * (ev.ramp_start_t + ev.ramp_end_t)
            labels[k] = [Labeled(cls, seg.start_t, seg.end_t, mid, level_or_floor(ev, f.profile),
                                 (ev.ramp_start_t, ev.ramp_end_t, abs(ev.delta_p)))]
        elif seg.kind is SegmentKind.STATIONARY:
            cls, detail = classify_stationary(seg, config)
            labels[k] = [Labeled(cls, seg.start_t, seg.end_t, seg.start_t, detail)]
            if cls is C.STANDING:
                stationary_pending.append(k)
        else:
            labels[k] = _moving_pieces(f, seg, config, history)
        history.extend(labels[k])
    # waiting lines need the boarding that follows them
    boardings = [lb.start_t for lb in history if lb.cls is C.PLATFORM_TRACK]
    for k in stationary_pending:
        seg = segments[k]
        if any(0 <= tb - seg.end_t <= cc.boarding_lookahead for tb in boardings):
            labels[k] = [Labeled(C.WAITING_LINE, seg.start_t, seg.end_t, seg.start_t)]
    flat = [lb for group in labels for lb in group]
    return _merge_walking(flat)
