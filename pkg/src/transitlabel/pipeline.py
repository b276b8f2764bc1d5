"""End-to-end processing: classify traces, dead-reckon, map.

Pass 1 locates detections by plain dead reckoning from the trace start.
Later passes replay every trace and snap its trail to confirmed clusters of
the previous pass's map whenever a detection lands near one.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .classifier import Labeled, TraceFeatures, classify_trace, extract_features
from .config import PipelineConfig
from .mapper import SemanticMap, update_map
from .model import SemanticClass, SemanticDetection, SensorTrace, TraceError, map_label
from .pdr import PositionTrail, StepEvent, dead_reckon, detection_weight, reset_at_landmark
from .preprocess import gate_microphone

C = SemanticClass
STAIRS = (C.STAIRS_STRAIGHT, C.STAIRS_HALF_LANDING)
ESCALATORS = (C.ESCALATOR_STANDING, C.ESCALATOR_CLIMBING)


@dataclass(frozen=True, eq=False)
class TraceAnalysis:
    """Everything about one trace that does not depend on the map."""

    trace_id: str
    station_id: str
    start: tuple[float, float]
    duration: float
    features: TraceFeatures
    labels: tuple[Labeled, ...]
    steps: tuple[StepEvent, ...]
    gated: float  # seconds of microphone time

    @property
    def mappable(self) -> list[Labeled]:
        return [lb for lb in self.labels if map_label(lb.cls) is not None]


def adjust_steps(f: TraceFeatures, labels: Sequence[Labeled], config: PipelineConfig) -> list[StepEvent]:
    """Per-step strides, corrected for vertical travel.

    Stair treads are shorter than a level stride, and on escalators the belt
    carries the passenger: the steps inside the pressure ramp are replaced by
    evenly spaced virtual steps covering the run implied by the height change.
    """
    cc, pdr = config.classifier, config.pdr
    t = f.step_t
    stride = np.full(len(t), pdr.stride)
    keep = np.ones(len(t), bool)
    extra: list[StepEvent] = []
    for lb in labels:
        if lb.ramp is None:
            continue
        rs, re, dp = lb.ramp
        inside = (t >= rs) & (t <= re)
        if lb.cls in STAIRS:
            stride[inside] = cc.stairs_stride
        elif lb.cls in ESCALATORS:
            keep &= ~inside
            run = dp / cc.hpa_per_meter / np.tan(np.radians(cc.escalator_slope))
            if run < 0.3:
                continue
            n = max(int(np.ceil(run / 1.2)), int(round(run / pdr.stride)))
            times = rs + (np.arange(n) + 0.5) * (re - rs) / n
            extra += [StepEvent(float(x), run / n) for x in times]
    steps = [StepEvent(float(x), float(s)) for x, s, k in zip(t, stride, keep) if k]
    return sorted(steps + extra, key=lambda s: s.t)


def analyse_trace(trace: SensorTrace, config: PipelineConfig | None = None) -> TraceAnalysis:
    config = config or PipelineConfig()
    f = extract_features(trace, config)
    labels = tuple(classify_trace(f, config))
    pre = config.preprocess
    schedule = gate_microphone(((s.window_start_t, s.state) for s in f.states), pre.gate_trigger, pre.gate_cap)
    return TraceAnalysis(
        trace_id=trace.trace_id,
        station_id=trace.station_id,
        start=trace.start_position,
        duration=trace.duration,
        features=f,
        labels=labels,
        steps=tuple(adjust_steps(f, labels, config)),
        gated=schedule.total,
    )


def base_trail(a: TraceAnalysis) -> PositionTrail:
    f = a.features
    return dead_reckon(a.steps, f.heading, a.start, f.t, t0=f.start, t_end=f.end)


def locate(a: TraceAnalysis, prior: SemanticMap | None, config: PipelineConfig) -> tuple[list[SemanticDetection], PositionTrail]:
    """Detections of one trace, resetting against ``prior`` when given.

    A detection is positioned and weighted before its own reset, so the
    landmark it snaps to never feeds back into its own estimate.
    """
    trail = base_trail(a)
    out = []
    for lb in sorted(a.mappable, key=lambda lb: lb.anchor_t):
        anchor = float(np.clip(lb.anchor_t, trail.t[0], trail.t[-1]))
        pos = trail.position_at(anchor)
        det = SemanticDetection(lb.cls, lb.span, pos, detection_weight(trail.dist_at(anchor)),
                                a.trace_id, lb.detail)
        out.append(det)
        if prior is None:
            continue
        hit = prior.nearest_confirmed(map_label(lb.cls), pos, config.pdr.reset_radius)
        if hit is not None:
            trail = reset_at_landmark(trail, anchor, hit.location)
    return out, trail


@dataclass(frozen=True, eq=False)
class PipelineResult:
    smap: SemanticMap
    detections: tuple[SemanticDetection, ...]
    analyses: tuple[TraceAnalysis, ...]
    pass_maps: tuple[SemanticMap, ...]


def run_pipeline(traces: Iterable[SensorTrace | TraceAnalysis], config: PipelineConfig | None = None,
                 passes: int = 2, station_id: str | None = None) -> PipelineResult:
    config = config or PipelineConfig()
    if passes < 1:
        raise ValueError("passes must be at least 1")
    analyses = tuple(t if isinstance(t, TraceAnalysis) else analyse_trace(t, config) for t in traces)
    if not analyses:
        raise TraceError("no traces to process")
    if station_id is None:
        station_id = analyses[0].station_id
    prior = None
    maps = []
    detections: list[SemanticDetection] = []
    for _ in range(passes):
        smap = SemanticMap(station_id)
        detections = []
        for a in analyses:
            dets, _ = locate(a, prior, config)
            for d in dets:
                smap = update_map(smap, d, config.mapper)
            detections.extend(dets)
        maps.append(smap)
        prior = smap
    return PipelineResult(maps[-1], tuple(detections), analyses, tuple(maps))


# ---------------------------------------------------------------------------
# sidecar: labels, detections and gating per trace, read back by evaluation

SIDECAR_MAGIC = "#transitlabel-detections v1"


def _f(x: float) -> str:
    return repr(float(x))


def format_sidecar(result: PipelineResult) -> str:
    lines = [SIDECAR_MAGIC]
    for a in result.analyses:
        lines.append(f"T {a.trace_id} {_f(a.duration)} {_f(a.gated)}")
        for lb in a.labels:
            lines.append(f"L {a.trace_id} {lb.cls.value} {_f(lb.start_t)} {_f(lb.end_t)}")
    for d in result.detections:
        lines.append(f"D {d.source_trace} {d.cls.value} {_f(d.position[0])} {_f(d.position[1])} "
                     f"{_f(d.weight)} {_f(d.span[0])} {_f(d.span[1])} {d.detail or '-'}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Sidecar:
    traces: dict[str, tuple[float, float]]  # id -> (duration, gated)
    labels: dict[str, list[tuple[SemanticClass, float, float]]]
    detections: tuple[SemanticDetection, ...]


def parse_sidecar(text: str) -> Sidecar:
    rows = text.splitlines()
    if not rows or rows[0].strip() != SIDECAR_MAGIC:
        raise TraceError("not a detections file")
    traces: dict = {}
    labels: dict = {}
    dets = []
    for n, row in enumerate(rows[1:], start=2):
        tok = row.split()
        if not tok:
            continue
        try:
            if tok[0] == "T":
                traces[tok[1]] = (float(tok[2]), float(tok[3]))
                labels.setdefault(tok[1], [])
            elif tok[0] == "L":
                labels.setdefault(tok[1], []).append((C(tok[2]), float(tok[3]), float(tok[4])))
            elif tok[0] == "D":
                detail = tok[8] if tok[8] != "-" else ""
                dets.append(SemanticDetection(C(tok[2]), (float(tok[6]), float(tok[7])),
                                              (float(tok[3]), float(tok[4])), float(tok[5]), tok[1], detail))
            else:
                raise ValueError(f"unknown record {tok[0]!r}")
        except (IndexError, ValueError) as exc:
            raise TraceError(f"line {n}: {exc}") from None
    return Sidecar(traces, labels, tuple(dets))


def sidecar_path(map_path: str | Path) -> Path:
    p = Path(map_path)
    return p.with_name(p.name + ".detections")
