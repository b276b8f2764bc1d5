"""Scoring against ground truth.

Every ground-truth span is matched to the predicted label overlapping it
most.  Per class c with N_c true spans, FP_c counts spans of other classes
predicted as c and FN_c spans of c predicted as something else, both
divided by N_c.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .config import MapperConfig
from .mapper import batch_clusters, weighted_centroid
from .model import ELEVATION_CLASSES, AnnotatedMap, GroundTruthSpan, SemanticClass, SemanticDetection, map_label

C = SemanticClass
NONE = "none"

TABLES: tuple[tuple[str, tuple[SemanticClass, ...], dict[str, tuple[SemanticClass, ...]], tuple[str, ...]], ...] = (
    ("elevation",
     (C.ELEVATOR_SINGLE, C.ELEVATOR_DOUBLE, C.STAIRS_STRAIGHT, C.STAIRS_HALF_LANDING,
      C.ESCALATOR_STANDING, C.ESCALATOR_CLIMBING),
     {"escalator": (C.ESCALATOR_STANDING, C.ESCALATOR_CLIMBING), "elevator": (C.ELEVATOR_SINGLE, C.ELEVATOR_DOUBLE)},
     ("elevator_single", "elevator_double", "stairs_straight", "stairs_half_landing",
      "escalator_standing", "escalator_climbing", "escalator")),
    ("stationary",
     (C.DRINK_VENDING, C.TICKET_VENDING, C.LOCKER, C.RESTROOM, C.SITTING_AREA, C.STANDING, C.WAITING_LINE),
     {},
     ("drink_vending", "ticket_vending", "locker", "restroom", "sitting_area", "standing", "waiting_line")),
    ("moving",
     (C.WALKING, C.PLATFORM_TRACK, C.ENTRANCE_GATE_TICKET, C.ENTRANCE_GATE_IC),
     {"entrance_gate": (C.ENTRANCE_GATE_TICKET, C.ENTRANCE_GATE_IC)},
     ("walking", "platform_track", "entrance_gate")),
)
CURVE_SIZES = (5, 10, 20, 40, 80)
LOCATION_EXCLUDED = ("platform_track",)  # a line along the track edge, not a point


def match_spans(truth: Sequence[GroundTruthSpan], labels: Sequence[tuple[SemanticClass, float, float]]) -> list[tuple[SemanticClass, str]]:
    """(true class, predicted class value or 'none') per ground-truth span."""
    out = []
    for g in truth:
        best, best_ov = NONE, 0.0
        for cls, a, b in labels:
            ov = min(b, g.end_t) - max(a, g.start_t)
            if ov > best_ov:
                best, best_ov = SemanticClass(cls).value, ov
        out.append((g.cls, best))
    return out


@dataclass(frozen=True)
class Confusion:
    counts: dict[tuple[str, str], int]

    @classmethod
    def from_pairs(cls, pairs) -> "Confusion":
        counts: dict[tuple[str, str], int] = {}
        for t, p in pairs:
            key = (SemanticClass(t).value, p)
            counts[key] = counts.get(key, 0) + 1
        return cls(counts)

    def rates(self, members: Sequence[str]) -> tuple[int, float, float]:
        """(N, FP, FN) for a class or a union of classes."""
        group = set(members)
        n = sum(v for (t, _), v in self.counts.items() if t in group)
        if n == 0:
            return 0, 0.0, 0.0
        fp = sum(v for (t, p), v in self.counts.items() if p in group and t not in group)
        fn = sum(v for (t, p), v in self.counts.items() if t in group and p not in group)
        return n, fp / n, fn / n


@dataclass(frozen=True)
class Row:
    name: str
    n: int
    fp: float
    fn: float


@dataclass(frozen=True)
class Table:
    name: str
    rows: tuple[Row, ...]
    total_fp: float  # mean over the table's summary rows
    total_fn: float


def build_tables(conf: Confusion) -> list[Table]:
    out = []
    for name, classes, aggregates, summary in TABLES:
        rows = {c.value: Row(c.value, *conf.rates([c.value])) for c in classes}
        for agg, members in aggregates.items():
            rows[agg] = Row(agg, *conf.rates([m.value for m in members]))
        used = [rows[k] for k in summary if rows[k].n > 0]
        fp = float(np.mean([r.fp for r in used])) if used else 0.0
        fn = float(np.mean([r.fn for r in used])) if used else 0.0
        order = [c.value for c in classes] + list(aggregates)
        out.append(Table(name, tuple(rows[k] for k in order), fp, fn))
    return out


def weighted_rates(conf: Confusion) -> tuple[float, float]:
    """Sample-weighted FP and FN over all base classes."""
    total = sum(conf.counts.values())
    if total == 0:
        return 0.0, 0.0
    classes = {c.value for c in SemanticClass}
    fp = sum(v for (t, p), v in conf.counts.items() if p != t and p in classes)
    fn = sum(v for (t, p), v in conf.counts.items() if p != t)
    return fp / total, fn / total


def split_errors(truth: Mapping[str, Sequence[GroundTruthSpan]],
                 labels: Mapping[str, Sequence[tuple[SemanticClass, float, float]]]) -> dict[str, int]:
    """Elevation-change versus station-specific confusion.

    A spurious elevation label (no true elevation span under it) also counts
    as a false positive.
    """
    counts = {"n": 0, "fp": 0, "fn": 0, "spurious": 0}
    for tid in sorted(truth):
        spans, preds = truth[tid], labels.get(tid, [])
        for true_cls, pred in match_spans(spans, preds):
            counts["n"] += 1
            is_elev = SemanticClass(true_cls) in ELEVATION_CLASSES
            pred_elev = pred != NONE and SemanticClass(pred) in ELEVATION_CLASSES
            if pred_elev and not is_elev:
                counts["fp"] += 1
            elif is_elev and not pred_elev:
                counts["fn"] += 1
        for cls, a, b in preds:
            if SemanticClass(cls) not in ELEVATION_CLASSES:
                continue
            if not any(g.cls in ELEVATION_CLASSES and min(b, g.end_t) > max(a, g.start_t) for g in spans):
                counts["spurious"] += 1
    return counts


# ---------------------------------------------------------------------------
# location


def correct_detections(detections: Sequence[SemanticDetection],
                       truth: Mapping[str, Sequence[GroundTruthSpan]]) -> list[SemanticDetection]:
    """Detections whose best-overlapping true span has the same map label.

    Location accuracy is scored on these alone so that classification
    mistakes, which the confusion tables already count, do not leak into it.
    """
    out = []
    for d in detections:
        best, best_ov = None, 0.0
        for g in truth.get(d.source_trace, ()):
            ov = min(d.span[1], g.end_t) - max(d.span[0], g.start_t)
            if ov > best_ov:
                best, best_ov = g.cls, ov
        if best is not None and map_label(best) == map_label(d.cls):
            out.append(d)
    return out


def _truth_by_label(truth_semantics) -> dict[str, list[tuple[float, float]]]:
    by_label: dict[str, list[tuple[float, float]]] = {}
    for label, pos in truth_semantics:
        if label not in LOCATION_EXCLUDED:
            by_label.setdefault(label, []).append((float(pos[0]), float(pos[1])))
    return by_label


def _nearest(cands, p) -> tuple[float, float]:
    dist = [np.hypot(p[0] - c[0], p[1] - c[1]) for c in cands]
    return cands[int(np.argmin(dist))]


def assign_detections(detections: Sequence[SemanticDetection], truth_semantics,
                      mapper: MapperConfig | None = None) -> dict[tuple[str, tuple[float, float]], list[SemanticDetection]]:
    """Group detections by the nearest true semantic of the same map label.

    With ``mapper`` the detections are clustered first: noise points are
    dropped and each cluster goes whole to the true semantic nearest its
    centroid, as the map itself would place it.
    """
    by_label = _truth_by_label(truth_semantics)
    groups: dict = {}
    if mapper is None:
        for d in detections:
            cands = by_label.get(map_label(d.cls))
            if cands:
                groups.setdefault((map_label(d.cls), _nearest(cands, d.position)), []).append(d)
        return groups
    for c in batch_clusters(detections, mapper):
        cands = by_label.get(c.label)
        if cands:
            groups.setdefault((c.label, _nearest(cands, c.location)), []).extend(c.members)
    return groups


@dataclass(frozen=True)
class CurvePoint:
    members: int
    semantics: int
    mean: float
    median: float


def location_curve(detections, truth_semantics, sizes=CURVE_SIZES, draws: int = 100, seed: int = 0,
                   mapper: MapperConfig | None = None) -> list[CurvePoint]:
    """Location error of the weighted centroid of m random members.

    ``mean`` pools all draws; ``median`` is the median over semantics of each
    semantic's median error.

    Every size is scored on the same population: the semantics holding at
    least the largest size any semantic reaches.  Sizes beyond that report
    NaN.  A shrinking population would mix a drift-bias change into the trend.
    """
    rng = np.random.default_rng(seed)
    groups = assign_detections(detections, truth_semantics, mapper)
    counts = [len(v) for v in groups.values()]
    reachable = [m for m in sizes if any(c >= m for c in counts)]
    population = [k for k in sorted(groups) if reachable and len(groups[k]) >= max(reachable)]
    out = []
    for m in sizes:
        if m not in reachable:
            out.append(CurvePoint(m, 0, float("nan"), float("nan")))
            continue
        errors, medians = [], []
        for key in population:
            dets = groups[key]
            true = key[1]
            pts = np.array([d.position for d in dets])
            w = np.array([d.weight for d in dets])
            e = []
            for _ in range(draws):
                idx = rng.choice(len(dets), size=m, replace=False)
                x, y = weighted_centroid(pts[idx], w[idx])
                e.append(float(np.hypot(x - true[0], y - true[1])))
            errors += e
            medians.append(float(np.median(e)))
        # median of per-semantic medians: a pooled median of a few semantics
        # sits in the gap between their error modes and jumps between them
        out.append(CurvePoint(m, len(population), float(np.mean(errors)), float(np.median(medians))))
    return out


@dataclass(frozen=True)
class MapError:
    label: str
    location: tuple[float, float]
    n_samples: int
    error: float


def map_errors(amap: AnnotatedMap, truth_semantics, config: MapperConfig = MapperConfig()) -> list[MapError]:
    """Error of each confirmed map semantic to the nearest true one of its label."""
    by_label: dict[str, list] = {}
    for label, pos in truth_semantics:
        by_label.setdefault(label, []).append(pos)
    out = []
    for s in amap.sorted_semantics():
        if s.label in LOCATION_EXCLUDED or s.n_samples < config.params(s.label).minpts:
            continue
        cands = by_label.get(s.label)
        if not cands:
            continue
        err = min(float(np.hypot(s.x - p[0], s.y - p[1])) for p in cands)
        out.append(MapError(s.label, (s.x, s.y), s.n_samples, err))
    return out


# ---------------------------------------------------------------------------
# report


@dataclass(frozen=True)
class Report:
    n_traces: int
    n_spans: int
    tables: tuple[Table, ...]
    macro_fp: float
    macro_fn: float
    weighted_fp: float
    weighted_fn: float
    split: dict[str, int]
    curve: tuple[CurvePoint, ...]
    map_errors: tuple[MapError, ...]
    duty_cycle: float
    confusion: dict[tuple[str, str], int] = field(default_factory=dict)

    def row(self, name: str) -> Row:
        for t in self.tables:
            for r in t.rows:
                if r.name == name:
                    return r
        raise KeyError(name)

    @property
    def mean_map_error(self) -> float:
        return float(np.mean([e.error for e in self.map_errors])) if self.map_errors else float("nan")


def evaluate(truth: Mapping[str, Sequence[GroundTruthSpan]],
             labels: Mapping[str, Sequence[tuple[SemanticClass, float, float]]],
             detections: Sequence[SemanticDetection],
             amap: AnnotatedMap | None,
             truth_semantics,
             durations: Mapping[str, tuple[float, float]] | None = None,
             mapper: MapperConfig = MapperConfig(),
             seed: int = 0) -> Report:
    """Score predicted labels, detections and the map against the truth."""
    if not truth:
        raise ValueError("no ground truth to evaluate against")
    pairs = []
    for tid in sorted(truth):
        pairs += match_spans(truth[tid], labels.get(tid, []))
    conf = Confusion.from_pairs(pairs)
    tables = build_tables(conf)
    wfp, wfn = weighted_rates(conf)
    duty = 0.0
    if durations:
        total = sum(d for d, _ in durations.values())
        duty = sum(g for _, g in durations.values()) / total if total > 0 else 0.0
    return Report(
        n_traces=len(truth),
        n_spans=len(pairs),
        tables=tuple(tables),
        macro_fp=float(np.mean([t.total_fp for t in tables])),
        macro_fn=float(np.mean([t.total_fn for t in tables])),
        weighted_fp=wfp,
        weighted_fn=wfn,
        split=split_errors(truth, labels),
        curve=tuple(location_curve(correct_detections(detections, truth), truth_semantics, seed=seed, mapper=mapper)),
        map_errors=tuple(map_errors(amap, truth_semantics, mapper)) if amap is not None else (),
        duty_cycle=duty,
        confusion=dict(sorted(conf.counts.items())),
    )


def _r(x: float) -> float | None:
    return None if x != x else round(float(x), 6)


def report_to_dict(rep: Report) -> dict:
    return {
        "n_traces": rep.n_traces,
        "n_spans": rep.n_spans,
        "tables": [
            {"name": t.name, "total_fp": _r(t.total_fp), "total_fn": _r(t.total_fn),
             "rows": [{"class": r.name, "n": r.n, "fp": _r(r.fp), "fn": _r(r.fn)} for r in t.rows]}
            for t in rep.tables
        ],
        "macro": {"fp": _r(rep.macro_fp), "fn": _r(rep.macro_fn)},
        "weighted": {"fp": _r(rep.weighted_fp), "fn": _r(rep.weighted_fn)},
        "split": dict(sorted(rep.split.items())),
        "location_curve": [{"members": c.members, "semantics": c.semantics, "mean": _r(c.mean),
                            "median": _r(c.median)} for c in rep.curve],
        "map": [{"label": e.label, "x": _r(e.location[0]), "y": _r(e.location[1]), "n": e.n_samples,
                 "error": _r(e.error)} for e in rep.map_errors],
        "mean_map_error": _r(rep.mean_map_error),
        "duty_cycle": _r(rep.duty_cycle),
        "confusion": [{"true": t, "pred": p, "count": v} for (t, p), v in rep.confusion.items()],
    }


def format_json(rep: Report) -> str:
    return json.dumps(report_to_dict(rep), indent=2, sort_keys=True) + "\n"


def _pct(x: float) -> str:
    return f"{100 * x:5.1f}%"


def format_text(rep: Report) -> str:
    lines = [f"traces {rep.n_traces}, ground-truth spans {rep.n_spans}", ""]
    for t in rep.tables:
        lines.append(f"[{t.name}]")
        lines.append(f"  {'class':<22}{'n':>5}  {'FP':>6}  {'FN':>6}")
        for r in t.rows:
            lines.append(f"  {r.name:<22}{r.n:>5}  {_pct(r.fp)}  {_pct(r.fn)}")
        lines.append(f"  {'total (row mean)':<22}{'':>5}  {_pct(t.total_fp)}  {_pct(t.total_fn)}")
        lines.append("")
    lines.append(f"overall (mean of tables)  FP {_pct(rep.macro_fp)}  FN {_pct(rep.macro_fn)}")
    lines.append(f"overall (span-weighted)   FP {_pct(rep.weighted_fp)}  FN {_pct(rep.weighted_fn)}")
    s = rep.split
    lines.append(f"semantic-type split: {s['n']} spans, FP {s['fp']}, FN {s['fn']}, spurious {s['spurious']}")
    lines.append("")
    lines.append("location error vs members (mean / median, m)")
    for c in rep.curve:
        lines.append(f"  {c.members:>3} members, {c.semantics:>3} semantics: {c.mean:6.2f} / {c.median:6.2f}")
    if rep.map_errors:
        lines.append(f"confirmed map semantics: {len(rep.map_errors)}, mean error {rep.mean_map_error:.2f} m")
    lines.append(f"microphone duty cycle: {_pct(rep.duty_cycle)}")
    return "\n".join(lines) + "\n"
