"""Domain types and the line-delimited trace / map / station file formats."""

from __future__ import annotations

import base64
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

SAMPLE_RATE = 50.0
SAMPLE_DT = 1.0 / SAMPLE_RATE
GAP_TOLERANCE = 0.2
QUAT_TOLERANCE = 1e-6

TRACE_MAGIC = "#transitlabel-trace"
MAP_MAGIC = "#transitlabel-map"
STATION_MAGIC = "#transitlabel-station"
FORMAT_VERSION = "v1"


class TraceError(ValueError):
    """Base class for every ingestion failure."""


class ParseError(TraceError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(TraceError):
    pass


class SemanticClass(str, enum.Enum):
    ELEVATOR_SINGLE = "elevator_single"
    ELEVATOR_DOUBLE = "elevator_double"
    STAIRS_STRAIGHT = "stairs_straight"
    STAIRS_HALF_LANDING = "stairs_half_landing"
    ESCALATOR_STANDING = "escalator_standing"
    ESCALATOR_CLIMBING = "escalator_climbing"
    DRINK_VENDING = "drink_vending"
    TICKET_VENDING = "ticket_vending"
    LOCKER = "locker"
    RESTROOM = "restroom"
    SITTING_AREA = "sitting_area"
    STANDING = "standing"
    WAITING_LINE = "waiting_line"
    ENTRANCE_GATE_TICKET = "entrance_gate_ticket"
    ENTRANCE_GATE_IC = "entrance_gate_ic"
    PLATFORM_TRACK = "platform_track"
    WALKING = "walking"

    def __str__(self) -> str:
        return self.value


ELEVATION_CLASSES = frozenset(
    {
        SemanticClass.ELEVATOR_SINGLE,
        SemanticClass.ELEVATOR_DOUBLE,
        SemanticClass.STAIRS_STRAIGHT,
        SemanticClass.STAIRS_HALF_LANDING,
        SemanticClass.ESCALATOR_STANDING,
        SemanticClass.ESCALATOR_CLIMBING,
    }
)

# Evaluation aggregates; computed on demand, never stored on a detection.
AGGREGATES: dict[str, frozenset[SemanticClass]] = {
    "escalator": frozenset({SemanticClass.ESCALATOR_STANDING, SemanticClass.ESCALATOR_CLIMBING}),
    "entrance_gate": frozenset({SemanticClass.ENTRANCE_GATE_TICKET, SemanticClass.ENTRANCE_GATE_IC}),
    "coin_machine": frozenset(
        {SemanticClass.DRINK_VENDING, SemanticClass.TICKET_VENDING, SemanticClass.LOCKER}
    ),
    "elevator": frozenset({SemanticClass.ELEVATOR_SINGLE, SemanticClass.ELEVATOR_DOUBLE}),
}

# Activity classes that do not correspond to a physical semantic on the map.
UNMAPPED = frozenset({SemanticClass.STANDING, SemanticClass.WALKING})


def map_label(cls: SemanticClass) -> str | None:
    """Physical semantic label used on the map, or None for unmapped activities."""
    if cls in UNMAPPED:
        return None
    if cls in AGGREGATES["escalator"]:
        return "escalator"
    if cls in AGGREGATES["entrance_gate"]:
        return "entrance_gate"
    return cls.value


MAP_LABELS = tuple(
    sorted({label for c in SemanticClass if (label := map_label(c)) is not None})
)


class Motion(str, enum.Enum):
    STATIONARY = "stationary"
    SLOW_WALK = "slow_walk"
    NORMAL_WALK = "normal_walk"


class Placement(str, enum.Enum):
    HAND = "hand"
    POCKET = "pocket"


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SensorSample:
    t: float
    accel: tuple[float, float, float]
    gyro: tuple[float, float, float]
    mag: tuple[float, float, float]
    pressure: float | None = None
    orientation: tuple[float, float, float, float] | None = None


@dataclass(frozen=True, eq=False)
class AudioSegment:
    start_t: float
    sample_rate: int
    samples: np.ndarray  # int16 PCM, mono

    def __post_init__(self):
        object.__setattr__(self, "samples", _readonly(np.asarray(self.samples, dtype=np.int16)))

    @property
    def end_t(self) -> float:
        return self.start_t + len(self.samples) / self.sample_rate

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def __eq__(self, other):
        if not isinstance(other, AudioSegment):
            return NotImplemented
        return (
            self.start_t == other.start_t
            and self.sample_rate == other.sample_rate
            and np.array_equal(self.samples, other.samples)
        )


@dataclass(frozen=True)
class GroundTruthSpan:
    start_t: float
    end_t: float
    cls: SemanticClass


@dataclass(frozen=True, eq=False)
class SensorTrace:
    """A 50 Hz multi-channel recording, stored column-wise.

    ``pressure`` uses NaN for samples without a barometer reading and
    ``orientation`` (device to world, w-x-y-z) is either None or a full
    (n, 4) array.
    """

    trace_id: str
    station_id: str
    placement: Placement
    start_position: tuple[float, float]
    t: np.ndarray
    accel: np.ndarray
    gyro: np.ndarray
    mag: np.ndarray
    pressure: np.ndarray
    orientation: np.ndarray | None = None
    audio: tuple[AudioSegment, ...] = ()
    probe_features: tuple[tuple[float, float], ...] = ()
    ground_truth: tuple[GroundTruthSpan, ...] | None = None

    def __post_init__(self):
        n = len(self.t)
        object.__setattr__(self, "placement", Placement(self.placement))
        object.__setattr__(self, "t", _readonly(np.asarray(self.t, dtype=float)))
        for name in ("accel", "gyro", "mag"):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(n, 3)
            object.__setattr__(self, name, _readonly(arr))
        object.__setattr__(self, "pressure", _readonly(np.asarray(self.pressure, dtype=float).reshape(n)))
        if self.orientation is not None:
            q = np.asarray(self.orientation, dtype=float).reshape(n, 4)
            object.__setattr__(self, "orientation", _readonly(q))
        object.__setattr__(self, "audio", tuple(self.audio))
        object.__setattr__(
            self, "probe_features", tuple((float(a), float(b)) for a, b in self.probe_features)
        )
        if self.ground_truth is not None:
            object.__setattr__(self, "ground_truth", tuple(self.ground_truth))
        sx, sy = self.start_position
        object.__setattr__(self, "start_position", (float(sx), float(sy)))

    def __len__(self) -> int:
        return len(self.t)

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0]) + SAMPLE_DT if len(self.t) else 0.0

    @property
    def samples(self) -> Iterator[SensorSample]:
        for i in range(len(self.t)):
            p = self.pressure[i]
            q = None if self.orientation is None else tuple(self.orientation[i])
            yield SensorSample(
                float(self.t[i]),
                tuple(self.accel[i]),
                tuple(self.gyro[i]),
                tuple(self.mag[i]),
                None if math.isnan(p) else float(p),
                q,
            )

    def replace(self, **changes) -> "SensorTrace":
        fields = {
            name: getattr(self, name)
            for name in (
                "trace_id", "station_id", "placement", "start_position", "t", "accel", "gyro",
                "mag", "pressure", "orientation", "audio", "probe_features", "ground_truth",
            )
        }
        fields.update(changes)
        return SensorTrace(**fields)

    def __eq__(self, other):
        if not isinstance(other, SensorTrace):
            return NotImplemented

        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return np.array_equal(a, b, equal_nan=True)

        return (
            self.trace_id == other.trace_id
            and self.station_id == other.station_id
            and self.placement == other.placement
            and self.start_position == other.start_position
            and all(same(getattr(self, k), getattr(other, k))
                    for k in ("t", "accel", "gyro", "mag", "pressure", "orientation"))
            and self.audio == other.audio
            and self.probe_features == other.probe_features
            and self.ground_truth == other.ground_truth
        )


@dataclass(frozen=True)
class Floorplan:
    station_id: str
    bounds: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax
    walls: tuple[tuple[tuple[float, float], ...], ...] = ()
    true_semantics: tuple[tuple[str, tuple[float, float]], ...] = ()

    def contains(self, p: Sequence[float], tol: float = 1e-9) -> bool:
        xmin, ymin, xmax, ymax = self.bounds
        return xmin - tol <= p[0] <= xmax + tol and ymin - tol <= p[1] <= ymax + tol


@dataclass(frozen=True)
class SemanticDetection:
    cls: SemanticClass
    span: tuple[float, float]
    position: tuple[float, float]
    weight: float
    source_trace: str
    detail: str = ""

    def __post_init__(self):
        if not self.weight > 0:
            raise ValidationError(f"detection weight must be positive, got {self.weight}")
        if not self.span[0] < self.span[1]:
            raise ValidationError(f"detection span must be increasing, got {self.span}")


@dataclass(frozen=True)
class MapSemantic:
    label: str
    x: float
    y: float
    n_samples: int


@dataclass(frozen=True)
class AnnotatedMap:
    """Serializable map snapshot: semantic records plus car queuing areas."""

    station_id: str
    semantics: tuple[MapSemantic, ...] = ()
    car_areas: tuple[tuple[int, tuple[tuple[float, float], ...]], ...] = ()

    def sorted_semantics(self) -> tuple[MapSemantic, ...]:
        return tuple(sorted(self.semantics, key=lambda s: (s.label, s.x, s.y, s.n_samples)))


# ---------------------------------------------------------------------------
# validation


def validate_trace(trace: SensorTrace) -> SensorTrace:
    n = len(trace.t)
    if n == 0:
        raise ValidationError("empty trace")
    t = trace.t
    if not np.all(np.isfinite(t)) or t[0] < 0:
        raise ValidationError("timestamps must be finite and non-negative")
    if n > 1:
        gaps = np.diff(t)
        bad = np.flatnonzero(gaps <= 0)
        if bad.size:
            raise ValidationError(f"non-monotone timestamp at sample {bad[0] + 2}")
        lo, hi = SAMPLE_DT * (1 - GAP_TOLERANCE), SAMPLE_DT * (1 + GAP_TOLERANCE)
        bad = np.flatnonzero((gaps < lo - 1e-12) | (gaps > hi + 1e-12))
        if bad.size:
            raise ValidationError(
                f"sample gap {gaps[bad[0]]:.4f} s at sample {bad[0] + 2} outside 50 Hz +/- 20%"
            )
    for name in ("accel", "gyro", "mag"):
        if not np.all(np.isfinite(getattr(trace, name))):
            raise ValidationError(f"non-finite {name} value")
    if trace.orientation is not None:
        norms = np.linalg.norm(trace.orientation, axis=1)
        bad = np.flatnonzero(np.abs(norms - 1.0) > QUAT_TOLERANCE)
        if bad.size:
            raise ValidationError(f"orientation quaternion not unit at sample {bad[0] + 1}")
    t_end = t[-1] + SAMPLE_DT
    prev_end = -math.inf
    for seg in trace.audio:
        if seg.sample_rate <= 0 or len(seg.samples) == 0:
            raise ValidationError("audio segment must be non-empty with a positive rate")
        if seg.start_t < prev_end - 1e-9:
            raise ValidationError(f"overlapping audio segment at t={seg.start_t}")
        if seg.start_t < t[0] - 1e-9 or seg.end_t > t_end + 1e-9:
            raise ValidationError(f"audio segment at t={seg.start_t} outside trace range")
        prev_end = seg.end_t
    for pt, feat in trace.probe_features:
        if not (math.isfinite(pt) and math.isfinite(feat)):
            raise ValidationError("non-finite probe feature")
    if trace.ground_truth:
        for span in trace.ground_truth:
            if not span.start_t < span.end_t:
                raise ValidationError(f"ground-truth span {span.start_t}..{span.end_t} not increasing")
    return trace


# ---------------------------------------------------------------------------
# trace file format


def _fmt(x: float) -> str:
    return repr(float(x))


def _fmt_vec(v) -> str:
    return " ".join(_fmt(x) for x in v)


def format_trace(trace: SensorTrace) -> str:
    sx, sy = trace.start_position
    lines = [
        f"{TRACE_MAGIC} {FORMAT_VERSION} {trace.trace_id} {trace.station_id} "
        f"{trace.placement.value} {_fmt(sx)} {_fmt(sy)}"
    ]
    q = trace.orientation
    for i in range(len(trace.t)):
        p = trace.pressure[i]
        row = (
            f"S {_fmt(trace.t[i])} {_fmt_vec(trace.accel[i])} {_fmt_vec(trace.gyro[i])} "
            f"{_fmt_vec(trace.mag[i])} {'-' if math.isnan(p) else _fmt(p)}"
        )
        if q is not None:
            row += " " + _fmt_vec(q[i])
        lines.append(row)
    for seg in trace.audio:
        payload = base64.b64encode(seg.samples.astype("<i2").tobytes()).decode("ascii")
        lines.append(f"A {_fmt(seg.start_t)} {seg.sample_rate} {payload}")
    for pt, feat in trace.probe_features:
        lines.append(f"P {_fmt(pt)} {_fmt(feat)}")
    for span in trace.ground_truth or ():
        lines.append(f"G {_fmt(span.start_t)} {_fmt(span.end_t)} {span.cls.value}")
    return "\n".join(lines) + "\n"


def write_trace(trace: SensorTrace, path: str | Path) -> None:
    validate_trace(trace)
    Path(path).write_text(format_trace(trace), encoding="utf-8")


def _floats(tokens: Sequence[str], lineno: int) -> list[float]:
    try:
        return [float(tok) for tok in tokens]
    except ValueError as exc:
        raise ParseError(f"bad number ({exc})", lineno) from None


def parse_trace(text: str) -> SensorTrace:
    lines = text.splitlines()
    if not lines:
        raise ParseError("missing header", 1)
    head = lines[0].split()
    if len(head) != 7 or head[0] != TRACE_MAGIC or head[1] != FORMAT_VERSION:
        raise ParseError("malformed trace header", 1)
    _, _, trace_id, station_id, placement_tok, sx, sy = head
    try:
        placement = Placement(placement_tok)
    except ValueError:
        raise ValidationError(f"unknown placement {placement_tok!r}") from None
    start = _floats([sx, sy], 1)

    rows: list[list[float]] = []
    quats: list[list[float]] = []
    audio: list[AudioSegment] = []
    probes: list[tuple[float, float]] = []
    gt: list[GroundTruthSpan] = []
    has_gt = False
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        tok = line.split()
        kind = tok[0]
        if kind == "S":
            if len(tok) not in (12, 16):
                raise ParseError(f"sample line needs 11 or 15 fields, got {len(tok) - 1}", lineno)
            p = tok[11]
            vals = _floats(tok[1:11], lineno) + [math.nan if p == "-" else _floats([p], lineno)[0]]
            rows.append(vals)
            if len(tok) == 16:
                quats.append(_floats(tok[12:16], lineno))
            if quats and len(quats) != len(rows):
                raise ParseError("orientation must be present on every sample or none", lineno)
        elif kind == "A":
            if len(tok) != 4:
                raise ParseError("audio line needs 3 fields", lineno)
            start_t = _floats(tok[1:2], lineno)[0]
            try:
                rate = int(tok[2])
                pcm = np.frombuffer(base64.b64decode(tok[3], validate=True), dtype="<i2")
            except (ValueError, base64.binascii.Error) as exc:
                raise ParseError(f"bad audio payload ({exc})", lineno) from None
            audio.append(AudioSegment(start_t, rate, pcm.astype(np.int16)))
        elif kind == "P":
            if len(tok) != 3:
                raise ParseError("probe line needs 2 fields", lineno)
            a, b = _floats(tok[1:3], lineno)
            probes.append((a, b))
        elif kind == "G":
            if len(tok) != 4:
                raise ParseError("ground-truth line needs 3 fields", lineno)
            a, b = _floats(tok[1:3], lineno)
            try:
                cls = SemanticClass(tok[3])
            except ValueError:
                raise ParseError(f"unknown semantic class {tok[3]!r}", lineno) from None
            gt.append(GroundTruthSpan(a, b, cls))
            has_gt = True
        else:
            raise ParseError(f"unknown record type {kind!r}", lineno)
    if quats and len(quats) != len(rows):
        raise ParseError("orientation must be present on every sample or none", len(lines))

    arr = np.asarray(rows, dtype=float).reshape(-1, 11)
    trace = SensorTrace(
        trace_id=trace_id,
        station_id=station_id,
        placement=placement,
        start_position=(start[0], start[1]),
        t=arr[:, 0],
        accel=arr[:, 1:4],
        gyro=arr[:, 4:7],
        mag=arr[:, 7:10],
        pressure=arr[:, 10],
        orientation=np.asarray(quats) if quats else None,
        audio=tuple(audio),
        probe_features=tuple(probes),
        ground_truth=tuple(gt) if has_gt else None,
    )
    return validate_trace(trace)


def read_trace(path: str | Path) -> SensorTrace:
    return parse_trace(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# map file format


def format_map(amap: AnnotatedMap) -> str:
    lines = [f"{MAP_MAGIC} {FORMAT_VERSION} {amap.station_id}"]
    for s in amap.sorted_semantics():
        lines.append(f"M {s.label} {_fmt(s.x)} {_fmt(s.y)} {s.n_samples}")
    for idx, pts in sorted(amap.car_areas):
        lines.append(f"C {idx} " + " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts))
    return "\n".join(lines) + "\n"


def write_map(amap: AnnotatedMap, path: str | Path) -> None:
    for s in amap.semantics:
        if s.label not in MAP_LABELS:
            raise ValidationError(f"unknown map label {s.label!r}")
        if s.n_samples < 1:
            raise ValidationError("map semantic needs at least one sample")
    Path(path).write_text(format_map(amap), encoding="utf-8")


def parse_map(text: str) -> AnnotatedMap:
    lines = text.splitlines()
    head = lines[0].split() if lines else []
    if len(head) != 3 or head[0] != MAP_MAGIC or head[1] != FORMAT_VERSION:
        raise ParseError("malformed map header", 1)
    sems: list[MapSemantic] = []
    cars: list[tuple[int, tuple[tuple[float, float], ...]]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "M" and len(tok) == 5:
            if tok[1] not in MAP_LABELS:
                raise ValidationError(f"line {lineno}: unknown map label {tok[1]!r}")
            x, y = _floats(tok[2:4], lineno)
            try:
                n = int(tok[4])
            except ValueError:
                raise ParseError("bad sample count", lineno) from None
            sems.append(MapSemantic(tok[1], x, y, n))
        elif tok[0] == "C" and len(tok) >= 2:
            try:
                idx = int(tok[1])
                pts = tuple(tuple(_floats(p.split(","), lineno)) for p in tok[2:])
            except ValueError:
                raise ParseError("bad car area record", lineno) from None
            cars.append((idx, pts))
        else:
            raise ParseError(f"unknown map record {tok[0]!r}", lineno)
    return AnnotatedMap(head[2], tuple(sems), tuple(cars))


def read_map(path: str | Path) -> AnnotatedMap:
    return parse_map(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# station ground-truth file (simulator output)


def format_floorplan(plan: Floorplan) -> str:
    xmin, ymin, xmax, ymax = plan.bounds
    lines = [f"{STATION_MAGIC} {FORMAT_VERSION} {plan.station_id} "
             f"{_fmt(xmin)} {_fmt(ymin)} {_fmt(xmax)} {_fmt(ymax)}"]
    for poly in plan.walls:
        lines.append("W " + " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in poly))
    for label, (x, y) in sorted(plan.true_semantics):
        lines.append(f"T {label} {_fmt(x)} {_fmt(y)}")
    return "\n".join(lines) + "\n"


def write_floorplan(plan: Floorplan, path: str | Path) -> None:
    Path(path).write_text(format_floorplan(plan), encoding="utf-8")


def read_floorplan(path: str | Path) -> Floorplan:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    head = lines[0].split() if lines else []
    if len(head) != 7 or head[0] != STATION_MAGIC:
        raise ParseError("malformed station header", 1)
    bounds = tuple(_floats(head[3:7], 1))
    walls, truth = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "W":
            walls.append(tuple(tuple(_floats(p.split(","), lineno)) for p in tok[1:]))
        elif tok[0] == "T" and len(tok) == 4:
            x, y = _floats(tok[2:4], lineno)
            truth.append((tok[1], (x, y)))
        else:
            raise ParseError(f"unknown station record {tok[0]!r}", lineno)
    return Floorplan(head[2], bounds, tuple(walls), tuple(sorted(truth)))
