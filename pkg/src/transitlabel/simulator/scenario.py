"""Passenger scripts executed on a station template.

A scenario is an ordered list of activities.  The executor walks the
passenger between activity sites, produces the matching sensor signatures
and records a ground-truth span for every labelled activity.  Connecting
walks carry no label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import FeaturesConfig
from ..features import classify_motion
from ..model import Placement, SemanticClass, SensorTrace, validate_trace
from ..preprocess import gate_microphone, smooth
from .config import BehaviourModel, NoiseModel
from .signals import TraceBuilder, render_audio, wrap180
from .station import GATE_Y, STAIR_RISE, StationTemplate

C = SemanticClass

ACTIVITIES = (
    "ticket_vending", "drink_vending", "locker", "restroom", "sitting_area", "standing", "walking",
    "gate_ticket", "gate_ic", "stairs_straight", "stairs_half_landing", "escalator_standing",
    "escalator_climbing", "elevator_single", "elevator_double", "board",
)
ELEVATION = ("stairs_straight", "stairs_half_landing", "escalator_standing", "escalator_climbing",
             "elevator_single", "elevator_double")
MACHINES = ("ticket_vending", "drink_vending", "locker")

# 76% of free walkers stay within 60 m of the platform entry point
FREE_RATE = -np.log(0.24) / 60.0


class ScenarioError(ValueError):
    """Script step that cannot be executed on the template."""


@dataclass(frozen=True)
class Scenario:
    activities: tuple[str, ...]
    placement: Placement = Placement.HAND
    free: bool = False
    direction: str = "down"  # for elevation activities: concourse -> platform or back up

    def __post_init__(self):
        object.__setattr__(self, "placement", Placement(self.placement))
        for a in self.activities:
            if a not in ACTIVITIES:
                raise ScenarioError(f"unknown activity {a!r}")
        if self.direction not in ("down", "up"):
            raise ScenarioError("direction must be 'down' or 'up'")
        if self.free and self.activities != ("board",):
            raise ScenarioError("free scenarios consist of a single boarding")


def target_scenario(target: SemanticClass, rng: np.random.Generator, placement: Placement,
                    free: bool = False) -> Scenario:
    """A script whose main activity produces ``target``."""
    target = SemanticClass(target)
    direction = "down" if rng.random() < 0.5 else "up"
    if target in (C.WAITING_LINE, C.PLATFORM_TRACK):
        return Scenario(("board",), placement, free)
    if target is C.ENTRANCE_GATE_TICKET and rng.random() < 0.5:
        return Scenario(("ticket_vending", "gate_ticket"), placement)
    if free:
        raise ScenarioError("free scenarios only exist for boarding")
    activity = {C.ENTRANCE_GATE_TICKET: "gate_ticket", C.ENTRANCE_GATE_IC: "gate_ic"}.get(target, target.value)
    return Scenario((activity,), placement, direction=direction)


def sample_free_displacement(rng: np.random.Generator, size=None):
    """Distance walked along the platform before choosing a line."""
    return rng.exponential(1.0 / FREE_RATE, size)


def activity_duration(rng: np.random.Generator) -> float:
    """Log-normal stay with mean ~31 s, redrawn below 16 s or above 90 s."""
    while True:
        d = float(rng.lognormal(3.356, 0.394))
        if 16.0 <= d <= 90.0:
            return d


def _heading_to(a, b) -> float:
    return float(np.degrees(np.arctan2(b[1] - a[1], b[0] - a[0])))


def _offset(p, heading: float, dist: float):
    r = np.radians(heading)
    return p[0] + dist * np.cos(r), p[1] + dist * np.sin(r)


class _Executor:
    """Mutable state threaded through the activities of one trace."""

    def __init__(self, template: StationTemplate, scenario: Scenario, noise: NoiseModel,
                 rng: np.random.Generator, behaviour: BehaviourModel):
        self.tpl = template
        self.sc = scenario
        self.rng = rng
        self.noise = noise
        self.habits = behaviour
        self.sound_requests: list[tuple[str, float, float]] = []
        self.restroom_spans: list[tuple[float, float]] = []
        self._sites: dict = {}
        self.region, start = self._start(scenario.activities[0])
        self.level = -template.floor_height if self.region == "platform" else 0.0
        stride = 0.7 + float(rng.normal(0.0, noise.stride_sigma)) if noise.stride_sigma > 0 else 0.7
        var_scale = 1.5 if scenario.placement is Placement.POCKET else 1.0
        self.b = TraceBuilder(rng, start, float(rng.uniform(-180, 180)), noise, var_scale, stride)
        self.b.z = self.level
        self.start = start

    # -- geometry helpers ----------------------------------------------------

    def _start(self, first: str):
        rng = self.rng
        if first in MACHINES or first in ("gate_ticket", "gate_ic"):
            e = self.tpl.entrances[rng.integers(len(self.tpl.entrances))]
            return "outside", (e[0] + rng.uniform(-2, 2), min(e[1] + rng.uniform(-1, 0), 59.5))
        if first in ("restroom", "sitting_area"):
            region = self._site(first).region
            return region, self._random_point(region)
        if first == "board":
            return "platform", self._access_bottom()
        if first in ELEVATION:
            region = "inside" if self.sc.direction == "down" else "platform"
            return region, self._random_point(region)
        region = ("inside", "outside", "platform")[rng.integers(3)]
        if first == "standing":
            region = "inside" if rng.random() < 0.5 else "platform"
        return region, self._random_point(region)

    def _random_point(self, region: str):
        rng = self.rng
        if region == "outside":
            return float(rng.uniform(40, 160)), float(rng.uniform(43, 52))
        if region == "platform":
            x0, _, length, width = self.tpl.platform
            return float(rng.uniform(x0 + 5, x0 + length - 5)), float(rng.uniform(3, width - 2))
        return float(rng.uniform(30, 170)), float(rng.uniform(22, 36))

    def _access_bottom(self):
        stairs = [a.bottom for a in self.tpl.accesses if a.kind in ("stairs_straight", "escalator")]
        p = stairs[self.rng.integers(len(stairs))]
        return p[0], p[1] - 3.0

    def _site(self, label: str):
        """The site used for ``label`` in this trace, chosen on first use."""
        if label not in self._sites:
            sites = self.tpl.sites_of(label)
            if not sites:
                raise ScenarioError(f"template has no {label}")
            self._sites[label] = sites[self.rng.integers(len(sites))]
        return self._sites[label]

    def _require(self, region: str, activity: str):
        if self.region != region:
            raise ScenarioError(f"{activity} needs region {region}, passenger is in {self.region}")

    @property
    def pos(self):
        return self.b.x, self.b.y

    def go(self, target, kind: str = "normal", min_dist: float = 0.0):
        """Walk to ``target`` (via a detour point if it is closer than ``min_dist``)."""
        b = self.b
        d = float(np.hypot(target[0] - b.x, target[1] - b.y))
        if d < 0.4:
            return []
        pts = [target]
        if d < min_dist:
            away = _offset(self.pos, _heading_to(target, self.pos) + self.rng.uniform(-40, 40), min_dist / 2)
            pts = [away, target]
        return b.walk(pts, kind=kind)

    def stroll(self, seconds: float):
        """Unlabelled walk of about ``seconds`` in the current region."""
        b = self.b
        n_legs = 1 + int(self.rng.integers(2))
        dist = seconds * b.stride * 2.0 / n_legs
        pts = []
        p = self.pos
        h = b.psi
        for _ in range(n_legs):
            for _ in range(20):
                cand = _offset(p, h + self.rng.uniform(-50, 50), dist)
                if self._in_region(cand):
                    break
                h += 90.0
            else:
                cand = self._random_point(self.region)
            pts.append(cand)
            h = _heading_to(p, cand)
            p = cand
        return b.walk(pts)

    def _in_region(self, p) -> bool:
        x, y = p
        if self.region == "outside":
            return 20 <= x <= 180 and 43 <= y <= 58
        if self.region == "platform":
            x0, _, length, width = self.tpl.platform
            return x0 + 2 <= x <= x0 + length - 2 and 2.5 <= y <= width - 1
        return 25 <= x <= 175 and 20 <= y <= 37

    # -- station-specific activities -----------------------------------------

    def machine(self, label: str):
        site = self._site(label)
        self._require(site.region, label)
        b, rng = self.b, self.rng
        self.go(site.service, min_dist=8.0)
        onset = b.t
        b.face(site.facing)
        stay = activity_duration(rng)
        b.still(max(onset + stay - b.t, 1.0))
        end = b.t
        t0 = onset + rng.uniform(2.0, 5.0)
        t1 = min(end - 1.0, t0 + rng.uniform(6.0, 12.0))
        b.magnetic_event(t0, t1, rng.uniform(12.0, 20.0), ramp=rng.uniform(0.2, 0.5))
        if rng.random() >= self.habits.silent_machine:
            self.sound_requests.append((label, onset, end))
        b.label(C(label), onset, end)
        self.depart(fast=True)

    def turn_away(self):
        """Unhurried in-place turn before leaving; still part of the stay."""
        rng = self.rng
        self.b.turn(rng.uniform(40.0, 180.0) * rng.choice([-1.0, 1.0]))

    def depart(self, fast: bool):
        """Leave a site: a quick about-turn (fast) or straight off, then a few steps."""
        b, rng = self.b, self.rng
        if fast:
            b.turn(rng.uniform(130.0, 180.0) * rng.choice([-1.0, 1.0]), rate=rng.uniform(130.0, 200.0))
        for _ in range(20):
            p = _offset(self.pos, b.psi, rng.uniform(3.0, 5.0))
            if self._in_region(p):
                break
            b.turn(60.0 * rng.choice([-1.0, 1.0]))
        else:
            p = self._random_point(self.region)
        b.walk([p], turn_first=not fast)

    def restroom(self):
        site = self._site("restroom")
        self._require(site.region, "restroom")
        b = self.b
        self.go(site.service, min_dist=8.0)
        onset = b.t
        b.still(activity_duration(self.rng))
        self.restroom_spans.append((onset, b.t))
        self.turn_away()
        b.label(C.RESTROOM, onset, b.t)
        self.depart(fast=False)

    def sitting_area(self):
        site = self._site("sitting_area")
        self._require(site.region, "sitting_area")
        b, rng = self.b, self.rng
        approach = _offset(site.service, site.facing, 2.5)
        self.go(approach, min_dist=8.0)
        delta = wrap180(site.facing - _heading_to(approach, site.service))
        if abs(delta) < 100:
            delta = np.sign(delta or 1.0) * rng.uniform(110.0, 180.0)
        steps = b.walk([site.service], final_turn=(delta, rng.uniform(160.0, 240.0)))
        onset = b.t
        b.pulse_forward(steps[-1] + 0.05, rng.uniform(0.8, 1.0), rng.uniform(1.6, 2.4))
        b.still(activity_duration(rng))
        b.label(C.SITTING_AREA, onset, b.t)
        b.pulse_forward(b.t - 1.0, 0.9, -rng.uniform(1.0, 2.0))
        self.depart(fast=False)

    def standing(self):
        b, rng = self.b, self.rng
        self.stroll(rng.uniform(6.0, 12.0))
        onset = b.t
        b.still(activity_duration(rng))
        if self.region == "platform" and rng.random() < self.habits.platform_call_boarding:
            b.label(C.STANDING, onset, b.t)
            line = min(self.tpl.lines, key=lambda p: abs(p[0] - b.x))
            self._ride_train([line[0] + rng.uniform(-0.3, 0.3), -0.8])
            return
        self.turn_away()
        b.label(C.STANDING, onset, b.t)
        self.depart(fast=False)

    def walking(self):
        b, rng = self.b, self.rng
        steps = self.stroll(rng.uniform(20.0, 40.0))
        if rng.random() < 0.25 and len(steps) > 10:
            k = int(rng.integers(4, len(steps) - 4))
            b.magnetic_event(steps[k], steps[k] + rng.uniform(1.0, 2.0), rng.uniform(12.0, 20.0))
        b.label(C.WALKING, steps[0] - 0.25, b.t)

    # -- gates -----------------------------------------------------------------

    def gate(self, kind: str):
        self._require("outside", kind)
        b, rng = self.b, self.rng
        g = self.tpl.gates[rng.integers(len(self.tpl.gates))]
        x = g.position[0]
        self.go((x, GATE_Y + 7.0), min_dist=8.0)
        b.walk([(x, GATE_Y + 3.0)])
        if kind == "gate_ticket":
            before = b.walk([(x, GATE_Y + 0.3)], kind="slow", n_steps=3)
            b.still(rng.uniform(1.2, 2.2))
            after = b.walk([(x, GATE_Y - 1.6)], kind="slow", n_steps=3)
            steps = before + after
            b.magnetic_event(before[1], after[1], rng.uniform(12.0, 20.0), ramp=rng.uniform(0.2, 0.4))
            cls = C.ENTRANCE_GATE_TICKET
        else:
            b.walk([(x, GATE_Y + 2.5)])
            r = rng.random()
            if r < self.habits.ic_no_slowdown:
                steps = b.walk([(x, GATE_Y - 1.5)], n_steps=6)
            elif r < self.habits.ic_no_slowdown + self.habits.ic_stop:
                steps = b.walk([(x, GATE_Y + 0.3)], kind="slow", n_steps=3)
                b.still(rng.uniform(1.0, 1.8))
                steps += b.walk([(x, GATE_Y - 1.5)], kind="slow", n_steps=3)
            else:
                steps = b.walk([(x, GATE_Y - 1.5)], kind="slow", n_steps=6)
            b.magnetic_event(steps[1], steps[5], rng.uniform(12.0, 20.0), ramp=rng.uniform(0.2, 0.4))
            cls = C.ENTRANCE_GATE_IC
        b.label(cls, steps[0] - 0.4, steps[-1] + 0.5)
        self.region = "inside"
        b.walk([(x + rng.uniform(-6, 6), GATE_Y - 6.0)])

    # -- elevation changes -----------------------------------------------------

    def _access(self, kind: str):
        acc = self.tpl.accesses_of(kind)
        if not acc:
            raise ScenarioError(f"template has no {kind}")
        return acc[self.rng.integers(len(acc))]

    def _descend_or_climb(self, activity: str):
        down = self.sc.direction == "down"
        self._require("inside" if down else "platform", activity)
        return down, -1.0 if down else 1.0

    def _arrive(self, down: bool):
        self.region = "platform" if down else "inside"
        self.level = -self.tpl.floor_height if down else 0.0

    def stairs(self, activity: str):
        down, sign = self._descend_or_climb(activity)
        acc = self._access(activity)
        b, rng = self.b, self.rng
        h = acc.height
        n = int(round(h / STAIR_RISE))
        entry, exit_ = (acc.top, acc.bottom) if down else (acc.bottom, acc.top)
        if activity == "stairs_straight":
            travel = _heading_to(entry, exit_)
            self.go(_offset(entry, travel + 180, 4.0), min_dist=10.0)
            b.walk([entry])
            t0 = b.t
            steps = b.walk([exit_], kind="stairs", n_steps=n, climb=sign * h, turn_first=False)
            if rng.random() < self.habits.stairs_distortion:  # escalator motor next door
                b.magnetic_ripple(t0, b.t, rng.uniform(12.0, 18.0), rng.uniform(0.75, 1.25))
        else:
            lx, ly = acc.landing
            first, second = (lx - 0.75, ly), (lx + 0.75, ly)
            if not down:
                first, second = second, first
            travel = _heading_to(entry, first)
            self.go(_offset(entry, travel + 180, 4.0), min_dist=10.0)
            b.walk([entry])
            n1 = n // 2
            steps = b.walk([first], kind="stairs", n_steps=n1, climb=sign * h * n1 / n, turn_first=False)
            f = b.cadence("stairs")
            delta = 180.0 if down else -180.0
            steps += b.walk([second], cadence=f, n_steps=3, hold_heading=True, final_turn=(delta, 180.0 / (3 / f)))
            steps += b.walk([exit_], kind="stairs", n_steps=n - n1, climb=sign * h * (n - n1) / n,
                            turn_first=False)
        b.label(C(activity), steps[0] - 0.3, b.t)
        self._arrive(down)
        b.walk([_offset(self.pos, b.psi, rng.uniform(3.0, 5.0))], turn_first=False)

    def escalator(self, activity: str):
        down, sign = self._descend_or_climb(activity)
        acc = self._access("escalator")
        b, rng = self.b, self.rng
        h = acc.height
        entry, exit_ = (acc.top, acc.bottom) if down else (acc.bottom, acc.top)
        travel = _heading_to(entry, exit_)
        self.go(_offset(entry, travel + 180, 4.0), min_dist=10.0)
        b.walk([entry])
        onset = b.t
        run = h / np.tan(np.radians(30.0))
        ux, uy = np.cos(np.radians(travel)), np.sin(np.radians(travel))
        flat = rng.uniform(0.2, 0.6)
        b.glide(flat, 0.5 * flat * ux, 0.5 * flat * uy, 0.0)
        ramp_t0 = b.t
        if activity == "escalator_standing":
            b.glide(h / 0.25, run * ux, run * uy, sign * h)
        else:
            f = b.cadence("stairs")
            speed = 0.433 + 0.35 * f
            n = max(4, int(round(run / speed * f)))
            b.walk([(b.x + run * ux, b.y + run * uy)], cadence=f, n_steps=n, climb=sign * h, turn_first=False)
        ramp_t1 = b.t
        flat = rng.uniform(0.2, 0.6)
        b.glide(flat, 0.5 * flat * ux, 0.5 * flat * uy, 0.0)
        b.magnetic_ripple(ramp_t0, ramp_t1, rng.uniform(15.5, 20.0), rng.uniform(0.75, 1.25))
        b.label(C(activity), onset, b.t)
        self._arrive(down)
        b.walk([_offset(self.pos, travel, rng.uniform(3.0, 5.0))], turn_first=False)

    def elevator(self, activity: str):
        down, sign = self._descend_or_climb(activity)
        acc = self._access(activity)
        b, rng = self.b, self.rng
        cab = acc.cab
        if activity == "elevator_single":
            door_in = door_out = acc.top
        else:
            door_in, door_out = (acc.top, acc.bottom) if down else (acc.bottom, acc.top)
        facing = _heading_to(door_in, cab)
        self.go(_offset(door_in, facing + 180, 3.0), min_dist=10.0)
        b.walk([door_in])
        b.face(facing)
        onset = b.t
        b.still(rng.uniform(4.0, 12.0))
        b.walk([cab], n_steps=int(rng.integers(3, 5)), turn_first=False)
        if activity == "elevator_single":
            slow = rng.random() < self.habits.elevator_slow_turn
            rate = rng.uniform(25.0, 30.0) if slow else rng.uniform(130.0, 200.0)
            b.turn(rng.uniform(165.0, 175.0) * rng.choice([-1.0, 1.0]), rate=rate)
        b.still(rng.uniform(2.5, 4.0))
        b.ride(acc.height / rng.uniform(0.8, 1.2) + 2.0, sign * acc.height)
        b.still(rng.uniform(1.0, 2.5))
        out = door_out if activity == "elevator_double" else _offset(cab, b.psi, 2.5)
        steps = b.walk([out, _offset(out, b.psi, 1.5)], n_steps=4, turn_first=False)
        b.label(C(activity), onset, steps[2] + 0.3)
        self._arrive(down)

    # -- platform ----------------------------------------------------------------

    def board(self):
        self._require("platform", "board")
        b, rng = self.b, self.rng
        lines = self.tpl.lines
        x0, _, length, _ = self.tpl.platform
        if self.sc.free:
            d = float(sample_free_displacement(rng))
            sign = rng.choice([-1.0, 1.0])
            target = b.x + sign * d
            if not x0 + 1 <= target <= x0 + length - 1:
                target = b.x - sign * d
            target = float(np.clip(target, x0 + 1, x0 + length - 1))
            line = min(lines, key=lambda p: abs(p[0] - target))
        else:
            line = lines[rng.integers(len(lines))]
        stand = (line[0] + rng.uniform(-0.3, 0.3), line[1] + rng.uniform(0.4, 1.0))
        self.go(stand, min_dist=6.0)
        onset = b.t
        b.face(-90.0)
        b.still(max(onset + activity_duration(rng) - b.t, 1.0))
        end = b.t
        b.label(C.WAITING_LINE, onset, end)
        self._ride_train([stand[0], -0.8], n_steps=int(rng.integers(3, 5)))

    def _ride_train(self, door, n_steps: int | None = None):
        """Step into the car, wait for departure and ride until the trace ends."""
        b, rng = self.b, self.rng
        steps = b.walk([tuple(door)], n_steps=n_steps, turn_first=n_steps is None)
        b.still(rng.uniform(3.0, 10.0))
        t_ride = b.t
        ride = rng.uniform(20.0, 40.0)
        b.sway(ride)
        t = t_ride + rng.uniform(2.0, 5.0)
        while t < t_ride + ride - 3.0:
            dur = rng.uniform(1.0, 3.0)
            b.magnetic_event(t, t + dur, rng.uniform(15.0, 30.0))
            t += dur + rng.uniform(8.0, 14.0)
        b.label(C.PLATFORM_TRACK, steps[0] - 0.3, b.t)
        self.region = "train"

    # -- driver ------------------------------------------------------------------

    def run(self):
        b, rng = self.b, self.rng
        b.still(rng.uniform(1.0, 2.0))
        for activity in self.sc.activities:
            if activity in MACHINES:
                self.machine(activity)
            elif activity in ("gate_ticket", "gate_ic"):
                self.gate(activity)
            elif activity.startswith("stairs"):
                self.stairs(activity)
            elif activity.startswith("escalator"):
                self.escalator(activity)
            elif activity.startswith("elevator"):
                self.elevator(activity)
            else:
                getattr(self, activity)()
        if self.region != "train":
            self.stroll(rng.uniform(4.0, 8.0))
            b.still(1.0)


def _sound_events(kind: str, lo: float, hi: float, rng: np.random.Generator):
    """Scheduled sounds of one machine use inside a microphone window [lo, hi]."""
    events = []
    t = lo
    for _ in range(int(rng.integers(2, 4))):
        if t + 0.2 > hi:
            break
        events.append((t, 0.15, "clink", {"freq": float(rng.choice([1500.0, 2200.0]))}))
        t += rng.uniform(0.25, 0.5)
    if kind == "drink_vending":
        dur = rng.uniform(0.5, 1.0)
        start = min(t + rng.uniform(0.5, 2.0), hi - dur)
        if start >= lo:
            events.append((start, dur, "tone", {"freq": 350.0 + rng.uniform(-10, 10)}))
    elif kind == "ticket_vending":
        n = int(rng.integers(3, 7))
        gap = rng.uniform(0.3, 0.6)
        start = min(t + rng.uniform(0.5, 2.0), hi - n * gap)
        if start >= lo:
            freq = 3000.0 + rng.uniform(-20, 20)
            events += [(start + k * gap, 0.15, "tone", {"freq": freq}) for k in range(n)]
    return events


@dataclass(frozen=True, eq=False)
class SimTruth:
    """Kinematic truth behind a simulated trace (not part of the trace file)."""

    position: np.ndarray  # (n, 2) floor-frame metres
    heading: np.ndarray  # (n,) degrees
    step_times: tuple[float, ...]


def generate_trace(template: StationTemplate, scenario: Scenario, noise: NoiseModel | None = None,
                   seed: int = 0, trace_id: str = "trace-0", audio_rate: int = 8000,
                   behaviour: BehaviourModel | None = None) -> SensorTrace:
    """Simulate one passenger; deterministic in ``seed``."""
    return simulate_trace(template, scenario, noise, seed, trace_id, audio_rate, behaviour)[0]


def simulate_trace(template: StationTemplate, scenario: Scenario, noise: NoiseModel | None = None,
                   seed: int = 0, trace_id: str = "trace-0", audio_rate: int = 8000,
                   behaviour: BehaviourModel | None = None) -> tuple[SensorTrace, SimTruth]:
    noise = noise or NoiseModel()
    rng = np.random.default_rng([seed, 0x7ACE])
    ex = _Executor(template, scenario, noise, rng, behaviour or BehaviourModel())
    ex.run()
    b = ex.b
    ch = b.render(scenario.placement.value, template.pressure_base)
    t = ch["t"]
    # the phone's own gating decides when audio exists
    profile = FeaturesConfig().profile(scenario.placement)
    states = classify_motion(smooth(np.linalg.norm(ch["world_accel"], axis=1)), profile, t)
    schedule = gate_microphone((s.window_start_t, s.state) for s in states)
    events = []
    for kind, a, e in ex.sound_requests:
        for lo, hi in schedule.intervals:
            if hi > a and lo < e:
                events += _sound_events(kind, lo + 0.7, min(hi, e) - 0.3, rng)
                break
    audio = render_audio(events, schedule.intervals, audio_rate, noise.audio_snr_db, rng)
    probes = []
    for lo, hi in schedule.intervals:
        mid = 0.5 * (lo + hi)
        inside = any(a <= mid <= e for a, e in ex.restroom_spans)
        probes.append((round(mid, 6), float(rng.normal(0.8 if inside else 0.3, 0.05))))
    truth = tuple(sorted(b.truth, key=lambda s: s.start_t))
    trace = SensorTrace(
        trace_id=trace_id,
        station_id=template.station_id,
        placement=scenario.placement,
        start_position=(round(ex.start[0], 6), round(ex.start[1], 6)),
        t=t,
        accel=ch["accel"],
        gyro=ch["gyro"],
        mag=ch["mag"],
        pressure=ch["pressure"],
        orientation=ch["orientation"],
        audio=tuple(audio),
        probe_features=tuple(probes),
        ground_truth=truth,
    )
    validate_trace(trace)
    return trace, SimTruth(ch["position"], ch["heading"], tuple(b.step_times))
