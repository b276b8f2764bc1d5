"""Synthetic station layout.

One 2-D frame holds both levels: the paid concourse upstairs (gate line at
y = 40, unpaid area above it) and the platform below (y in [0, width],
track edge at y = 0).  Accesses join the two levels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import ConfigError
from ..model import Floorplan
from .config import StationConfig

BOUNDS = (0.0, 0.0, 200.0, 60.0)
PLATFORM_X0 = 20.0
GATE_Y = 40.0
LINE_Y = 1.5
STAIR_RISE = 0.17  # m per step
STAIR_TREAD = 0.3
ESCALATOR_SLOPE = 30.0  # degrees


@dataclass(frozen=True)
class Site:
    """A place where an activity happens.

    ``position`` is the true semantic location, ``service`` where the
    passenger stands, and ``facing`` the heading (deg) while using it.
    """

    name: str
    label: str
    position: tuple[float, float]
    service: tuple[float, float]
    facing: float
    region: str


@dataclass(frozen=True)
class Access:
    name: str
    kind: str  # stairs_straight | stairs_half_landing | escalator | elevator_single | elevator_double
    top: tuple[float, float]
    bottom: tuple[float, float]
    height: float
    position: tuple[float, float]
    landing: tuple[float, float] | None = None  # half-landing turn point
    cab: tuple[float, float] | None = None

    @property
    def label(self) -> str:
        return self.kind


@dataclass(frozen=True)
class StationTemplate:
    station_id: str
    floor_height: float
    pressure_base: float
    bounds: tuple[float, float, float, float]
    platform: tuple[float, float, float, float]  # x0, y0, length, width
    car_length: float
    doors_per_car: int
    n_cars: int
    lines: tuple[tuple[float, float], ...]
    sites: tuple[Site, ...]
    accesses: tuple[Access, ...]
    gates: tuple[Site, ...]
    entrances: tuple[tuple[float, float], ...]

    @property
    def floors(self) -> int:
        return 2

    @property
    def platform_origin(self) -> tuple[float, float]:
        return self.platform[0], self.platform[1]

    def sites_of(self, label: str) -> list[Site]:
        return [s for s in self.sites if s.label == label]

    def accesses_of(self, kind: str) -> list[Access]:
        return [a for a in self.accesses if a.kind == kind]

    def true_semantics(self) -> list[tuple[str, tuple[float, float]]]:
        out = [(s.label, s.position) for s in self.sites + self.gates]
        out += [("escalator" if a.kind == "escalator" else a.kind, a.position) for a in self.accesses]
        out += [("waiting_line", p) for p in self.lines]
        x0, y0, length, _ = self.platform
        out.append(("platform_track", (x0 + length / 2, y0)))
        return sorted(out)

    def floorplan(self) -> Floorplan:
        x0, y0, length, width = self.platform
        platform_poly = ((x0, y0), (x0 + length, y0), (x0 + length, y0 + width), (x0, y0 + width))
        return Floorplan(self.station_id, self.bounds, (platform_poly,), tuple(self.true_semantics()))


def _jitter(rng: np.random.Generator, p, amount: float = 1.0) -> tuple[float, float]:
    d = rng.uniform(-amount, amount, 2)
    return round(p[0] + d[0], 2), round(p[1] + d[1], 2)


def generate_station(seed: int, config: StationConfig | None = None) -> StationTemplate:
    config = config or StationConfig()
    rng = np.random.default_rng([seed, 0x57A7])
    x0 = PLATFORM_X0
    length, width = config.platform_length, config.platform_width
    if config.n_cars * config.car_length > length + 1e-9:
        raise ConfigError("train longer than the platform")
    if x0 + length > BOUNDS[2] or width > 12.5:
        raise ConfigError("platform does not fit in the station bounds")
    height = round(float(rng.uniform(config.floor_height_min, config.floor_height_max)), 2)
    centre = (config.doors_per_car - 1) / 2
    offsets = [config.car_length / 2 + (k - centre) * config.door_spacing for k in range(config.doors_per_car)]
    lines = tuple((round(x0 + c * config.car_length + o, 3), LINE_Y)
                  for c in range(config.n_cars) for o in offsets)

    sites = []

    def add(label, base, facing, region, k):
        p = _jitter(rng, base)
        sites.append(Site(f"{label}#{k}", label, p, p, facing, region))

    for k, x in enumerate((84.0, 100.0, 116.0)):
        add("ticket_vending", (x, 56.0), 90.0, "outside", k)
    for k, x in enumerate((68.0, 132.0)):
        add("drink_vending", (x, 54.0), 90.0, "outside", k)
    add("locker", (62.0, 46.0), 180.0, "outside", 0)
    add("locker", (138.0, 46.0), 0.0, "outside", 1)
    add("restroom", (75.0, 47.0), 90.0, "outside", 0)
    add("restroom", (140.0, 30.0), 0.0, "inside", 1)
    add("sitting_area", (60.0, 30.0), -90.0, "inside", 0)
    add("sitting_area", (100.0, 9.0), -90.0, "platform", 1)
    gates = tuple(Site(f"entrance_gate#{k}", "entrance_gate", (x, GATE_Y), (x, GATE_Y), -90.0, "gate")
                  for k, x in enumerate((90.0, 100.0, 110.0)))

    stair_run = height / STAIR_RISE * STAIR_TREAD
    esc_run = height / np.tan(np.radians(ESCALATOR_SLOPE))
    base_y = 10.0
    accesses = [
        Access("stairs_straight#0", "stairs_straight", (45.0, base_y + stair_run), (45.0, base_y),
               height, (45.0, round(base_y + stair_run / 2, 3))),
    ]
    half = stair_run / 2
    top = (61.0, base_y + half + 2.0)
    landing = (61.75, base_y + 2.0)
    accesses.append(Access("stairs_half_landing#0", "stairs_half_landing", top,
                           (62.5, base_y + half + 2.0), height, landing, landing=landing))
    for k, x in enumerate((85.0, 115.0)):
        accesses.append(Access(f"escalator#{k}", "escalator", (x, base_y + esc_run + 1.0), (x, base_y),
                               height, (x, round(base_y + 0.5 + esc_run / 2, 3))))
    cab_y = 13.0
    accesses.append(Access("elevator_single#0", "elevator_single", (135.0, cab_y + 2.5), (135.0, cab_y + 2.5),
                           height, (135.0, cab_y), cab=(135.0, cab_y)))
    accesses.append(Access("elevator_double#0", "elevator_double", (150.0, cab_y + 2.5), (150.0, cab_y - 2.5),
                           height, (150.0, cab_y), cab=(150.0, cab_y)))
    entrances = ((55.0, 50.0), (145.0, 50.0), (100.0, 59.5))
    template = StationTemplate(
        station_id=config.station_id,
        floor_height=height,
        pressure_base=round(float(rng.uniform(1005.0, 1020.0)), 2),
        bounds=BOUNDS,
        platform=(x0, 0.0, length, width),
        car_length=config.car_length,
        doors_per_car=config.doors_per_car,
        n_cars=config.n_cars,
        lines=lines,
        sites=tuple(sites),
        accesses=tuple(accesses),
        gates=gates,
        entrances=entrances,
    )
    plan = template.floorplan()
    for _, p in plan.true_semantics:
        if not plan.contains(p):
            raise ConfigError(f"semantic at {p} outside the station bounds")
    return template
