"""Simulator settings, loadable from the same flat JSON file as the pipeline
(keys prefixed ``simulator.``)."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from ..config import ConfigError, build, parse_flat


@dataclass(frozen=True)
class NoiseModel:
    heading_drift: float = 0.5  # deg/s, bound of the per-trace gyro bias
    compass_sigma: float = 5.0  # deg
    accel_sigma: float = 0.05  # m/s^2
    gyro_sigma: float = 0.3  # deg/s
    mag_sigma: float = 0.3  # uT
    pressure_sigma: float = 0.02  # hPa
    audio_snr_db: float = 10.0
    stride_sigma: float = 0.02  # m, per-trace stride bias

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if f.name != "audio_snr_db" and getattr(self, f.name) < 0:
                raise ConfigError(f"noise {f.name} must be non-negative")

    @classmethod
    def zero(cls) -> "NoiseModel":
        """No sensor noise.  Audio keeps its background: the tone detector's
        3-sigma rule is relative to it and flags anything without it."""
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, cls.audio_snr_db, 0.0)


@dataclass(frozen=True)
class BehaviourModel:
    """Rates of atypical passenger behaviour that blur the usual signatures."""

    ic_no_slowdown: float = 0.06  # IC user keeps walking pace through the gate
    ic_stop: float = 0.04  # IC card not read at once: the user stops at the reader
    elevator_slow_turn: float = 0.08  # single-door cab: turns around gradually
    stairs_distortion: float = 0.08  # straight stairs beside an escalator motor
    platform_call_boarding: float = 0.1  # standing on the platform, then boarding
    silent_machine: float = 0.05  # machine sounds not captured

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if not 0 <= getattr(self, f.name) <= 1:
                raise ConfigError(f"behaviour rate {f.name} must lie in [0, 1]")

    @classmethod
    def typical(cls) -> "BehaviourModel":
        """Every passenger follows the textbook usage pattern."""
        return cls(*(0.0 for _ in dataclasses.fields(cls)))


@dataclass(frozen=True)
class StationConfig:
    station_id: str = "sim-station"
    platform_length: float = 160.0
    platform_width: float = 12.0
    car_length: float = 20.0
    n_cars: int = 8
    doors_per_car: int = 3
    door_spacing: float = 5.2
    floor_height_min: float = 4.0
    floor_height_max: float = 6.0

    def __post_init__(self):
        if self.n_cars < 1:
            raise ConfigError("station needs at least one car")
        if self.doors_per_car < 1:
            raise ConfigError("cars need at least one door")
        if (self.doors_per_car - 1) * self.door_spacing >= self.car_length:
            raise ConfigError("doors do not fit in a car")
        if not 0 < self.floor_height_min <= self.floor_height_max:
            raise ConfigError("bad floor height range")


@dataclass(frozen=True)
class SimConfig:
    seed: int = 7
    n_traces: int = 200
    free_fraction: float = 0.0  # share of free-walking platform traces
    placement_pocket: float = 0.3
    audio_rate: int = 8000
    station: StationConfig = field(default_factory=StationConfig)
    noise: NoiseModel = field(default_factory=NoiseModel)
    behaviour: BehaviourModel = field(default_factory=BehaviourModel)

    def __post_init__(self):
        if self.n_traces < 0:
            raise ConfigError("n_traces must be non-negative")
        if not 0 <= self.free_fraction <= 1 or not 0 <= self.placement_pocket <= 1:
            raise ConfigError("fractions must lie in [0, 1]")
        if self.audio_rate < 7000:
            raise ConfigError("audio rate too low for the 3 kHz band")


def load_sim_config(path: str | Path | None = None) -> SimConfig:
    if path is None:
        return SimConfig()
    flat = parse_flat(Path(path).read_text(encoding="utf-8"), str(path))
    sim = {k[len("simulator."):]: v for k, v in flat.items() if k.startswith("simulator.")}
    return build(SimConfig(), sim)
