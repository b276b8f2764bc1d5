"""Pipeline configuration.

Every threshold is a field with its default; a config file is a flat JSON
object whose keys are dotted paths (``"features.var_stationary": 1.8``).
Unknown keys are rejected so typos do not silently fall back to defaults.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .model import Placement


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ThresholdProfile:
    mag_peak_rise: float = 10.0  # uT
    mag_peak_window: int = 50  # samples
    surge_angle: float = 75.0  # degrees
    surge_window: int = 60  # samples
    var_stationary: float = 1.8  # (m/s^2)^2
    var_slow: float = 7.0
    var_window: int = 200  # samples
    window_stride: int = 50  # samples
    baro_window: float = 10.0  # seconds, 50% overlap
    baro_noise_floor: float = 0.1  # hPa max-difference trigger
    mag_var_threshold: float = 100.0  # uT^2
    mag_var_window: int = 200  # samples
    floor_change_hpa: float = 0.3

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if not getattr(self, f.name) > 0:
                raise ConfigError(f"threshold {f.name} must be positive")
        if not self.var_stationary < self.var_slow:
            raise ConfigError("var_stationary must be below var_slow")


@dataclass(frozen=True)
class PreprocessConfig:
    half_width: int = 10
    pressure_half_width: int = 25
    gate_trigger: float = 4.0
    gate_cap: float = 60.0
    fallback_orientation: bool = True
    gravity_cutoff: float = 2.0  # seconds, low-pass time constant of the fallback


@dataclass(frozen=True)
class FeaturesConfig:
    hand: ThresholdProfile = field(default_factory=ThresholdProfile)
    pocket_var_scale: float = 1.5

    def profile(self, placement: Placement | str) -> ThresholdProfile:
        if Placement(placement) is Placement.POCKET:
            return dataclasses.replace(
                self.hand,
                var_stationary=self.hand.var_stationary * self.pocket_var_scale,
                var_slow=self.hand.var_slow * self.pocket_var_scale,
            )
        return self.hand


@dataclass(frozen=True)
class AcousticConfig:
    drink_freq: float = 350.0
    ticket_freq: float = 3000.0
    band_half_width: float = 50.0
    frame_length: int = 4096  # samples at reference_rate
    reference_rate: int = 44100
    noise_span: float = 0.5  # seconds at segment start
    sigma: float = 3.0
    debounce: int = 3
    smooth_window: int = 32
    restroom_threshold: float = 0.6


@dataclass(frozen=True)
class PdrConfig:
    stride: float = 0.7
    alpha: float = 0.98
    gravity: float = 9.80665
    step_margin: float = 0.8  # m/s^2 above gravity
    min_step_gap: float = 0.3
    max_step_gap: float = 1.0
    reset_radius: float = 5.0


@dataclass(frozen=True)
class ClassifierConfig:
    min_stationary: float = 15.0
    sitting_y_threshold: float = 1.0
    sitting_surge_lead: float = 2.0
    departure_window: float = 3.0
    gate_context: float = 120.0
    gate_pause_gap: float = 1.0  # step gap that counts as a full pause
    gate_window: float = 3.0  # seconds around the peak searched for gait changes
    gate_slow_gap: float = 0.58  # step gap marking a slow-down
    platform_radius: float = 12.0
    motorized_freq: float = 1.0
    motorized_min_windows: int = 3
    elevator_lead: float = 25.0
    elevator_wait: float = 3.0
    elevator_max_steps_in: int = 10
    ramp_margin: float = 1.0
    elevator_still_before_ramp: float = 1.5  # cab dwell separating elevators from escalators
    elevator_exit_window: float = 10.0
    boarding_max_steps: int = 15
    boarding_lookahead: float = 15.0  # bout end to boarding start, for waiting lines
    standing_fraction: float = 0.8  # share of stationary windows in a standing-escalator ramp
    stairs_stride: float = 0.3  # horizontal tread per stair step
    escalator_slope: float = 30.0  # degrees, converts height into horizontal run
    hpa_per_meter: float = 0.12


@dataclass(frozen=True)
class ClusterParams:
    eps: float
    minpts: int

    def __post_init__(self):
        if not self.eps > 0:
            raise ConfigError("eps must be positive")
        if self.minpts < 2:
            raise ConfigError("minpts must be at least 2")


def _default_clusters() -> dict[str, ClusterParams]:
    point = ClusterParams(2.0, 10)
    table = {
        label: point
        for label in (
            "drink_vending", "ticket_vending", "locker", "entrance_gate", "restroom",
            "sitting_area", "elevator_single", "elevator_double", "escalator",
            "stairs_straight", "stairs_half_landing",
        )
    }
    table["waiting_line"] = ClusterParams(2.5, 5)
    table["platform_track"] = ClusterParams(5.0, 10)
    return table


@dataclass(frozen=True)
class MapperConfig:
    clusters: dict[str, ClusterParams] = field(default_factory=_default_clusters)
    change_windows: int = 2
    change_min_detections: int = 50
    doors_per_car: int = 3

    def params(self, label: str) -> ClusterParams:
        try:
            return self.clusters[label]
        except KeyError:
            raise ConfigError(f"no cluster parameters for {label!r}") from None


@dataclass(frozen=True)
class PipelineConfig:
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    features: FeaturesConfig = field(default_factory=FeaturesConfig)
    acoustic: AcousticConfig = field(default_factory=AcousticConfig)
    pdr: PdrConfig = field(default_factory=PdrConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    mapper: MapperConfig = field(default_factory=MapperConfig)


# ---------------------------------------------------------------------------
# flat-key (de)serialization shared with the simulator config


def flatten(obj: Any, prefix: str = "") -> dict[str, Any]:
    out: dict[str, Any] = {}
    if dataclasses.is_dataclass(obj):
        items = ((f.name, getattr(obj, f.name)) for f in dataclasses.fields(obj))
    elif isinstance(obj, dict):
        items = sorted(obj.items())
    else:
        return {prefix: obj}
    for key, value in items:
        name = f"{prefix}.{key}" if prefix else key
        if dataclasses.is_dataclass(value) or isinstance(value, dict):
            out.update(flatten(value, name))
        else:
            out[name] = value
    return out


def _coerce(value: Any, template: Any, key: str) -> Any:
    if isinstance(template, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected a boolean")
        return value
    if isinstance(template, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer")
        return value
    if isinstance(template, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number")
        return float(value)
    if isinstance(template, str):
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string")
        return value
    if isinstance(template, (list, tuple)):
        if not isinstance(value, list):
            raise ConfigError(f"{key}: expected a list")
        return type(template)(value)
    return value


def apply_overrides(obj: Any, flat: dict[str, Any], prefix: str = "") -> Any:
    """Return a copy of dataclass ``obj`` with dotted-key overrides applied."""
    if isinstance(obj, dict):
        out = dict(obj)
        for name, value in obj.items():
            sub = f"{prefix}.{name}" if prefix else name
            out[name] = apply_overrides(value, flat, sub)
        return out
    if not dataclasses.is_dataclass(obj):
        if prefix in flat:
            return _coerce(flat[prefix], obj, prefix)
        return obj
    changes = {}
    for f in dataclasses.fields(obj):
        sub = f"{prefix}.{f.name}" if prefix else f.name
        value = getattr(obj, f.name)
        if dataclasses.is_dataclass(value) or isinstance(value, dict):
            changes[f.name] = apply_overrides(value, flat, sub)
        elif sub in flat:
            changes[f.name] = _coerce(flat[sub], value, sub)
    try:
        return dataclasses.replace(obj, **changes)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def parse_flat(text: str, source: str = "<config>") -> dict[str, Any]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be an object")
    for key, value in data.items():
        if isinstance(value, dict):
            raise ConfigError(f"{source}: key {key!r} must be flat (use dotted names)")
    return data


def build(default: Any, flat: dict[str, Any]) -> Any:
    known = set(flatten(default))
    for key in flat:
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
    return apply_overrides(default, flat)


def load_pipeline_config(path: str | Path | None = None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    flat = parse_flat(Path(path).read_text(encoding="utf-8"), str(path))
    return build(PipelineConfig(), {k: v for k, v in flat.items() if not k.startswith("simulator.")})


def dump_flat(obj: Any, prefix: str = "") -> str:
    return json.dumps(flatten(obj, prefix), indent=1, sort_keys=True) + "\n"
