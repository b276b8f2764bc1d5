"""Corpora of simulated traces with per-trace derived seeds."""

from __future__ import annotations

from typing import Iterator, Mapping

import numpy as np

from ..config import ConfigError
from ..model import Placement, SemanticClass, SensorTrace
from .config import BehaviourModel, NoiseModel, SimConfig
from .scenario import Scenario, SimTruth, simulate_trace, target_scenario
from .station import StationTemplate

UNIFORM = None


def _quota(n: int, mix: Mapping[SemanticClass, float]) -> list[SemanticClass]:
    """Largest-remainder allocation of ``n`` traces to the mix."""
    classes = sorted(mix, key=lambda c: c.value)
    p = np.array([mix[c] for c in classes], dtype=float)
    raw = n * p
    counts = np.floor(raw).astype(int)
    order = sorted(range(len(classes)), key=lambda k: (-(raw[k] - counts[k]), classes[k].value))
    for k in order[: n - counts.sum()]:
        counts[k] += 1
    return [c for c, k in zip(classes, counts) for _ in range(k)]


def normalise_mix(mix: Mapping[SemanticClass | str, float] | None) -> dict[SemanticClass, float]:
    if mix is None:
        return {c: 1.0 / len(SemanticClass) for c in SemanticClass}
    out = {SemanticClass(k): float(v) for k, v in mix.items()}
    if any(v < 0 for v in out.values()) or abs(sum(out.values()) - 1.0) > 1e-6:
        raise ConfigError("mix proportions must be non-negative and sum to 1")
    return {k: v for k, v in out.items() if v > 0}


def plan_corpus(n_traces: int, mix=UNIFORM, seed: int = 0, placement_pocket: float = 0.3,
                free_fraction: float = 0.0) -> list[tuple[Scenario, int]]:
    """Scenarios and trace seeds, in corpus order."""
    rng = np.random.default_rng([seed, 0xC0B5])
    targets = _quota(n_traces, normalise_mix(mix))
    rng.shuffle(targets)
    plan = []
    for i, target in enumerate(targets):
        placement = Placement.POCKET if rng.random() < placement_pocket else Placement.HAND
        if rng.random() < free_fraction:
            scenario = Scenario(("board",), placement, free=True)
        else:
            scenario = target_scenario(target, rng, placement)
        trace_seed = int(np.random.SeedSequence([seed, i]).generate_state(1)[0])
        plan.append((scenario, trace_seed))
    return plan


def iter_corpus(template: StationTemplate, n_traces: int, mix=UNIFORM, noise: NoiseModel | None = None,
                seed: int = 0, placement_pocket: float = 0.3, free_fraction: float = 0.0,
                audio_rate: int = 8000, with_truth: bool = False,
                behaviour: BehaviourModel | None = None) -> Iterator:
    """Lazily simulate the corpus; yields traces, or (trace, truth) pairs."""
    for i, (scenario, trace_seed) in enumerate(plan_corpus(n_traces, mix, seed, placement_pocket, free_fraction)):
        trace, truth = simulate_trace(template, scenario, noise, trace_seed,
                                      f"{template.station_id}-{i:04d}", audio_rate, behaviour)
        yield (trace, truth) if with_truth else trace


def generate_corpus(template: StationTemplate, n_traces: int, mix=UNIFORM, noise: NoiseModel | None = None,
                    seed: int = 0, **kwargs) -> list[SensorTrace]:
    return list(iter_corpus(template, n_traces, mix, noise, seed, **kwargs))


def corpus_from_config(template: StationTemplate, config: SimConfig, mix=UNIFORM,
                       with_truth: bool = False) -> list[SensorTrace] | list[tuple[SensorTrace, SimTruth]]:
    return list(iter_corpus(template, config.n_traces, mix, config.noise, config.seed,
                            config.placement_pocket, config.free_fraction, config.audio_rate, with_truth,
                            config.behaviour))
