"""Synthetic stations and passenger traces with ground truth."""

from .config import BehaviourModel, NoiseModel, SimConfig, StationConfig, load_sim_config
from .corpus import corpus_from_config, generate_corpus, iter_corpus, plan_corpus
from .scenario import (
    Scenario,
    ScenarioError,
    SimTruth,
    generate_trace,
    sample_free_displacement,
    simulate_trace,
    target_scenario,
)
from .station import Access, Site, StationTemplate, generate_station

__all__ = [
    "Access", "BehaviourModel", "NoiseModel", "Scenario", "ScenarioError", "SimConfig", "SimTruth", "Site", "StationConfig",
    "StationTemplate", "corpus_from_config", "generate_corpus", "generate_station", "generate_trace",
    "iter_corpus", "load_sim_config", "plan_corpus", "sample_free_displacement", "simulate_trace",
    "target_scenario",
]
