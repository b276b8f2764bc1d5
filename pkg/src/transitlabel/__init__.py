"""Semantic annotation of transit station maps from smartphone sensor traces.

Traces are segmented into stationary, moving and elevation activities,
classified into station semantics, positioned by pedestrian dead reckoning
and clustered into an annotated map.
"""

from .config import ConfigError, PipelineConfig, load_pipeline_config
from .model import (
    AnnotatedMap,
    Floorplan,
    GroundTruthSpan,
    SemanticClass,
    SemanticDetection,
    SensorTrace,
    TraceError,
    read_map,
    read_trace,
    write_map,
    write_trace,
)
from .pipeline import PipelineResult, analyse_trace, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "AnnotatedMap", "ConfigError", "Floorplan", "GroundTruthSpan", "PipelineConfig", "PipelineResult",
    "SemanticClass", "SemanticDetection", "SensorTrace", "TraceError", "analyse_trace",
    "load_pipeline_config", "read_map", "read_trace", "run_pipeline", "write_map", "write_trace",
]
