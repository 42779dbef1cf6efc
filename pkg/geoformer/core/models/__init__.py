"""
Pydantic models shared across GeoFormer.
"""

from geoformer.core.models.config import (
    DataConfig,
    EvalConfig,
    GenConfig,
    GeoBleuParams,
    MetricGrouping,
    ModelConfig,
    RunConfig,
    SynthConfig,
    TrainConfig,
)
from geoformer.core.models.mobility import (
    DatasetSplit,
    DayTrajectory,
    GridCell,
    OovStats,
    PingRecord,
    UserHistory,
)
from geoformer.core.models.tokens import LinearizedWindow, SlotFlag, TargetSignature

__all__ = [
    # Configuration
    "DataConfig",
    "EvalConfig",
    "GenConfig",
    "GeoBleuParams",
    "MetricGrouping",
    "ModelConfig",
    "RunConfig",
    "SynthConfig",
    "TrainConfig",
    # Mobility
    "DatasetSplit",
    "DayTrajectory",
    "GridCell",
    "OovStats",
    "PingRecord",
    "UserHistory",
    # Tokens
    "LinearizedWindow",
    "SlotFlag",
    "TargetSignature",
]
