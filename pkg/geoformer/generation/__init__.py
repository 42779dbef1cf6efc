"""
Constrained generation: candidate sets, sampling and rolling prediction.
"""

from geoformer.generation.candidates import (
    CandidateIndex,
    CandidateTier,
    build_candidate_index,
)
from geoformer.generation.generator import (
    AuditRecord,
    DecodingAudit,
    GeneratedDay,
    GeoFormerPredictor,
    InsufficientContextError,
    PredictorInterface,
    RandomCandidatePredictor,
    generate_day,
    has_enough_context,
    predict_all,
    predict_horizon,
)
from geoformer.generation.sampler import ImpossibleConstraintError, SampleResult, sample_token

__all__ = [
    "AuditRecord",
    "CandidateIndex",
    "CandidateTier",
    "DecodingAudit",
    "GeneratedDay",
    "GeoFormerPredictor",
    "ImpossibleConstraintError",
    "InsufficientContextError",
    "PredictorInterface",
    "RandomCandidatePredictor",
    "SampleResult",
    "build_candidate_index",
    "generate_day",
    "has_enough_context",
    "predict_all",
    "predict_horizon",
    "sample_token",
]
