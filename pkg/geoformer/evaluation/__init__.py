"""
Metrics, evaluation reports and generation sweeps.
"""

from geoformer.evaluation.metrics import MetricError, dtw, dtw_bruteforce, geo_bleu
from geoformer.evaluation.report import EvalReport, EvalSet, UserScore, build_eval_set, evaluate
from geoformer.evaluation.sweep import (
    SweepRow,
    sweep_generation,
    write_sweep_csv,
    write_sweep_json,
)

__all__ = [
    "EvalReport",
    "EvalSet",
    "MetricError",
    "SweepRow",
    "UserScore",
    "build_eval_set",
    "dtw",
    "dtw_bruteforce",
    "evaluate",
    "geo_bleu",
    "sweep_generation",
    "write_sweep_csv",
    "write_sweep_json",
]
