"""
Window construction and the training loop.
"""

from geoformer.training.trainer import (
    DivergenceError,
    EvalRecord,
    StepRecord,
    Trainer,
    TrainResult,
    evaluate_loss,
    finetune,
    run_training,
)
from geoformer.training.windows import (
    Batch,
    TrainingError,
    TrainingWindow,
    WindowDataset,
    collate,
    make_eval_windows,
    make_windows,
)

__all__ = [
    "Batch",
    "DivergenceError",
    "EvalRecord",
    "StepRecord",
    "TrainResult",
    "Trainer",
    "TrainingError",
    "TrainingWindow",
    "WindowDataset",
    "collate",
    "evaluate_loss",
    "finetune",
    "make_eval_windows",
    "make_windows",
    "run_training",
]
