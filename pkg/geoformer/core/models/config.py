"""
Configuration models for GeoFormer.

These Pydantic models define the structure and validation for every tunable
parameter of the pipeline: data handling, synthetic generation, the model,
training, generation and scoring.
"""

import math
from enum import Enum
from pathlib import Path
from typing import Any, List, Literal, Optional

from pydantic import (
    BaseModel,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

N_DAYS = 75
SLOTS_PER_DAY = 48
GRID_SIZE = 500
VOCAB_SIZE = 1021


class DataConfig(BaseModel):
    """Dataset-level settings shared by ingestion, splitting and windowing."""

    horizon_day: int = Field(default=60, ge=8, le=N_DAYS)
    dow_offset: int = Field(default=0, ge=0, le=6)
    n_val: int = Field(default=20, ge=0)
    n_test: int = Field(default=20, ge=0)
    split_seed: int = 0


class SynthConfig(BaseModel):
    """Settings for the anchor-based synthetic mobility generator."""

    n_users: int = Field(default=50, ge=0)
    n_days: int = Field(default=N_DAYS, ge=1, le=N_DAYS)
    p_observe: Optional[List[float]] = None
    noise_radius: int = Field(default=1, ge=0, le=25)
    commute_radius: int = Field(default=40, ge=1, le=200)
    n_leisure: int = Field(default=3, ge=1, le=10)
    p_explore: float = Field(default=0.02, ge=0.0, le=1.0)
    emergency_day: Optional[int] = Field(default=None, ge=0, le=N_DAYS)
    emergency_home_bias: float = Field(default=0.9, ge=0.0, le=1.0)
    emergency_observe_factor: float = Field(default=0.7, ge=0.0, le=1.0)
    dow_offset: int = Field(default=0, ge=0, le=6)
    seed: int = 0

    @field_validator('p_observe')
    @classmethod
    def validate_p_observe(cls, v):
        """Validate the per-slot observation profile."""
        if v is None:
            return v
        if len(v) != SLOTS_PER_DAY:
            raise ValueError(f'p_observe must have {SLOTS_PER_DAY} entries')
        if any(not 0.0 <= p <= 1.0 for p in v):
            raise ValueError('p_observe entries must be probabilities')
        return v


class ModelConfig(BaseModel):
    """Shape and regularization of the decoder-only transformer."""

    n_layers: int = Field(default=2, ge=1)
    n_heads: int = Field(default=4, ge=1)
    d_model: int = Field(default=128, ge=1)
    dropout_rate: float = Field(default=0.1, ge=0.0, lt=1.0)
    vocab_size: int = Field(default=VOCAB_SIZE, ge=1)
    context_len: int = Field(default=1024, ge=1)
    seed: int = 0
    dtype: Literal["float32", "float64"] = "float32"

    @model_validator(mode='after')
    def validate_heads(self):
        """d_model must split evenly across heads."""
        if self.d_model % self.n_heads != 0:
            raise ValueError(
                f'd_model ({self.d_model}) must be divisible by n_heads ({self.n_heads})'
            )
        return self


class TrainConfig(BaseModel):
    """Optimizer, schedule and loop settings."""

    lr_max: float = Field(default=5e-4, ge=0.0)
    warmup_steps: int = Field(default=200, ge=0)
    beta1: float = Field(default=0.9, gt=0.0, lt=1.0)
    beta2: float = Field(default=0.999, gt=0.0, lt=1.0)
    eps: float = Field(default=1e-5, gt=0.0)
    clip_norm: float = Field(default=5.0, gt=0.0)
    weight_decay: float = Field(default=0.01, ge=0.0)
    epochs: int = Field(default=5, ge=1)
    batch_size: int = Field(default=8, ge=1)
    total_steps: Optional[int] = Field(default=None, ge=1)
    eval_interval: int = Field(default=200, ge=1)
    target_day_only_loss: bool = False
    seed: int = 0

    @model_validator(mode='after')
    def validate_schedule(self):
        """Warmup must fit inside the schedule when the horizon is known."""
        if self.total_steps is not None and self.warmup_steps > self.total_steps:
            raise ValueError('warmup_steps must not exceed total_steps')
        return self

    def resolve_total_steps(self, n_windows: int) -> "TrainConfig":
        """
        Return a copy with total_steps filled in.

        The cosine horizon defaults to epochs x ceil(windows / batch_size).
        """
        if self.total_steps is not None:
            return self
        steps = self.epochs * max(1, math.ceil(n_windows / self.batch_size))
        warmup = min(self.warmup_steps, steps)
        return self.model_copy(update={"total_steps": steps, "warmup_steps": warmup})

    def for_finetune(self, total_steps: Optional[int] = None) -> "TrainConfig":
        """Derive the fine-tuning schedule: 10x shorter warmup, fresh horizon."""
        return self.model_copy(
            update={
                "warmup_steps": self.warmup_steps // 10,
                "total_steps": total_steps,
            }
        )


class GenConfig(BaseModel):
    """Sampling parameters for constrained generation."""

    temperature: float = Field(default=1.0, gt=0.0)
    top_k: int = Field(default=5, ge=1)
    top_p: float = Field(default=1.0, gt=0.0, le=1.0)
    candidate_window: int = Field(default=2, ge=0, le=SLOTS_PER_DAY)
    roll: bool = True
    seed: int = 0


class GeoBleuParams(BaseModel):
    """GEO-BLEU n-gram order and distance decay."""

    max_n: int = Field(default=3, ge=1)
    beta: float = Field(default=0.5, gt=0.0)


class MetricGrouping(str, Enum):
    """How points are grouped before a metric is computed."""

    PER_DAY = "per_day"
    PER_TRAJECTORY = "per_trajectory"


class EvalConfig(BaseModel):
    """Scoring configuration."""

    geobleu: GeoBleuParams = Field(default_factory=GeoBleuParams)
    geobleu_grouping: MetricGrouping = MetricGrouping.PER_DAY
    dtw_grouping: MetricGrouping = MetricGrouping.PER_TRAJECTORY


def _default_finetune() -> TrainConfig:
    return TrainConfig().for_finetune()


class RunConfig(BaseModel):
    """Root configuration for a pipeline run."""

    data: DataConfig = Field(default_factory=DataConfig)
    synth: SynthConfig = Field(default_factory=SynthConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    finetune: TrainConfig = Field(default_factory=_default_finetune)
    generation: GenConfig = Field(default_factory=GenConfig)
    metrics: EvalConfig = Field(default_factory=EvalConfig)
    output_dir: Path = Field(default=Path("runs"))
    jobs: int = Field(default=1, ge=1)
    log_level: str = "INFO"
    log_file: Optional[str] = None

    @model_validator(mode='before')
    @classmethod
    def derive_finetune(cls, data: Any) -> Any:
        """
        Build the fine-tune section from the train section.

        The derived schedule (10x shorter warmup) is the base and the user's
        partial ``finetune`` section is laid on top. An inherited warmup is
        capped at an explicit ``total_steps``.
        """
        if not isinstance(data, dict):
            return data
        partial = data.get("finetune") or {}
        if not isinstance(partial, dict):
            return data
        train = data.get("train") or {}
        try:
            base = train if isinstance(train, TrainConfig) else TrainConfig(**train)
        except (TypeError, ValidationError):
            # the train field reports its own error
            return data
        derived = base.for_finetune().model_dump()
        total = partial.get("total_steps")
        if "warmup_steps" not in partial and isinstance(total, int):
            derived["warmup_steps"] = min(derived["warmup_steps"], total)
        return {**data, "finetune": {**derived, **partial}}
