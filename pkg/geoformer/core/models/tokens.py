"""
Token-level data models: linearized windows and target signatures.
"""

from enum import Enum
from typing import Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from geoformer.core.models.config import SLOTS_PER_DAY


class SlotFlag(str, Enum):
    """Whether a signature slot is skipped or must be predicted."""

    SKIP = "N"
    PREDICT = "xy"


class TargetSignature(BaseModel):
    """Per-day prediction scaffold: a dow plus 48 Skip/Predict flags."""

    model_config = ConfigDict(frozen=True)

    dow: int = Field(ge=0, le=6)
    slots: Tuple[SlotFlag, ...]

    @field_validator('slots')
    @classmethod
    def validate_slots(cls, v):
        if len(v) != SLOTS_PER_DAY:
            raise ValueError(f'a signature has exactly {SLOTS_PER_DAY} flags, got {len(v)}')
        return v

    @property
    def n_predict(self) -> int:
        return sum(1 for flag in self.slots if flag is SlotFlag.PREDICT)


class LinearizedWindow(BaseModel):
    """An 8-day token sequence ready for the model."""

    model_config = ConfigDict(frozen=True)

    uid: int
    start_day: int
    token_ids: Tuple[int, ...]
    sep_index: int = Field(ge=0)
    window_days: int = 8

    def __len__(self) -> int:
        return len(self.token_ids)
