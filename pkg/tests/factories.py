"""
Small deterministic builders shared by the test suites.
"""

from typing import Dict, Optional, Sequence, Tuple

from geoformer.core.models.config import ModelConfig, SLOTS_PER_DAY, SynthConfig
from geoformer.core.models.mobility import DayTrajectory, GridCell, PingRecord, UserHistory

HOME = (10, 20)
WORK = (30, 40)
ROUTINE_SLOTS = (4, 20, 40)


def make_day(dow: int, cells: Optional[Dict[int, Tuple[int, int]]] = None) -> DayTrajectory:
    """A day with the given slot -> (x, y) cells observed."""
    slots = [None] * SLOTS_PER_DAY
    for slot, (x, y) in (cells or {}).items():
        slots[slot] = GridCell(x=x, y=y)
    return DayTrajectory(dow=dow, slots=tuple(slots))


def routine_cells(dow: int) -> Dict[int, Tuple[int, int]]:
    """Home at night and in the evening, work at midday on weekdays."""
    return {4: HOME, 20: WORK if dow < 5 else HOME, 40: HOME}


def routine_history(
    uid: int, n_days: int = 75, dow_offset: int = 0, first_day: int = 0
) -> UserHistory:
    days = {}
    for day in range(first_day, n_days):
        dow = (day + dow_offset) % 7
        days[day] = make_day(dow, routine_cells(dow))
    return UserHistory(uid=uid, dow_offset=dow_offset, days=days)


def routine_records(uids: Sequence[int], n_days: int = 75) -> list:
    records = []
    for uid in uids:
        records.extend(routine_history(uid, n_days).pings())
    return records


def ping(uid: int, day: int, slot: int, x: int, y: int) -> PingRecord:
    return PingRecord(uid=uid, day=day, slot=slot, x=x, y=y)


def tiny_model_config(**overrides) -> ModelConfig:
    """One narrow layer in float64, small enough for finite differences."""
    fields = {
        "n_layers": 1,
        "n_heads": 2,
        "d_model": 16,
        "dropout_rate": 0.0,
        "dtype": "float64",
        "seed": 0,
    }
    fields.update(overrides)
    return ModelConfig(**fields)


def small_synth_config(**overrides) -> SynthConfig:
    fields = {"n_users": 6, "n_days": 75, "seed": 0}
    fields.update(overrides)
    return SynthConfig(**fields)
