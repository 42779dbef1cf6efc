"""
Deterministic synthetic mobility generator.

Each user gets a home anchor, a work anchor within commuting distance and a
few leisure anchors. Nights are spent at home, weekday daytime at work with a
lunch outing, weekend daytime at a leisure spot. Pings are jittered within a
noise radius and dropped independently per slot according to an observation
profile. After an optional emergency day, users stay home on most days and
are observed less often.
"""

from typing import Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from geoformer.core.errors import ConfigurationError
from geoformer.core.logging import get_logger
from geoformer.core.models.config import GRID_SIZE, SLOTS_PER_DAY, SynthConfig
from geoformer.core.models.mobility import PingRecord
from geoformer.data.ingest import build_histories
from geoformer.data.stats import (
    autocorrelation,
    daily_movement_counts,
    events_per_slot,
    oov_summary,
)

logger = get_logger(__name__)

HOME, COMMUTE, WORK, LUNCH, LEISURE = range(5)
_ANCHOR_MARGIN = 50


def default_observation_profile() -> List[float]:
    """Sparse nights, dense daytime, moderate evenings."""
    profile = []
    for slot in range(SLOTS_PER_DAY):
        if slot < 14:
            profile.append(0.15)
        elif slot < 38:
            profile.append(0.6)
        elif slot < 44:
            profile.append(0.4)
        else:
            profile.append(0.15)
    return profile


def _day_plan(dow: int) -> List[int]:
    """Anchor kind for each slot of a day with the given dow."""
    plan = [HOME] * SLOTS_PER_DAY
    if dow < 5:
        plan[16:18] = [COMMUTE] * 2
        plan[18:24] = [WORK] * 6
        plan[24:26] = [LUNCH] * 2
        plan[26:34] = [WORK] * 8
        plan[34:36] = [COMMUTE] * 2
    else:
        plan[20:32] = [LEISURE] * 12
    return plan


class _UserAnchors:
    """Anchor cells of one synthetic user."""

    def __init__(self, rng: np.random.Generator, cfg: SynthConfig):
        low, high = _ANCHOR_MARGIN, GRID_SIZE - _ANCHOR_MARGIN
        self.home = rng.integers(low, high, size=2)
        self.work = self._near(rng, self.home, cfg.commute_radius)
        self.commute = (self.home + self.work) // 2
        self.lunch = self._near(rng, self.work, max(1, cfg.commute_radius // 4))
        self.leisure = [
            self._near(rng, self.home, cfg.commute_radius) for _ in range(cfg.n_leisure)
        ]
        self.explore_radius = 3 * cfg.commute_radius

    @staticmethod
    def _near(rng: np.random.Generator, center: np.ndarray, radius: int) -> np.ndarray:
        offset = rng.integers(-radius, radius + 1, size=2)
        return np.clip(center + offset, 0, GRID_SIZE - 1)

    def cell(self, kind: int, dow: int) -> np.ndarray:
        if kind == HOME:
            return self.home
        if kind == WORK:
            return self.work
        if kind == COMMUTE:
            return self.commute
        if kind == LUNCH:
            return self.lunch
        return self.leisure[dow % len(self.leisure)]


def generate_synthetic(cfg: SynthConfig) -> List[PingRecord]:
    """
    Generate records for cfg.n_users users over cfg.n_days days.

    Output is fully determined by cfg; each user draws from its own stream
    seeded with (cfg.seed, uid).

    Raises:
        ConfigurationError: If the emergency day lies outside the simulated days
    """
    if cfg.emergency_day is not None and cfg.emergency_day > cfg.n_days:
        raise ConfigurationError(
            f"emergency_day {cfg.emergency_day} beyond n_days {cfg.n_days}"
        )

    profile = np.asarray(cfg.p_observe or default_observation_profile(), dtype=np.float64)
    plans = [_day_plan(dow) for dow in range(7)]
    records: List[PingRecord] = []

    for uid in range(cfg.n_users):
        rng = np.random.default_rng([cfg.seed, uid])
        anchors = _UserAnchors(rng, cfg)
        for day in range(cfg.n_days):
            dow = (day + cfg.dow_offset) % 7
            emergency = cfg.emergency_day is not None and day >= cfg.emergency_day
            stay_home = rng.random() < cfg.emergency_home_bias
            p_day = profile * cfg.emergency_observe_factor if emergency else profile

            observed = rng.random(SLOTS_PER_DAY) < p_day
            jitter = rng.integers(
                -cfg.noise_radius, cfg.noise_radius + 1, size=(SLOTS_PER_DAY, 2)
            )
            explore = rng.random(SLOTS_PER_DAY) < cfg.p_explore
            wander = rng.integers(
                -anchors.explore_radius, anchors.explore_radius + 1,
                size=(SLOTS_PER_DAY, 2),
            )

            for slot in np.flatnonzero(observed):
                kind = plans[dow][slot]
                if emergency and stay_home:
                    kind = HOME
                base = anchors.cell(kind, dow)
                if explore[slot]:
                    base = anchors.home + wander[slot]
                x, y = np.clip(base + jitter[slot], 0, GRID_SIZE - 1)
                records.append(
                    PingRecord(uid=uid, day=day, slot=int(slot), x=int(x), y=int(y))
                )

    logger.info(f"Generated {len(records)} synthetic records for {cfg.n_users} users")
    return records


class SynthPropertiesReport(BaseModel):
    """Qualitative signatures a synthetic dataset should exhibit."""

    events_per_slot: List[float]
    daily_movement: List[float]
    autocorrelation: Dict[int, float]
    mean_movement_before: float
    mean_movement_after: float
    oov: Dict[str, object] = Field(default_factory=dict)


def synth_properties_report(
    records: Sequence[PingRecord],
    horizon: int = 60,
    dow_offset: int = 0,
    max_lag: int = 14,
) -> SynthPropertiesReport:
    """
    Summarize seasonality, weekly periodicity and out-of-training rates.

    Args:
        records: Non-empty ping records
        horizon: Boundary day for the before/after comparison and oov rates
        dow_offset: Day-of-week of day 0
        max_lag: Largest autocorrelation lag reported (days)
    """
    if not records:
        raise ConfigurationError("cannot summarize an empty record set")
    histories = build_histories(records, dow_offset=dow_offset)
    last_day = max(r.day for r in records) + 1
    daily = daily_movement_counts(histories, (0, last_day))
    before = daily[:horizon]
    after = daily[horizon:]
    return SynthPropertiesReport(
        events_per_slot=events_per_slot(histories, (0, last_day)).tolist(),
        daily_movement=daily.tolist(),
        autocorrelation={lag: autocorrelation(daily, lag) for lag in range(1, max_lag + 1)},
        mean_movement_before=float(before.mean()) if len(before) else 0.0,
        mean_movement_after=float(after.mean()) if len(after) else 0.0,
        oov=oov_summary(histories.values(), horizon),
    )
