"""
Mobility data models.

Pings live on a 500x500 grid over 75 days of 48 half-hour slots. Everything
here is immutable after construction so histories can be shared freely between
worker threads.
"""

from typing import Dict, FrozenSet, Iterator, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from geoformer.core.models.config import GRID_SIZE, N_DAYS, SLOTS_PER_DAY


class GridCell(BaseModel):
    """A 0-based cell of the 500x500 grid."""

    model_config = ConfigDict(frozen=True)

    x: int = Field(ge=0, lt=GRID_SIZE)
    y: int = Field(ge=0, lt=GRID_SIZE)


class PingRecord(BaseModel):
    """One observation: user `uid` was in cell (x, y) at (day, slot)."""

    model_config = ConfigDict(frozen=True)

    uid: int = Field(ge=0)
    day: int = Field(ge=0, lt=N_DAYS)
    slot: int = Field(ge=0, lt=SLOTS_PER_DAY)
    x: int = Field(ge=0, lt=GRID_SIZE)
    y: int = Field(ge=0, lt=GRID_SIZE)

    @property
    def key(self) -> Tuple[int, int, int]:
        return (self.uid, self.day, self.slot)

    @property
    def cell(self) -> GridCell:
        return GridCell(x=self.x, y=self.y)


class DayTrajectory(BaseModel):
    """The 48 slots of one day; a slot is either None (absent) or a GridCell."""

    model_config = ConfigDict(frozen=True)

    dow: int = Field(ge=0, le=6)
    slots: Tuple[Optional[GridCell], ...]

    @field_validator('slots')
    @classmethod
    def validate_slots(cls, v):
        if len(v) != SLOTS_PER_DAY:
            raise ValueError(f'a day has exactly {SLOTS_PER_DAY} slots, got {len(v)}')
        return v

    @classmethod
    def empty(cls, dow: int) -> "DayTrajectory":
        return cls(dow=dow, slots=(None,) * SLOTS_PER_DAY)

    def observed(self) -> Iterator[Tuple[int, GridCell]]:
        """Yield (slot, cell) for every observed slot in order."""
        for slot, cell in enumerate(self.slots):
            if cell is not None:
                yield slot, cell

    @property
    def n_observed(self) -> int:
        return sum(1 for cell in self.slots if cell is not None)


class UserHistory(BaseModel):
    """All materialized days of one user, keyed by day number."""

    model_config = ConfigDict(frozen=True)

    uid: int = Field(ge=0)
    dow_offset: int = Field(default=0, ge=0, le=6)
    days: Dict[int, DayTrajectory] = Field(default_factory=dict)

    @model_validator(mode='after')
    def validate_days(self):
        for day, traj in self.days.items():
            if not 0 <= day < N_DAYS:
                raise ValueError(f'day {day} outside [0, {N_DAYS})')
            if traj.dow != self.dow(day):
                raise ValueError(
                    f'day {day} has dow {traj.dow}, expected {self.dow(day)}'
                )
        return self

    def dow(self, day: int) -> int:
        return (day + self.dow_offset) % 7

    def day_or_empty(self, day: int) -> DayTrajectory:
        """Return the stored day, or an all-absent day with the right dow."""
        traj = self.days.get(day)
        return traj if traj is not None else DayTrajectory.empty(self.dow(day))

    def truncated(self, before_day: int) -> "UserHistory":
        """Copy keeping only days strictly before `before_day`."""
        kept = {d: t for d, t in self.days.items() if d < before_day}
        return UserHistory(uid=self.uid, dow_offset=self.dow_offset, days=kept)

    def pings(self, day_min: int = 0, day_max: int = N_DAYS) -> List[PingRecord]:
        """Flatten days in [day_min, day_max) back into ping records."""
        out = []
        for day in sorted(self.days):
            if day_min <= day < day_max:
                for slot, cell in self.days[day].observed():
                    out.append(
                        PingRecord(uid=self.uid, day=day, slot=slot, x=cell.x, y=cell.y)
                    )
        return out

    @property
    def first_day(self) -> Optional[int]:
        return min(self.days) if self.days else None

    @property
    def last_day(self) -> Optional[int]:
        return max(self.days) if self.days else None


class DatasetSplit(BaseModel):
    """Disjoint train/val/test user sets plus the prediction horizon."""

    model_config = ConfigDict(frozen=True)

    train_uids: FrozenSet[int]
    val_uids: FrozenSet[int]
    test_uids: FrozenSet[int]
    horizon_day: int = 60

    @model_validator(mode='after')
    def validate_disjoint(self):
        if (
            self.train_uids & self.val_uids
            or self.train_uids & self.test_uids
            or self.val_uids & self.test_uids
        ):
            raise ValueError('train, val and test user sets must be disjoint')
        return self

    @property
    def held_out_uids(self) -> FrozenSet[int]:
        return self.val_uids | self.test_uids

    def training_view(self, histories: Dict[int, UserHistory]) -> Dict[int, UserHistory]:
        """Histories as training may see them: held-out users cut at the horizon."""
        view = {}
        for uid, history in histories.items():
            if uid in self.held_out_uids:
                view[uid] = history.truncated(self.horizon_day)
            else:
                view[uid] = history
        return view


class OovStats(BaseModel):
    """Out-of-training rates of one user's post-horizon pings."""

    model_config = ConfigDict(frozen=True)

    rate_x: float = Field(ge=0.0, le=1.0)
    rate_y: float = Field(ge=0.0, le=1.0)
    rate_xy: float = Field(ge=0.0, le=1.0)

    @model_validator(mode='after')
    def validate_pair_rate(self):
        # An unseen x or unseen y forces an unseen pair.
        if self.rate_xy < self.rate_x or self.rate_xy < self.rate_y:
            raise ValueError('rate_xy must dominate rate_x and rate_y')
        return self
