"""
Training windows and batch collation.

A window is 8 consecutive days of one user: 7 context days and one target
day. Held-out users only ever contribute windows that end before the
horizon; their post-horizon days are reachable solely through the
validation windows built from full histories.
"""

from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from geoformer.autograd.ops import IGNORE_INDEX
from geoformer.core.errors import GeoFormerError
from geoformer.core.logging import get_logger
from geoformer.core.models.config import N_DAYS
from geoformer.core.models.mobility import DatasetSplit, UserHistory
from geoformer.core.models.tokens import LinearizedWindow
from geoformer.tokenizer.linearizer import DEFAULT_CONTEXT_LEN, WINDOW_DAYS, linearize_window
from geoformer.tokenizer.vocabulary import EOS_ID

logger = get_logger(__name__)


class TrainingError(GeoFormerError):
    """Base exception for window construction and the training loop."""
    pass


class TrainingWindow(BaseModel):
    """Reference to 8 contiguous days of one user."""

    model_config = ConfigDict(frozen=True)

    uid: int
    start_day: int
    days: Tuple[int, ...]

    @field_validator('days')
    @classmethod
    def validate_days(cls, v):
        if len(v) != WINDOW_DAYS:
            raise ValueError(f'a window spans {WINDOW_DAYS} days, got {len(v)}')
        if any(b - a != 1 for a, b in zip(v, v[1:])):
            raise ValueError('window days must be contiguous')
        return v

    @property
    def target_day(self) -> int:
        return self.days[-1]

    @classmethod
    def starting_at(cls, uid: int, start_day: int) -> "TrainingWindow":
        return cls(
            uid=uid,
            start_day=start_day,
            days=tuple(range(start_day, start_day + WINDOW_DAYS)),
        )


def _check_range(day_min: int, day_max: int) -> None:
    if day_max - day_min < WINDOW_DAYS:
        raise TrainingError(
            f"day range [{day_min}, {day_max}) is shorter than a {WINDOW_DAYS}-day window"
        )


def _user_windows(history: UserHistory, day_min: int, day_max: int) -> List[TrainingWindow]:
    windows = []
    for start in range(day_min, day_max - WINDOW_DAYS + 1):
        if all(d in history.days for d in range(start, start + WINDOW_DAYS)):
            windows.append(TrainingWindow.starting_at(history.uid, start))
    return windows


def make_windows(
    split: DatasetSplit,
    histories: Dict[int, UserHistory],
    day_min: int = 0,
    day_max: int = N_DAYS,
) -> List[TrainingWindow]:
    """
    Stride-1 training windows inside [day_min, day_max).

    Windows are enumerated over the split's training view, so val and test
    users yield only windows ending before the horizon.

    Raises:
        TrainingError: If the range cannot hold a single window
    """
    _check_range(day_min, day_max)
    view = split.training_view(histories)
    windows = []
    for uid in sorted(view):
        windows.extend(_user_windows(view[uid], day_min, day_max))
    logger.info(
        f"Built {len(windows)} training windows over days [{day_min}, {day_max}) "
        f"from {len(view)} users"
    )
    return windows


def make_eval_windows(
    split: DatasetSplit,
    histories: Dict[int, UserHistory],
    day_min: int = 0,
    day_max: int = N_DAYS,
) -> List[TrainingWindow]:
    """
    Validation windows: val users only, target day at or after the horizon.

    These come from full histories and never enter a training batch.
    """
    _check_range(day_min, day_max)
    windows = []
    for uid in sorted(split.val_uids):
        if uid not in histories:
            continue
        windows.extend(
            w
            for w in _user_windows(histories[uid], day_min, day_max)
            if w.target_day >= split.horizon_day
        )
    return windows


class Batch(BaseModel):
    """Padded model inputs with next-token targets."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    inputs: np.ndarray
    targets: np.ndarray
    windows: List[LinearizedWindow]

    @property
    def n_targets(self) -> int:
        return int((self.targets != IGNORE_INDEX).sum())


def collate(windows: Sequence[LinearizedWindow], target_day_only: bool = False) -> Batch:
    """
    Pad to the longest window in the batch.

    Inputs are tokens[:-1] and targets tokens[1:]; padded positions carry
    IGNORE_INDEX. With target_day_only, targets up to and including the
    <|sep|> token are ignored as well.
    """
    if not windows:
        raise TrainingError("cannot collate an empty batch")
    width = max(len(w) for w in windows) - 1
    inputs = np.full((len(windows), width), EOS_ID, dtype=np.int64)
    targets = np.full((len(windows), width), IGNORE_INDEX, dtype=np.int64)
    for row, window in enumerate(windows):
        ids = np.asarray(window.token_ids, dtype=np.int64)
        n = len(ids) - 1
        inputs[row, :n] = ids[:-1]
        targets[row, :n] = ids[1:]
        if target_day_only:
            targets[row, :window.sep_index] = IGNORE_INDEX
    return Batch(inputs=inputs, targets=targets, windows=list(windows))


class WindowDataset:
    """
    Windows bound to the histories they are linearized from.

    Linearization happens per batch so a large window list stays cheap.
    """

    def __init__(
        self,
        windows: Sequence[TrainingWindow],
        histories: Dict[int, UserHistory],
        context_len: int = DEFAULT_CONTEXT_LEN,
        target_day_only: bool = False,
    ):
        self.windows = list(windows)
        self.histories = histories
        self.context_len = context_len
        self.target_day_only = target_day_only

    @classmethod
    def for_training(
        cls,
        split: DatasetSplit,
        histories: Dict[int, UserHistory],
        day_min: int = 0,
        day_max: int = N_DAYS,
        context_len: int = DEFAULT_CONTEXT_LEN,
        target_day_only: bool = False,
    ) -> "WindowDataset":
        windows = make_windows(split, histories, day_min, day_max)
        return cls(windows, split.training_view(histories), context_len, target_day_only)

    @classmethod
    def for_validation(
        cls,
        split: DatasetSplit,
        histories: Dict[int, UserHistory],
        day_min: int = 0,
        day_max: int = N_DAYS,
        context_len: int = DEFAULT_CONTEXT_LEN,
        target_day_only: bool = False,
    ) -> "WindowDataset":
        windows = make_eval_windows(split, histories, day_min, day_max)
        return cls(windows, histories, context_len, target_day_only)

    def __len__(self) -> int:
        return len(self.windows)

    def linearize(self, window: TrainingWindow) -> LinearizedWindow:
        return linearize_window(self.histories[window.uid], window.start_day, self.context_len)

    def batch(self, indices: Sequence[int]) -> Batch:
        return collate(
            [self.linearize(self.windows[i]) for i in indices], self.target_day_only
        )

    def batches(
        self, batch_size: int, order: Optional[Sequence[int]] = None
    ) -> Iterator[Batch]:
        order = list(range(len(self.windows))) if order is None else list(order)
        for start in range(0, len(order), batch_size):
            yield self.batch(order[start:start + batch_size])
