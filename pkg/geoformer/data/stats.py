"""
Exploratory statistics over user histories.

Covers the seasonality of observations per slot, daily movement counts,
weekly autocorrelation and the rate of post-horizon coordinates never seen
before the horizon.
"""

from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from geoformer.core.errors import StatsError
from geoformer.core.logging import get_logger
from geoformer.core.models.config import SLOTS_PER_DAY
from geoformer.core.models.mobility import OovStats, UserHistory

logger = get_logger(__name__)

DayRange = Union[range, Tuple[int, int]]


def _as_range(day_range: DayRange) -> range:
    if isinstance(day_range, range):
        return day_range
    start, stop = day_range
    return range(start, stop)


def events_per_slot(histories: Dict[int, UserHistory], day_range: DayRange) -> np.ndarray:
    """
    Mean ping count per slot over a day range, averaged over users.

    Entry t is (pings at slot t within the range) / (days in the range) for
    each user, then averaged across users.

    Raises:
        StatsError: If the day range is empty
    """
    days = _as_range(day_range)
    if len(days) == 0:
        raise StatsError("day_range is empty")
    if not histories:
        return np.zeros(SLOTS_PER_DAY)

    per_user = np.zeros((len(histories), SLOTS_PER_DAY))
    for row, history in enumerate(histories.values()):
        for day in days:
            traj = history.days.get(day)
            if traj is None:
                continue
            for slot, _ in traj.observed():
                per_user[row, slot] += 1
    return (per_user / len(days)).mean(axis=0)


def movement_count(history: UserHistory, day: int) -> int:
    """Number of consecutive observed pings on `day` that change cell."""
    traj = history.days.get(day)
    if traj is None:
        return 0
    moves = 0
    previous = None
    for _, cell in traj.observed():
        if previous is not None and cell != previous:
            moves += 1
        previous = cell
    return moves


def daily_movement_counts(
    histories: Dict[int, UserHistory], day_range: DayRange
) -> np.ndarray:
    """Per-day mean movement count over users (missing days count as zero)."""
    days = _as_range(day_range)
    if len(days) == 0:
        raise StatsError("day_range is empty")
    if not histories:
        return np.zeros(len(days))
    counts = np.array(
        [[movement_count(h, day) for day in days] for h in histories.values()],
        dtype=np.float64,
    )
    return counts.mean(axis=0)


def autocorrelation(series: Sequence[float], lag: int) -> float:
    """
    Pearson correlation between a series and itself shifted by `lag`.

    A constant (or too short) series has no defined correlation; 0.0 is
    returned in that case.
    """
    values = np.asarray(series, dtype=np.float64)
    if lag <= 0 or lag >= len(values) - 1:
        return 0.0
    head, tail = values[:-lag], values[lag:]
    if head.std() == 0.0 or tail.std() == 0.0:
        return 0.0
    return float(np.corrcoef(head, tail)[0, 1])


def oov_rates(history: UserHistory, horizon_day: int) -> OovStats:
    """
    Fraction of a user's post-horizon pings whose x, y or (x, y) never occur
    before the horizon.

    Raises:
        StatsError: If the user has no pings on one side of the horizon
    """
    pre_x, pre_y, pre_xy = set(), set(), set()
    post: List[Tuple[int, int]] = []
    for day, traj in history.days.items():
        for _, cell in traj.observed():
            if day < horizon_day:
                pre_x.add(cell.x)
                pre_y.add(cell.y)
                pre_xy.add((cell.x, cell.y))
            else:
                post.append((cell.x, cell.y))

    if not post:
        raise StatsError(f"user {history.uid} has no pings on or after day {horizon_day}")
    if not pre_xy:
        raise StatsError(f"user {history.uid} has no pings before day {horizon_day}")

    n = len(post)
    return OovStats(
        rate_x=sum(1 for x, _ in post if x not in pre_x) / n,
        rate_y=sum(1 for _, y in post if y not in pre_y) / n,
        rate_xy=sum(1 for xy in post if xy not in pre_xy) / n,
    )


def oov_summary(
    histories: Iterable[UserHistory], horizon_day: int, bins: int = 10
) -> Dict[str, object]:
    """
    Per-user out-of-training rates with their mean and histogram.

    Users lacking pings on either side of the horizon are skipped.
    """
    per_user = {}
    for history in histories:
        try:
            per_user[history.uid] = oov_rates(history, horizon_day)
        except StatsError as e:
            logger.debug(f"Skipping user in oov summary: {e}")

    edges = np.linspace(0.0, 1.0, bins + 1)
    summary: Dict[str, object] = {"n_users": len(per_user), "bin_edges": edges.tolist()}
    for name in ("rate_x", "rate_y", "rate_xy"):
        values = np.array([getattr(s, name) for s in per_user.values()], dtype=np.float64)
        summary[f"mean_{name}"] = float(values.mean()) if len(values) else 0.0
        summary[f"hist_{name}"] = np.histogram(values, bins=edges)[0].tolist()
    summary["per_user"] = {uid: s.model_dump() for uid, s in per_user.items()}
    return summary
