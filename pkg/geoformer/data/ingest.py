"""
CSV ingestion, serialization and user-history assembly.

Files carry the columns uid,d,t,x,y with 1-based coordinates in [1, 500];
records in memory are 0-based so they line up with the x000..x499 and
y000..y499 token labels.
"""

import re
from collections import defaultdict
from pathlib import Path
from typing import Dict, Iterable, List, Union

import numpy as np
import pandas as pd

from geoformer.core.errors import (
    ConfigurationError,
    CsvParseError,
    DuplicateRecordError,
    RangeError,
)
from geoformer.core.logging import get_logger
from geoformer.core.models.config import GRID_SIZE, N_DAYS, SLOTS_PER_DAY
from geoformer.core.models.mobility import (
    DatasetSplit,
    DayTrajectory,
    GridCell,
    PingRecord,
    UserHistory,
)

logger = get_logger(__name__)

CSV_COLUMNS = ["uid", "d", "t", "x", "y"]

# (column, low, high) inclusive bounds on the raw file values
_RAW_BOUNDS = [
    ("uid", 0, None),
    ("d", 0, N_DAYS - 1),
    ("t", 0, SLOTS_PER_DAY - 1),
    ("x", 1, GRID_SIZE),
    ("y", 1, GRID_SIZE),
]


def ingest_csv(path: Union[str, Path]) -> List[PingRecord]:
    """
    Read a ping CSV into 0-based records sorted by (uid, day, slot).

    Args:
        path: CSV file with header uid,d,t,x,y

    Returns:
        List of PingRecord

    Raises:
        CsvParseError: Bad header or malformed row (with its line number)
        RangeError: A field outside its range
        DuplicateRecordError: Two rows with the same (uid, d, t)
    """
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise CsvParseError("file is empty; expected header uid,d,t,x,y", line=1)
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        line = int(match.group(1)) if match else None
        raise CsvParseError(f"malformed row: {e}", line=line)

    if list(df.columns) != CSV_COLUMNS:
        raise CsvParseError(
            f"expected header {','.join(CSV_COLUMNS)}, got {','.join(map(str, df.columns))}",
            line=1,
        )

    if df.empty:
        logger.info(f"Ingested 0 records from {path}")
        return []

    values = {}
    for column in CSV_COLUMNS:
        parsed = pd.to_numeric(df[column].str.strip(), errors="coerce")
        bad = parsed.isna() | (parsed != np.floor(parsed))
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise CsvParseError(
                f"column {column!r} is not an integer: {df[column].iloc[row]!r}",
                line=row + 2,
            )
        values[column] = parsed.astype(np.int64).to_numpy()

    for column, low, high in _RAW_BOUNDS:
        col = values[column]
        bad = col < low
        if high is not None:
            bad |= col > high
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            upper = "inf" if high is None else high
            raise RangeError(
                f"{column}={col[row]} outside [{low}, {upper}]", line=row + 2
            )

    frame = pd.DataFrame(values)
    dupes = frame.duplicated(subset=["uid", "d", "t"], keep="first")
    if dupes.any():
        row = int(np.flatnonzero(dupes.to_numpy())[0])
        raise DuplicateRecordError(
            f"duplicate key (uid={values['uid'][row]}, d={values['d'][row]}, "
            f"t={values['t'][row]})",
            line=row + 2,
        )

    frame = frame.sort_values(["uid", "d", "t"], kind="stable")
    records = [
        PingRecord(uid=int(uid), day=int(d), slot=int(t), x=int(x) - 1, y=int(y) - 1)
        for uid, d, t, x, y in frame.itertuples(index=False, name=None)
    ]
    logger.info(f"Ingested {len(records)} records from {path}")
    return records


def records_to_frame(records: Iterable[PingRecord]) -> pd.DataFrame:
    """Records as a 1-based uid,d,t,x,y frame sorted by key."""
    rows = [(r.uid, r.day, r.slot, r.x + 1, r.y + 1) for r in records]
    frame = pd.DataFrame(rows, columns=CSV_COLUMNS, dtype=np.int64)
    return frame.sort_values(["uid", "d", "t"], kind="stable").reset_index(drop=True)


def write_csv(records: Iterable[PingRecord], path: Union[str, Path]) -> Path:
    """
    Write records in the ingestion format (1-based coordinates, LF endings).

    Args:
        records: Records to serialize
        path: Destination file

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = records_to_frame(records)
    frame.to_csv(path, index=False, lineterminator="\n")
    logger.debug(f"Wrote {len(frame)} records to {path}")
    return path


def build_histories(
    records: Iterable[PingRecord], dow_offset: int = 0
) -> Dict[int, UserHistory]:
    """
    Assemble per-user histories.

    Days between a user's first and last observed day that carry no pings are
    materialized as all-absent days so every window has exactly 8 day blocks.

    Args:
        records: Valid ping records
        dow_offset: Day-of-week of day 0

    Returns:
        Map uid -> UserHistory
    """
    if not 0 <= dow_offset <= 6:
        raise ConfigurationError(f"dow_offset must be in [0, 6], got {dow_offset}")

    by_user: Dict[int, Dict[int, List]] = defaultdict(dict)
    for record in records:
        day_slots = by_user[record.uid].get(record.day)
        if day_slots is None:
            day_slots = [None] * SLOTS_PER_DAY
            by_user[record.uid][record.day] = day_slots
        day_slots[record.slot] = GridCell(x=record.x, y=record.y)

    histories = {}
    for uid in sorted(by_user):
        user_days = by_user[uid]
        first, last = min(user_days), max(user_days)
        days = {}
        for day in range(first, last + 1):
            dow = (day + dow_offset) % 7
            slots = user_days.get(day)
            if slots is None:
                days[day] = DayTrajectory.empty(dow)
            else:
                days[day] = DayTrajectory(dow=dow, slots=tuple(slots))
        histories[uid] = UserHistory(uid=uid, dow_offset=dow_offset, days=days)
    return histories


def split_users(
    histories: Dict[int, UserHistory],
    n_val: int,
    n_test: int,
    seed: int = 0,
    horizon_day: int = 60,
) -> DatasetSplit:
    """
    Draw disjoint validation and test users; everybody else trains.

    The split is a pure function of (uid set, seed, n_val, n_test).

    Raises:
        ConfigurationError: If there are not enough users
    """
    uids = sorted(histories)
    if n_val < 0 or n_test < 0:
        raise ConfigurationError("n_val and n_test must be non-negative")
    if n_val + n_test > len(uids):
        raise ConfigurationError(
            f"cannot draw {n_val} val + {n_test} test users from {len(uids)} users"
        )

    order = np.random.default_rng(seed).permutation(len(uids))
    shuffled = [uids[i] for i in order]
    val = frozenset(shuffled[:n_val])
    test = frozenset(shuffled[n_val:n_val + n_test])
    train = frozenset(shuffled[n_val + n_test:])
    logger.info(
        f"Split {len(uids)} users: {len(train)} train, {len(val)} val, {len(test)} test"
    )
    return DatasetSplit(
        train_uids=train, val_uids=val, test_uids=test, horizon_day=horizon_day
    )
