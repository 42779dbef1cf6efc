"""
Per-user candidate token sets for constrained decoding.

A slot's candidates are the x and y tokens the user visited within a few
slots of it on earlier days with the same day-of-week. When that set is
empty the index widens step by step: the whole day-of-week, then the user's
whole pre-horizon history, then the full coordinate range.
"""

from enum import IntEnum
from typing import Dict, FrozenSet, Iterable, Iterator, Optional, Tuple

from geoformer.core.logging import get_logger
from geoformer.core.models.config import SLOTS_PER_DAY
from geoformer.core.models.mobility import UserHistory
from geoformer.tokenizer.vocabulary import Vocabulary

logger = get_logger(__name__)

AXES = ("x", "y")


class CandidateTier(IntEnum):
    """Which widening step produced a candidate set."""

    SLOT_WINDOW = 1
    DAY_OF_WEEK = 2
    HISTORY = 3
    UNCONSTRAINED = 4


_FULL_RANGE = {
    "x": frozenset(Vocabulary.x_ids()),
    "y": frozenset(Vocabulary.y_ids()),
}

TokenSets = Tuple[FrozenSet[int], FrozenSet[int]]


class CandidateIndex:
    """Candidate x/y token sets for one user, keyed by (dow, slot)."""

    def __init__(
        self,
        uid: int,
        entries: Dict[Tuple[int, int], TokenSets],
        by_dow: Dict[int, TokenSets],
        overall: TokenSets,
        window: int,
        history: Optional[UserHistory] = None,
        horizon_day: int = 0,
    ):
        self.uid = uid
        self.history = history
        self.horizon_day = horizon_day
        self.entries = entries
        self.by_dow = by_dow
        self.overall = overall
        self.window = window

    def entry(self, dow: int, slot: int) -> TokenSets:
        return self.entries[(dow, slot)]

    def tiers(
        self, dow: int, slot: int, axis: str
    ) -> Iterator[Tuple[CandidateTier, FrozenSet[int]]]:
        """Non-empty candidate sets for a slot, narrowest first."""
        i = AXES.index(axis)
        chain = [
            (CandidateTier.SLOT_WINDOW, self.entries[(dow, slot)][i]),
            (CandidateTier.DAY_OF_WEEK, self.by_dow[dow][i]),
            (CandidateTier.HISTORY, self.overall[i]),
            (CandidateTier.UNCONSTRAINED, _FULL_RANGE[axis]),
        ]
        for tier, tokens in chain:
            if tokens:
                yield tier, tokens

    def allowed(self, dow: int, slot: int, axis: str) -> Tuple[CandidateTier, FrozenSet[int]]:
        """The narrowest non-empty set for a slot."""
        return next(self.tiers(dow, slot, axis))


def build_candidate_index(
    history: UserHistory, horizon_day: int, window: int = 2
) -> CandidateIndex:
    """
    Index a user's pre-horizon visits.

    Entry (w, t) is the union of x tokens (and, separately, y tokens) of pings
    at slots t-window .. t+window, clamped to the day, on days before
    horizon_day whose dow is w. Empty sets are allowed.
    """
    seen_x: Dict[Tuple[int, int], set] = {}
    seen_y: Dict[Tuple[int, int], set] = {}
    dow_x: Dict[int, set] = {w: set() for w in range(7)}
    dow_y: Dict[int, set] = {w: set() for w in range(7)}
    all_x, all_y = set(), set()

    for day, traj in history.days.items():
        if day >= horizon_day:
            continue
        for slot, cell in traj.observed():
            x_tok, y_tok = Vocabulary.x_id(cell.x), Vocabulary.y_id(cell.y)
            seen_x.setdefault((traj.dow, slot), set()).add(x_tok)
            seen_y.setdefault((traj.dow, slot), set()).add(y_tok)
            dow_x[traj.dow].add(x_tok)
            dow_y[traj.dow].add(y_tok)
            all_x.add(x_tok)
            all_y.add(y_tok)

    entries: Dict[Tuple[int, int], TokenSets] = {}
    for dow in range(7):
        for slot in range(SLOTS_PER_DAY):
            xs: set = set()
            ys: set = set()
            for s in range(max(0, slot - window), min(SLOTS_PER_DAY - 1, slot + window) + 1):
                xs |= seen_x.get((dow, s), set())
                ys |= seen_y.get((dow, s), set())
            entries[(dow, slot)] = (frozenset(xs), frozenset(ys))

    if not all_x:
        logger.debug(f"User {history.uid} has no pings before day {horizon_day}")
    return CandidateIndex(
        uid=history.uid,
        entries=entries,
        by_dow={w: (frozenset(dow_x[w]), frozenset(dow_y[w])) for w in range(7)},
        overall=(frozenset(all_x), frozenset(all_y)),
        window=window,
        history=history,
        horizon_day=horizon_day,
    )


def visited_tokens(
    history: UserHistory,
    horizon_day: int,
    axis: str,
    dow: Optional[int] = None,
    slots: Optional[Iterable[int]] = None,
) -> FrozenSet[int]:
    """
    Location tokens of one axis read straight from a user's days.

    Only days before horizon_day count. `dow` and `slots` narrow the scan.
    """
    wanted = None if slots is None else set(slots)
    tokens = set()
    for day, traj in history.days.items():
        if day >= horizon_day or (dow is not None and traj.dow != dow):
            continue
        for slot, cell in traj.observed():
            if wanted is not None and slot not in wanted:
                continue
            tokens.add(Vocabulary.x_id(cell.x) if axis == "x" else Vocabulary.y_id(cell.y))
    return frozenset(tokens)


def tier_tokens(
    history: UserHistory,
    horizon_day: int,
    window: int,
    dow: int,
    slot: int,
    axis: str,
    tier: CandidateTier,
) -> FrozenSet[int]:
    """The token set a tier stands for, recomputed from the history alone."""
    if tier is CandidateTier.SLOT_WINDOW:
        slots = range(slot - window, slot + window + 1)
        return visited_tokens(history, horizon_day, axis, dow, slots)
    if tier is CandidateTier.DAY_OF_WEEK:
        return visited_tokens(history, horizon_day, axis, dow)
    if tier is CandidateTier.HISTORY:
        return visited_tokens(history, horizon_day, axis)
    return _FULL_RANGE[axis]

