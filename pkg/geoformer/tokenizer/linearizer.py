"""
Trajectory <-> token sequence conversion.

A training window is laid out as

    uid digits, <|data|>, 7 x (dow token + day body), <|sep|>,
    target dow token + target day body, <eos>

where a day body holds 48 slot encodings, each either `N` or an x token
followed by a y token.
"""

from typing import List, Sequence, Tuple

from geoformer.core.errors import GeoFormerError
from geoformer.core.models.config import SLOTS_PER_DAY
from geoformer.core.models.mobility import DayTrajectory, GridCell, UserHistory
from geoformer.core.models.tokens import LinearizedWindow, SlotFlag, TargetSignature
from geoformer.tokenizer.vocabulary import (
    DATA_ID,
    EMPTY_ID,
    EOS_ID,
    SEP_ID,
    X_BASE,
    Y_BASE,
    Vocabulary,
)

WINDOW_DAYS = 8
CONTEXT_DAYS = WINDOW_DAYS - 1
DEFAULT_CONTEXT_LEN = 1024


class TokenizationError(GeoFormerError):
    """Base exception for tokenizer failures."""
    pass


class DecodeError(TokenizationError):
    """Raised when a token sequence is not a valid day encoding."""
    pass


class SignatureError(TokenizationError):
    """Raised when a signature string is malformed."""
    pass


class WindowError(TokenizationError):
    """Raised when a window cannot be built from a history."""
    pass


def encode_uid(uid: int) -> List[int]:
    """Decimal digits of uid as digit-token ids, unpadded."""
    if uid < 0:
        raise TokenizationError(f"uid must be non-negative, got {uid}")
    return [Vocabulary.digit_id(int(ch)) for ch in str(uid)]


def encode_day(day: DayTrajectory) -> List[int]:
    """Dow token followed by the 48 slot encodings."""
    ids = [Vocabulary.dow_id(day.dow)]
    for cell in day.slots:
        if cell is None:
            ids.append(EMPTY_ID)
        else:
            ids.append(X_BASE + cell.x)
            ids.append(Y_BASE + cell.y)
    return ids


def decode_day(tokens: Sequence[int], expected_dow: int) -> DayTrajectory:
    """
    Inverse of encode_day.

    Raises:
        DecodeError: Wrong or missing dow token, an x token not followed by a
            y token, a stray token, or a slot count other than 48
    """
    if not tokens or not Vocabulary.is_dow(tokens[0]):
        raise DecodeError("day block must start with a dow token")
    dow = tokens[0] - Vocabulary.dow_id(0)
    if dow != expected_dow:
        raise DecodeError(f"dow mismatch: expected {expected_dow}, found {dow}")

    slots: List = []
    i = 1
    n = len(tokens)
    while i < n:
        tok = tokens[i]
        if tok == EMPTY_ID:
            slots.append(None)
            i += 1
        elif Vocabulary.is_x(tok):
            if i + 1 >= n or not Vocabulary.is_y(tokens[i + 1]):
                raise DecodeError(f"x token at position {i} is not followed by a y token")
            slots.append(GridCell(x=tok - X_BASE, y=tokens[i + 1] - Y_BASE))
            i += 2
        else:
            raise DecodeError(f"unexpected token id {tok} at position {i}")
        if len(slots) > SLOTS_PER_DAY:
            raise DecodeError(f"more than {SLOTS_PER_DAY} slots in day block")

    if len(slots) != SLOTS_PER_DAY:
        raise DecodeError(f"expected {SLOTS_PER_DAY} slots, found {len(slots)}")
    return DayTrajectory(dow=dow, slots=tuple(slots))


def build_context(uid: int, days: Sequence[DayTrajectory]) -> List[int]:
    """Prompt for generation: uid digits, <|data|>, the context days, <|sep|>."""
    ids = encode_uid(uid)
    ids.append(DATA_ID)
    for day in days:
        ids.extend(encode_day(day))
    ids.append(SEP_ID)
    return ids


def linearize_window(
    history: UserHistory, start_day: int, context_len: int = DEFAULT_CONTEXT_LEN
) -> LinearizedWindow:
    """
    Linearize days start_day .. start_day+7 of a history.

    Raises:
        WindowError: If any of the 8 days is outside the history, or the
            sequence would exceed context_len
    """
    day_numbers = range(start_day, start_day + WINDOW_DAYS)
    missing = [d for d in day_numbers if d not in history.days]
    if missing:
        raise WindowError(
            f"window at day {start_day} for user {history.uid} needs days {missing} "
            "outside the available view"
        )

    days = [history.days[d] for d in day_numbers]
    ids = build_context(history.uid, days[:CONTEXT_DAYS])
    sep_index = len(ids) - 1
    ids.extend(encode_day(days[-1]))
    ids.append(EOS_ID)
    if len(ids) > context_len:
        raise WindowError(f"window length {len(ids)} exceeds context_len {context_len}")
    return LinearizedWindow(
        uid=history.uid, start_day=start_day, token_ids=tuple(ids), sep_index=sep_index
    )


def decode_window(window: LinearizedWindow) -> Tuple[int, List[DayTrajectory]]:
    """Recover (uid, 8 day trajectories) from a linearized window."""
    ids = list(window.token_ids)
    i = 0
    digits = []
    while i < len(ids) and Vocabulary.is_digit(ids[i]):
        digits.append(str(ids[i] - Vocabulary.digit_id(0)))
        i += 1
    if not digits or i >= len(ids) or ids[i] != DATA_ID:
        raise DecodeError("window must start with uid digits followed by <|data|>")
    uid = int("".join(digits))
    i += 1

    # Day blocks are delimited by the next dow, <|sep|> or <eos> token.
    days = []
    while i < len(ids):
        if ids[i] in (SEP_ID, EOS_ID):
            i += 1
            continue
        j = i + 1
        while j < len(ids) and not (Vocabulary.is_dow(ids[j]) or ids[j] in (SEP_ID, EOS_ID)):
            j += 1
        block = ids[i:j]
        days.append(decode_day(block, expected_dow=block[0] - Vocabulary.dow_id(0)))
        i = j
    return uid, days


def parse_signature(text: str) -> TargetSignature:
    """
    Parse a target signature such as '6NNNNxyN...'.

    The leading digit is the day-of-week; the rest is 48 items of `N` (skip)
    or `xy` (predict) with no separators.

    Raises:
        SignatureError: Bad leading digit, illegal character or item count
    """
    text = text.strip()
    if not text or not text[0].isdigit():
        raise SignatureError("signature must start with a day-of-week digit")
    dow = int(text[0])
    if dow > 6:
        raise SignatureError(f"day-of-week digit must be 0-6, got {dow}")

    flags = []
    i = 1
    while i < len(text):
        if text[i] == "N":
            flags.append(SlotFlag.SKIP)
            i += 1
        elif text.startswith("xy", i):
            flags.append(SlotFlag.PREDICT)
            i += 2
        else:
            raise SignatureError(f"illegal character {text[i]!r} at position {i}")

    if len(flags) != SLOTS_PER_DAY:
        raise SignatureError(f"expected {SLOTS_PER_DAY} items, found {len(flags)}")
    return TargetSignature(dow=dow, slots=tuple(flags))


def render_signature(signature: TargetSignature) -> str:
    """Inverse of parse_signature."""
    return str(signature.dow) + "".join(flag.value for flag in signature.slots)


def signature_from_day(day: DayTrajectory) -> TargetSignature:
    """Predict exactly where the day is observed."""
    return TargetSignature(
        dow=day.dow,
        slots=tuple(
            SlotFlag.SKIP if cell is None else SlotFlag.PREDICT for cell in day.slots
        ),
    )
