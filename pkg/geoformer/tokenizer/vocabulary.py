"""
The fixed 1021-token vocabulary.

Id layout:
    0-2      <eos>, <|data|>, <|sep|>
    3-9      <|dow0|> .. <|dow6|>
    10-19    digits 0 .. 9
    20       N (empty slot)
    21-520   x000 .. x499
    521-1020 y000 .. y499
"""

import json
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

from geoformer.core.models.config import GRID_SIZE, VOCAB_SIZE

EOS_ID = 0
DATA_ID = 1
SEP_ID = 2
DOW_BASE = 3
DIGIT_BASE = 10
EMPTY_ID = 20
X_BASE = 21
Y_BASE = X_BASE + GRID_SIZE

SPECIAL_TOKENS = ("<eos>", "<|data|>", "<|sep|>")


class Vocabulary:
    """Bidirectional token <-> id map with typed helpers for each token family."""

    def __init__(self, tokens: Sequence[str]):
        self.tokens: Tuple[str, ...] = tuple(tokens)
        self.token_to_id: Dict[str, int] = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.token_to_id) != len(self.tokens):
            raise ValueError("vocabulary tokens must be unique")

    def __len__(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        return self.token_to_id[token]

    def token_of(self, token_id: int) -> str:
        return self.tokens[token_id]

    def render(self, token_ids: Sequence[int]) -> str:
        """Concatenate token strings, e.g. '<|dow6|>NNx129y088'."""
        return "".join(self.tokens[i] for i in token_ids)

    @staticmethod
    def dow_id(dow: int) -> int:
        return DOW_BASE + dow

    @staticmethod
    def digit_id(digit: int) -> int:
        return DIGIT_BASE + digit

    @staticmethod
    def x_id(x: int) -> int:
        return X_BASE + x

    @staticmethod
    def y_id(y: int) -> int:
        return Y_BASE + y

    @staticmethod
    def is_dow(token_id: int) -> bool:
        return DOW_BASE <= token_id < DIGIT_BASE

    @staticmethod
    def is_digit(token_id: int) -> bool:
        return DIGIT_BASE <= token_id < EMPTY_ID

    @staticmethod
    def is_x(token_id: int) -> bool:
        return X_BASE <= token_id < Y_BASE

    @staticmethod
    def is_y(token_id: int) -> bool:
        return Y_BASE <= token_id < Y_BASE + GRID_SIZE

    @staticmethod
    def x_ids() -> range:
        return range(X_BASE, Y_BASE)

    @staticmethod
    def y_ids() -> range:
        return range(Y_BASE, Y_BASE + GRID_SIZE)

    def to_dict(self) -> Dict[str, int]:
        return dict(self.token_to_id)

    def dump_json(self, path: Union[str, Path]) -> Path:
        """Write the token -> id map for inspection."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")
        return path


def _token_list() -> List[str]:
    tokens = list(SPECIAL_TOKENS)
    tokens += [f"<|dow{d}|>" for d in range(7)]
    tokens += [str(d) for d in range(10)]
    tokens.append("N")
    tokens += [f"x{i:03d}" for i in range(GRID_SIZE)]
    tokens += [f"y{i:03d}" for i in range(GRID_SIZE)]
    return tokens


@lru_cache(maxsize=1)
def build_vocabulary() -> Vocabulary:
    """Return the fixed vocabulary (built once, immutable)."""
    vocab = Vocabulary(_token_list())
    assert len(vocab) == VOCAB_SIZE
    return vocab
