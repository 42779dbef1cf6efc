"""
Scoring predicted pings against held-out truth.
"""

from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from geoformer.core.errors import KeyMismatchError
from geoformer.core.logging import get_logger
from geoformer.core.models.config import EvalConfig, GenConfig, MetricGrouping, N_DAYS
from geoformer.core.models.mobility import PingRecord, UserHistory
from geoformer.core.models.tokens import TargetSignature
from geoformer.evaluation.metrics import MetricError, dtw, geo_bleu
from geoformer.tokenizer.linearizer import signature_from_day

logger = get_logger(__name__)

PingKey = Tuple[int, int, int]


class EvalSet(BaseModel):
    """Signatures to fill and the truth they are scored against."""

    horizon_day: int
    signatures: Dict[int, Dict[int, TargetSignature]]
    truth: List[PingRecord]

    @property
    def uids(self) -> List[int]:
        return sorted(self.signatures)


def build_eval_set(
    histories: Mapping[int, UserHistory],
    uids: Iterable[int],
    horizon_day: int = 60,
    day_max: int = N_DAYS,
) -> EvalSet:
    """
    Evaluation targets for days [horizon_day, day_max) of the given users.

    Each day's signature predicts exactly the observed slots of that day, so
    predictions and truth share their keys by construction. Users without
    any post-horizon ping are left out.
    """
    signatures: Dict[int, Dict[int, TargetSignature]] = {}
    truth: List[PingRecord] = []
    for uid in sorted(uids):
        history = histories[uid]
        pings = history.pings(horizon_day, day_max)
        if not pings:
            logger.debug(f"User {uid} has no pings in [{horizon_day}, {day_max}); skipped")
            continue
        signatures[uid] = {
            day: signature_from_day(history.day_or_empty(day))
            for day in range(horizon_day, day_max)
        }
        truth.extend(pings)
    return EvalSet(horizon_day=horizon_day, signatures=signatures, truth=truth)


class UserScore(BaseModel):
    uid: int
    dtw: float = Field(ge=0.0)
    geobleu: float = Field(ge=0.0, le=1.0)
    n_points: int
    n_days: int


class EvalReport(BaseModel):
    """Aggregate and per-user scores with the configuration that produced them."""

    mean_dtw: float = Field(ge=0.0)
    mean_geobleu: float = Field(ge=0.0, le=1.0)
    n_users: int
    n_points: int
    per_user: List[UserScore]
    config: EvalConfig
    generation: Optional[GenConfig] = None

    def write_json(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.model_dump_json(indent=2) + "\n", encoding="utf-8")
        return path


def _index(records: Iterable[PingRecord], label: str) -> Dict[PingKey, PingRecord]:
    out: Dict[PingKey, PingRecord] = {}
    for r in records:
        if r.key in out:
            raise MetricError(f"duplicate {label} record for (uid, day, slot) {r.key}")
        out[r.key] = r
    return out


def evaluate(
    predictions: Iterable[PingRecord],
    truth: Iterable[PingRecord],
    config: Optional[EvalConfig] = None,
    generation: Optional[GenConfig] = None,
    jobs: int = 1,
) -> EvalReport:
    """
    Score predictions against truth.

    GEO-BLEU and DTW are each computed per (user, day) or per user over all
    days, as the config's groupings say, on slot-ordered points. Per-day
    scores are averaged over user-days for the aggregate; per-user entries
    average that user's days.

    Raises:
        KeyMismatchError: If the (uid, day, slot) key sets differ
        MetricError: On duplicate keys or nothing to score
    """
    config = config or EvalConfig()
    pred = _index(predictions, "prediction")
    true = _index(truth, "truth")
    if pred.keys() != true.keys():
        raise KeyMismatchError(
            missing_in_predictions=sorted(true.keys() - pred.keys()),
            missing_in_truth=sorted(pred.keys() - true.keys()),
        )
    if not true:
        raise MetricError("no points to score")

    by_user_day: Dict[int, Dict[int, List[PingKey]]] = defaultdict(lambda: defaultdict(list))
    for key in sorted(true):
        by_user_day[key[0]][key[1]].append(key)

    def score(
        metric, keys_by_day: Dict[int, List[PingKey]], grouping: MetricGrouping
    ) -> List[float]:
        if grouping is MetricGrouping.PER_DAY:
            groups = [keys_by_day[d] for d in sorted(keys_by_day)]
        else:
            groups = [[k for d in sorted(keys_by_day) for k in keys_by_day[d]]]
        return [metric([pred[k] for k in g], [true[k] for k in g]) for g in groups]

    def bleu(gen, ref):
        return geo_bleu(gen, ref, config.geobleu)

    def score_user(uid: int) -> Tuple[List[float], List[float]]:
        days = by_user_day[uid]
        return score(dtw, days, config.dtw_grouping), score(bleu, days, config.geobleu_grouping)

    uids = sorted(by_user_day)
    if jobs <= 1:
        scored = [score_user(uid) for uid in uids]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            scored = list(pool.map(score_user, uids))

    per_user: List[UserScore] = []
    all_dtw: List[float] = []
    all_bleu: List[float] = []
    for uid, (dtw_scores, bleu_scores) in zip(uids, scored):
        days = by_user_day[uid]
        all_dtw.extend(dtw_scores)
        all_bleu.extend(bleu_scores)
        per_user.append(
            UserScore(
                uid=uid,
                dtw=float(np.mean(dtw_scores)),
                geobleu=float(np.mean(bleu_scores)),
                n_points=sum(len(v) for v in days.values()),
                n_days=len(days),
            )
        )

    report = EvalReport(
        mean_dtw=float(np.mean(all_dtw)),
        mean_geobleu=float(np.mean(all_bleu)),
        n_users=len(per_user),
        n_points=len(true),
        per_user=per_user,
        config=config,
        generation=generation,
    )
    logger.info(
        f"Scored {report.n_points} points of {report.n_users} users: "
        f"GEO-BLEU {report.mean_geobleu:.4f}, DTW {report.mean_dtw:.4f}"
    )
    return report

