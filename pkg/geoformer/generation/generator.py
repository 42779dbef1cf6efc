"""
Signature-driven day generation and the rolling 15-day prediction.

A day is generated by forcing its dow token, then walking the signature:
skipped slots get a forced `N`, predicted slots get an x token sampled from
the slot's candidate set followed by a y token sampled the same way. Every
sampled location token can be written to an audit log together with the
candidate tier it was drawn from.
"""

import threading
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from geoformer.core.errors import GeoFormerError
from geoformer.core.logging import JsonLinesWriter, get_logger
from geoformer.core.models.config import GenConfig, N_DAYS
from geoformer.core.models.mobility import DayTrajectory, PingRecord, UserHistory
from geoformer.core.models.tokens import SlotFlag, TargetSignature
from geoformer.generation.candidates import (
    CandidateIndex,
    CandidateTier,
    build_candidate_index,
    tier_tokens,
)
from geoformer.generation.sampler import ImpossibleConstraintError, SampleResult, sample_token
from geoformer.model.transformer import ContextOverflowError, GeoFormer
from geoformer.tokenizer.linearizer import CONTEXT_DAYS, SignatureError, build_context, decode_day
from geoformer.tokenizer.vocabulary import EMPTY_ID, Vocabulary

logger = get_logger(__name__)

# A generated day has the same shape as an observed one.
GeneratedDay = DayTrajectory


class InsufficientContextError(GeoFormerError):
    """Raised when a user has too few observed days before the horizon."""
    pass


class AuditRecord(BaseModel):
    """One sampled location token."""

    uid: int
    day: int
    slot: int
    axis: str
    tier: int
    n_candidates: int
    token_id: int
    rank: int
    probability: float
    in_candidates: bool


class DecodingAudit:
    """
    Thread-safe collector of AuditRecords.

    Records are kept in memory when `keep` is set and streamed to `writer`
    when one is given.
    """

    def __init__(self, writer: Optional[JsonLinesWriter] = None, keep: bool = True):
        self.writer = writer
        self.keep = keep
        self.records: List[AuditRecord] = []
        self._lock = threading.Lock()

    def add(self, record: AuditRecord) -> None:
        with self._lock:
            if self.keep:
                self.records.append(record)
            if self.writer is not None:
                self.writer.write(record.model_dump())

    def compliance(self) -> float:
        """Fraction of kept records whose token is in its tier's rebuilt set."""
        if not self.records:
            return 1.0
        return sum(r.in_candidates for r in self.records) / len(self.records)

    def tier_counts(self) -> Dict[int, int]:
        counts: Dict[int, int] = {}
        for r in self.records:
            counts[r.tier] = counts.get(r.tier, 0) + 1
        return counts


def _sample_constrained(
    logits: np.ndarray,
    candidates: CandidateIndex,
    dow: int,
    slot: int,
    axis: str,
    cfg: GenConfig,
    rng: np.random.Generator,
):
    """Walk the fallback tiers until one admits a finite logit."""
    for tier, allowed in candidates.tiers(dow, slot, axis):
        try:
            return tier, allowed, sample_token(logits, cfg, rng, allowed)
        except ImpossibleConstraintError:
            logger.debug(f"tier {tier.name} infeasible for {axis} at dow {dow} slot {slot}")
    raise ImpossibleConstraintError(f"no feasible {axis} token at dow {dow} slot {slot}")


def _record(
    audit: Optional[DecodingAudit],
    candidates: CandidateIndex,
    day: int,
    dow: int,
    slot: int,
    axis: str,
    tier: CandidateTier,
    allowed,
    result: SampleResult,
) -> None:
    if audit is None:
        return
    # membership is checked against the tier's set rebuilt from the history,
    # not against the set the sampler was handed
    if candidates.history is not None:
        expected = tier_tokens(
            candidates.history, candidates.horizon_day, candidates.window, dow, slot, axis, tier
        )
    else:
        expected = allowed
    audit.add(
        AuditRecord(
            uid=candidates.uid,
            day=day,
            slot=slot,
            axis=axis,
            tier=int(tier),
            n_candidates=len(allowed),
            token_id=result.token_id,
            rank=result.rank,
            probability=result.probability,
            in_candidates=result.token_id in expected,
        )
    )


def generate_day(
    model: GeoFormer,
    context: Sequence[int],
    signature: TargetSignature,
    candidates: CandidateIndex,
    cfg: GenConfig,
    rng: np.random.Generator,
    audit: Optional[DecodingAudit] = None,
    day: int = -1,
) -> GeneratedDay:
    """
    Fill one day according to its signature.

    Args:
        model: Trained model (read-only)
        context: Prompt ending with <|sep|>
        signature: Which slots to predict
        candidates: The user's candidate index
        cfg: Sampling parameters
        rng: Generator owned by this call's job
        audit: Optional sink for per-token records
        day: Day number, for audit records only

    Raises:
        ContextOverflowError: If the prompt plus the day cannot fit the context
    """
    needed = len(context) + 1 + len(signature.slots) + signature.n_predict
    if needed > model.cfg.context_len:
        raise ContextOverflowError(
            f"generating this day needs {needed} positions, context_len is {model.cfg.context_len}"
        )

    session = model.start_session()
    pending: List[int] = list(context) + [Vocabulary.dow_id(signature.dow)]
    emitted: List[int] = []
    for slot, flag in enumerate(signature.slots):
        if flag is SlotFlag.SKIP:
            pending.append(EMPTY_ID)
            emitted.append(EMPTY_ID)
            continue
        for axis in ("x", "y"):
            logits = session.feed(pending)
            tier, allowed, result = _sample_constrained(
                logits, candidates, signature.dow, slot, axis, cfg, rng
            )
            _record(
                audit, candidates, day, signature.dow, slot, axis, tier, allowed, result
            )
            pending = [result.token_id]
            emitted.append(result.token_id)

    return decode_day([Vocabulary.dow_id(signature.dow)] + emitted, expected_dow=signature.dow)


def _check_signatures(history: UserHistory, signatures: Mapping[int, TargetSignature]) -> None:
    for day, signature in signatures.items():
        if not 0 <= day < N_DAYS:
            raise SignatureError(f"signature for day {day} outside [0, {N_DAYS})")
        if signature.dow != history.dow(day):
            raise SignatureError(
                f"signature for day {day} has dow {signature.dow}, "
                f"user {history.uid} expects {history.dow(day)}"
            )


def count_observed_days(history: UserHistory, horizon_day: int) -> int:
    """Days before the horizon with at least one ping."""
    return sum(
        1 for day, traj in history.days.items() if day < horizon_day and traj.n_observed > 0
    )


def has_enough_context(history: UserHistory, horizon_day: int) -> bool:
    return count_observed_days(history, horizon_day) >= CONTEXT_DAYS


def predict_horizon(
    model: GeoFormer,
    history: UserHistory,
    signatures: Mapping[int, TargetSignature],
    cfg: GenConfig,
    horizon_day: int = 60,
    rng: Optional[np.random.Generator] = None,
    audit: Optional[DecodingAudit] = None,
    candidates: Optional[CandidateIndex] = None,
) -> List[PingRecord]:
    """
    Generate the signature days of one user in day order.

    Only days before horizon_day of `history` are read. The context for day
    d is the 7 days before it; with cfg.roll those include days generated
    earlier in this call, otherwise they are all-absent.

    Raises:
        InsufficientContextError: Fewer than 7 observed days before the horizon
        SignatureError: A signature's dow does not match its day
    """
    past = history.truncated(horizon_day)
    observed_days = count_observed_days(past, horizon_day)
    if observed_days < CONTEXT_DAYS:
        raise InsufficientContextError(
            f"user {history.uid} has {observed_days} observed days before day {horizon_day}, "
            f"needs {CONTEXT_DAYS}"
        )
    _check_signatures(history, signatures)
    rng = rng if rng is not None else np.random.default_rng([cfg.seed, history.uid])
    candidates = candidates or build_candidate_index(past, horizon_day, cfg.candidate_window)

    generated: Dict[int, DayTrajectory] = {}

    def context_day(d: int) -> DayTrajectory:
        if d < horizon_day:
            return past.day_or_empty(d)
        if cfg.roll and d in generated:
            return generated[d]
        return DayTrajectory.empty(history.dow(d))

    predictions: List[PingRecord] = []
    for day in sorted(signatures):
        signature = signatures[day]
        if signature.n_predict == 0:
            generated[day] = DayTrajectory.empty(signature.dow)
            continue
        context = build_context(
            history.uid, [context_day(d) for d in range(day - CONTEXT_DAYS, day)]
        )
        result = generate_day(model, context, signature, candidates, cfg, rng, audit, day)
        generated[day] = result
        predictions.extend(
            PingRecord(uid=history.uid, day=day, slot=slot, x=cell.x, y=cell.y)
            for slot, cell in result.observed()
        )
    return predictions


class PredictorInterface(ABC):
    """Anything that can fill a user's signature days."""

    name: str = "predictor"

    @abstractmethod
    def predict_user(
        self,
        history: UserHistory,
        signatures: Mapping[int, TargetSignature],
        rng: np.random.Generator,
        audit: Optional[DecodingAudit] = None,
    ) -> List[PingRecord]:
        """
        Predict pings for one user.

        Args:
            history: The user's history; only pre-horizon days may be read
            signatures: Day number -> signature
            rng: The user's own generator
            audit: Optional token audit sink
        """
        pass


class GeoFormerPredictor(PredictorInterface):
    """Constrained autoregressive generation with a trained model."""

    name = "geoformer"

    def __init__(self, model: GeoFormer, cfg: GenConfig, horizon_day: int = 60):
        self.model = model
        self.cfg = cfg
        self.horizon_day = horizon_day

    def predict_user(self, history, signatures, rng, audit=None):
        return predict_horizon(
            self.model, history, signatures, self.cfg, self.horizon_day, rng, audit
        )


class RandomCandidatePredictor(PredictorInterface):
    """
    Uniform draw from the narrowest non-empty candidate set of each slot.

    Uses the same candidate index and fallback tiers as model decoding, so
    it isolates what the model adds on top of the constraint.
    """

    name = "random-candidate"

    def __init__(self, cfg: GenConfig, horizon_day: int = 60):
        self.cfg = cfg
        self.horizon_day = horizon_day

    def predict_user(self, history, signatures, rng, audit=None):
        _check_signatures(history, signatures)
        candidates = build_candidate_index(
            history.truncated(self.horizon_day), self.horizon_day, self.cfg.candidate_window
        )
        predictions = []
        for day in sorted(signatures):
            signature = signatures[day]
            for slot, flag in enumerate(signature.slots):
                if flag is SlotFlag.SKIP:
                    continue
                tokens = []
                for axis in ("x", "y"):
                    tier, allowed = candidates.allowed(signature.dow, slot, axis)
                    choices = sorted(allowed)
                    index = int(rng.integers(len(choices)))
                    result = SampleResult(
                        token_id=choices[index],
                        rank=index,
                        probability=1.0 / len(choices),
                        n_allowed=len(choices),
                        n_kept=len(choices),
                    )
                    _record(
                        audit, candidates, day, signature.dow, slot, axis, tier, allowed, result
                    )
                    tokens.append(result.token_id)
                predictions.append(
                    PingRecord(
                        uid=history.uid,
                        day=day,
                        slot=slot,
                        x=tokens[0] - Vocabulary.x_id(0),
                        y=tokens[1] - Vocabulary.y_id(0),
                    )
                )
        return predictions


def predict_all(
    predictor: PredictorInterface,
    histories: Mapping[int, UserHistory],
    signatures: Mapping[int, Mapping[int, TargetSignature]],
    seed: int = 0,
    jobs: int = 1,
    audit: Optional[DecodingAudit] = None,
) -> List[PingRecord]:
    """
    Run a predictor for every user with signatures, optionally in parallel.

    Each user draws from its own generator seeded by (seed, uid), so the
    output does not depend on `jobs`. Results are sorted by (uid, day, slot).
    """
    uids = sorted(signatures)

    def job(uid: int) -> List[PingRecord]:
        rng = np.random.default_rng([seed, uid])
        return predictor.predict_user(histories[uid], signatures[uid], rng, audit)

    logger.info(f"Predicting {len(uids)} users with {predictor.name} ({jobs} jobs)")
    if jobs <= 1:
        per_user = [job(uid) for uid in uids]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_user = list(pool.map(job, uids))

    predictions = [p for chunk in per_user for p in chunk]
    predictions.sort(key=lambda p: p.key)
    return predictions
