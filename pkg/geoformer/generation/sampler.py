"""
Next-token sampling with an allowed-set mask, temperature, top-k and top-p.

Filters apply in that order, so top-k counts only feasible tokens.
"""

from typing import Iterable, Optional

import numpy as np
from pydantic import BaseModel

from geoformer.core.errors import GeoFormerError
from geoformer.core.models.config import GenConfig


class ImpossibleConstraintError(GeoFormerError):
    """Raised when no token survives the allowed-set mask."""
    pass


class SampleResult(BaseModel):
    """The chosen token plus what the audit log needs about the choice."""

    token_id: int
    rank: int
    probability: float
    n_allowed: int
    n_kept: int


def sample_token(
    logits: np.ndarray,
    cfg: GenConfig,
    rng: np.random.Generator,
    allowed: Optional[Iterable[int]] = None,
) -> SampleResult:
    """
    Draw one token id.

    Logits outside `allowed` become -inf; the rest are divided by the
    temperature, cut to the top_k most probable, then to the smallest prefix
    whose cumulative probability reaches top_p, renormalized and sampled by
    inverse CDF with one uniform draw from `rng`.

    Args:
        logits: 1-D array over the vocabulary
        cfg: Sampling parameters
        rng: Generator owned by the caller
        allowed: Token ids that may be emitted (all when None)

    Returns:
        SampleResult with the token's rank among the kept tokens (0 = most probable)

    Raises:
        ImpossibleConstraintError: If every logit is -inf after masking
    """
    z = np.asarray(logits, dtype=np.float64).reshape(-1)
    if allowed is not None:
        ids = np.fromiter(allowed, dtype=np.int64)
        masked = np.full_like(z, -np.inf)
        masked[ids] = z[ids]
        z = masked
    feasible = np.flatnonzero(np.isfinite(z))
    if feasible.size == 0:
        raise ImpossibleConstraintError("no feasible token after applying the allowed set")

    scaled = z[feasible] / cfg.temperature
    # Stable sort keeps the lower token id first among ties.
    order = np.argsort(-scaled, kind="stable")[:cfg.top_k]
    kept = feasible[order]
    shifted = scaled[order] - scaled[order[0]]
    probs = np.exp(shifted)
    probs /= probs.sum()

    if cfg.top_p < 1.0:
        cumulative = np.cumsum(probs)
        n = int(np.searchsorted(cumulative, cfg.top_p, side="left")) + 1
        kept, probs = kept[:n], probs[:n]
        probs = probs / probs.sum()

    cdf = np.cumsum(probs)
    u = rng.random()
    index = min(int(np.searchsorted(cdf, u, side="right")), len(kept) - 1)
    return SampleResult(
        token_id=int(kept[index]),
        rank=index,
        probability=float(probs[index]),
        n_allowed=int(feasible.size),
        n_kept=int(len(kept)),
    )
