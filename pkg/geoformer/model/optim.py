"""
AdamW, the warmup + cosine learning-rate schedule and global-norm clipping.
"""

import math
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from geoformer.core.errors import GeoFormerError
from geoformer.core.logging import get_logger
from geoformer.core.models.config import TrainConfig
from geoformer.model.transformer import is_decayed

logger = get_logger(__name__)


class NonFiniteError(GeoFormerError):
    """Raised when a gradient or its norm is NaN or infinite."""

    def __init__(self, message: str, names: Optional[List[str]] = None):
        self.names = names or []
        if self.names:
            message = f"{message} (parameters: {', '.join(self.names[:10])})"
        super().__init__(message)


def lr_at(step: int, tc: TrainConfig) -> float:
    """
    Learning rate for a step: linear ramp 0 -> lr_max over warmup_steps, then
    cosine decay to 0 at total_steps.
    """
    if step < 0:
        raise ValueError("step must be non-negative")
    if tc.total_steps is None:
        raise ValueError("total_steps must be resolved before scheduling")
    warmup, total = tc.warmup_steps, tc.total_steps
    if warmup > 0 and step < warmup:
        return tc.lr_max * step / warmup
    if total <= warmup:
        return tc.lr_max if step <= warmup else 0.0
    progress = min(1.0, (step - warmup) / (total - warmup))
    return tc.lr_max * 0.5 * (1.0 + math.cos(math.pi * progress))


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    total = 0.0
    for g in grads.values():
        total += float(np.sum(np.square(g, dtype=np.float64)))
    return math.sqrt(total)


def clip_gradients(
    grads: Mapping[str, np.ndarray], max_norm: float = 5.0
) -> Tuple[Dict[str, np.ndarray], float]:
    """
    Scale all gradients by max_norm / norm when the global L2 norm exceeds max_norm.

    Returns:
        (possibly scaled gradients, norm before clipping)

    Raises:
        NonFiniteError: If the norm is not finite
    """
    norm = global_norm(grads)
    if not math.isfinite(norm):
        bad = [name for name, g in grads.items() if not np.all(np.isfinite(g))]
        raise NonFiniteError(f"gradient norm is {norm}", bad)
    if norm <= max_norm:
        return dict(grads), norm
    factor = max_norm / norm
    return {name: g * np.asarray(factor, dtype=g.dtype) for name, g in grads.items()}, norm


class AdamWState:
    """First and second moments plus the update counter."""

    def __init__(
        self,
        moments_m: Dict[str, np.ndarray],
        moments_v: Dict[str, np.ndarray],
        step: int = 0,
    ):
        self.m = moments_m
        self.v = moments_v
        self.step = step

    @classmethod
    def zeros_like(cls, params: Mapping[str, np.ndarray]) -> "AdamWState":
        return cls(
            {name: np.zeros_like(p) for name, p in params.items()},
            {name: np.zeros_like(p) for name, p in params.items()},
            0,
        )


def adamw_step(
    params: Dict[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamWState,
    tc: TrainConfig,
    lr: float,
) -> Tuple[Dict[str, np.ndarray], AdamWState]:
    """
    One bias-corrected AdamW update with decoupled weight decay.

    Decay is skipped for biases, layer-norm gains and embeddings. New arrays
    are returned; the inputs are left untouched.

    Raises:
        NonFiniteError: If any gradient contains NaN or inf
    """
    bad = [name for name, g in grads.items() if not np.all(np.isfinite(g))]
    if bad:
        logger.error(f"Non-finite gradients at step {state.step + 1}: {bad}")
        raise NonFiniteError(f"non-finite gradient at step {state.step + 1}", bad)

    t = state.step + 1
    b1, b2 = tc.beta1, tc.beta2
    correction1 = 1.0 - b1 ** t
    correction2 = 1.0 - b2 ** t

    new_params, new_m, new_v = {}, {}, {}
    for name, p in params.items():
        g = grads[name]
        dtype = p.dtype
        m = state.m[name] * dtype.type(b1) + g * dtype.type(1.0 - b1)
        v = state.v[name] * dtype.type(b2) + (g * g) * dtype.type(1.0 - b2)
        m_hat = m / dtype.type(correction1)
        v_hat = v / dtype.type(correction2)
        updated = p
        if tc.weight_decay > 0.0 and is_decayed(name):
            updated = updated - dtype.type(lr * tc.weight_decay) * updated
        updated = updated - dtype.type(lr) * m_hat / (np.sqrt(v_hat) + dtype.type(tc.eps))
        new_params[name] = updated.astype(dtype, copy=False)
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamWState(new_m, new_v, t)
