"""
Decoder-only transformer over the trajectory vocabulary.

GPT-style pre-norm blocks with learned positional embeddings and an output
projection tied to the token embedding. Logits at position j depend only on
tokens at positions <= j.
"""

import math
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from geoformer.autograd import kernels, ops
from geoformer.autograd.ops import IGNORE_INDEX, EmptyLossError
from geoformer.autograd.tensor import Tensor
from geoformer.core.errors import ConfigurationError, GeoFormerError
from geoformer.core.logging import get_logger
from geoformer.core.models.config import ModelConfig

logger = get_logger(__name__)

INIT_STD = 0.02
LN_EPS = 1e-5


class ContextOverflowError(GeoFormerError):
    """Raised when a sequence does not fit into the context window."""
    pass


class InvalidTokenError(GeoFormerError):
    """Raised when a token id is outside the vocabulary."""
    pass


def param_specs(cfg: ModelConfig) -> List[Tuple[str, Tuple[int, ...], str]]:
    """
    (name, shape, init) for every parameter, in a fixed order.

    init is one of "normal", "residual" (normal scaled by 1/sqrt(2 n_layers)),
    "ones" or "zeros". The key projection has no bias: attention weights are
    invariant to a per-query constant shift of the scores.
    """
    d, v, c = cfg.d_model, cfg.vocab_size, cfg.context_len
    specs = [("wte", (v, d), "normal"), ("wpe", (c, d), "normal")]
    for i in range(cfg.n_layers):
        p = f"h.{i}."
        specs += [
            (p + "ln_1.g", (d,), "ones"),
            (p + "ln_1.b", (d,), "zeros"),
            (p + "attn.q.w", (d, d), "normal"),
            (p + "attn.q.b", (d,), "zeros"),
            (p + "attn.k.w", (d, d), "normal"),
            (p + "attn.v.w", (d, d), "normal"),
            (p + "attn.v.b", (d,), "zeros"),
            (p + "attn.proj.w", (d, d), "residual"),
            (p + "attn.proj.b", (d,), "zeros"),
            (p + "ln_2.g", (d,), "ones"),
            (p + "ln_2.b", (d,), "zeros"),
            (p + "mlp.fc.w", (d, 4 * d), "normal"),
            (p + "mlp.fc.b", (4 * d,), "zeros"),
            (p + "mlp.proj.w", (4 * d, d), "residual"),
            (p + "mlp.proj.b", (d,), "zeros"),
        ]
    specs += [("ln_f.g", (d,), "ones"), ("ln_f.b", (d,), "zeros")]
    return specs


def is_decayed(name: str) -> bool:
    """Weight decay applies to projection matrices only, not embeddings, gains or biases."""
    return name.endswith(".w")


class GeoFormer:
    """Model parameters plus the forward computation."""

    def __init__(
        self,
        cfg: ModelConfig,
        params: Dict[str, Tensor],
        rng: Optional[np.random.Generator] = None,
    ):
        self.cfg = cfg
        self.params = params
        self.rng = rng if rng is not None else np.random.default_rng([cfg.seed, 1])
        self.dtype = np.dtype(cfg.dtype)
        self.head_dim = cfg.d_model // cfg.n_heads

    def parameters(self) -> Dict[str, Tensor]:
        return self.params

    def named_arrays(self) -> Iterator[Tuple[str, np.ndarray]]:
        for name, tensor in self.params.items():
            yield name, tensor.data

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def validate_tokens(self, tokens: np.ndarray) -> np.ndarray:
        tokens = np.asarray(tokens, dtype=np.int64)
        if tokens.ndim != 2:
            raise InvalidTokenError(f"expected a [batch, time] array, got shape {tokens.shape}")
        if tokens.shape[1] > self.cfg.context_len:
            raise ContextOverflowError(
                f"sequence length {tokens.shape[1]} exceeds context_len {self.cfg.context_len}"
            )
        if tokens.size and (tokens.min() < 0 or tokens.max() >= self.cfg.vocab_size):
            raise InvalidTokenError(
                f"token ids must lie in [0, {self.cfg.vocab_size}), "
                f"got [{tokens.min()}, {tokens.max()}]"
            )
        return tokens

    def forward(self, tokens: np.ndarray, training: bool = False) -> Tensor:
        """
        Compute logits of shape [B, T, vocab_size].

        Args:
            tokens: Integer array [B, T] with T <= context_len
            training: Enables dropout

        Raises:
            ContextOverflowError: If T exceeds context_len
            InvalidTokenError: If an id is outside the vocabulary
        """
        tokens = self.validate_tokens(tokens)
        B, T = tokens.shape
        P = self.params
        rate = self.cfg.dropout_rate

        x = ops.add(ops.embedding(P["wte"], tokens), ops.embedding(P["wpe"], np.arange(T)))
        x = ops.dropout(x, rate, self.rng, training)

        for i in range(self.cfg.n_layers):
            p = f"h.{i}."
            h = ops.layer_norm(x, P[p + "ln_1.g"], P[p + "ln_1.b"], LN_EPS)
            x = ops.add(x, self._attention(h, p, B, T, training))
            h = ops.layer_norm(x, P[p + "ln_2.g"], P[p + "ln_2.b"], LN_EPS)
            h = ops.gelu(ops.add(ops.matmul(h, P[p + "mlp.fc.w"]), P[p + "mlp.fc.b"]))
            h = ops.add(ops.matmul(h, P[p + "mlp.proj.w"]), P[p + "mlp.proj.b"])
            x = ops.add(x, ops.dropout(h, rate, self.rng, training))

        x = ops.layer_norm(x, P["ln_f.g"], P["ln_f.b"], LN_EPS)
        return ops.matmul(x, ops.transpose(P["wte"]))

    def _attention(self, h: Tensor, p: str, B: int, T: int, training: bool) -> Tensor:
        P = self.params
        H, hd = self.cfg.n_heads, self.head_dim

        def heads(t: Tensor) -> Tensor:
            return ops.transpose(ops.reshape(t, (B, T, H, hd)), (0, 2, 1, 3))

        q = heads(ops.add(ops.matmul(h, P[p + "attn.q.w"]), P[p + "attn.q.b"]))
        k = heads(ops.matmul(h, P[p + "attn.k.w"]))
        v = heads(ops.add(ops.matmul(h, P[p + "attn.v.w"]), P[p + "attn.v.b"]))

        scores = ops.scale(ops.matmul(q, ops.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(hd))
        att = ops.softmax(ops.causal_mask(scores), axis=-1)
        att = ops.dropout(att, self.cfg.dropout_rate, self.rng, training)
        out = ops.reshape(ops.transpose(ops.matmul(att, v), (0, 2, 1, 3)), (B, T, H * hd))
        out = ops.add(ops.matmul(out, P[p + "attn.proj.w"]), P[p + "attn.proj.b"])
        return ops.dropout(out, self.cfg.dropout_rate, self.rng, training)

    def logits(self, tokens: Sequence[int]) -> np.ndarray:
        """Inference-mode logits for a single sequence, shape [T, vocab_size]."""
        return self.forward(np.asarray([list(tokens)]), training=False).data[0]

    def start_session(self) -> "InferenceSession":
        return InferenceSession(self)


class InferenceSession:
    """
    Incremental decoding with a per-sequence key/value cache.

    Feeding tokens in any chunking yields the same last-position logits as a
    full forward pass over the whole prefix (up to float rounding).
    """

    def __init__(self, model: GeoFormer):
        self.model = model
        self.length = 0
        self._keys: List[Optional[np.ndarray]] = [None] * model.cfg.n_layers
        self._values: List[Optional[np.ndarray]] = [None] * model.cfg.n_layers

    def feed(self, token_ids: Sequence[int]) -> np.ndarray:
        """
        Append tokens and return the logits at the last appended position.

        Raises:
            ContextOverflowError: If the total length exceeds context_len
        """
        model = self.model
        cfg = model.cfg
        ids = model.validate_tokens(np.asarray([list(token_ids)]))[0]
        n = len(ids)
        if n == 0:
            raise InvalidTokenError("feed needs at least one token")
        if self.length + n > cfg.context_len:
            raise ContextOverflowError(
                f"sequence length {self.length + n} exceeds context_len {cfg.context_len}"
            )

        P = {name: t.data for name, t in model.params.items()}
        H, hd = cfg.n_heads, model.head_dim
        x = P["wte"][ids] + P["wpe"][self.length:self.length + n]

        for i in range(cfg.n_layers):
            p = f"h.{i}."
            h, _, _ = kernels.layer_norm(x, P[p + "ln_1.g"], P[p + "ln_1.b"], LN_EPS)
            q = (h @ P[p + "attn.q.w"] + P[p + "attn.q.b"]).reshape(n, H, hd).transpose(1, 0, 2)
            k = (h @ P[p + "attn.k.w"]).reshape(n, H, hd).transpose(1, 0, 2)
            v = (h @ P[p + "attn.v.w"] + P[p + "attn.v.b"]).reshape(n, H, hd).transpose(1, 0, 2)
            if self._keys[i] is not None:
                k = np.concatenate([self._keys[i], k], axis=1)
                v = np.concatenate([self._values[i], v], axis=1)
            self._keys[i], self._values[i] = k, v

            scores = (q @ k.transpose(0, 2, 1)) * (1.0 / math.sqrt(hd))
            scores = scores + kernels.causal_mask(n, k.shape[1], scores.dtype)
            att = kernels.softmax(scores, axis=-1)
            out = (att @ v).transpose(1, 0, 2).reshape(n, H * hd)
            x = x + (out @ P[p + "attn.proj.w"] + P[p + "attn.proj.b"])

            h, _, _ = kernels.layer_norm(x, P[p + "ln_2.g"], P[p + "ln_2.b"], LN_EPS)
            h = kernels.gelu(h @ P[p + "mlp.fc.w"] + P[p + "mlp.fc.b"])
            x = x + (h @ P[p + "mlp.proj.w"] + P[p + "mlp.proj.b"])

        self.length += n
        last, _, _ = kernels.layer_norm(x[-1:], P["ln_f.g"], P["ln_f.b"], LN_EPS)
        return (last @ P["wte"].T)[0]


def init_model(cfg: ModelConfig) -> GeoFormer:
    """
    Draw fresh parameters from a seeded normal(0, 0.02).

    Residual output projections are scaled by 1/sqrt(2 n_layers); biases are
    zero and layer-norm gains one. The result is a pure function of cfg.

    Raises:
        ConfigurationError: If d_model is not divisible by n_heads
    """
    if cfg.d_model % cfg.n_heads != 0:
        raise ConfigurationError(
            f"d_model ({cfg.d_model}) must be divisible by n_heads ({cfg.n_heads})"
        )
    rng = np.random.default_rng(cfg.seed)
    dtype = np.dtype(cfg.dtype)
    residual_std = INIT_STD / math.sqrt(2 * cfg.n_layers)
    params = {}
    for name, shape, init in param_specs(cfg):
        if init == "normal":
            data = rng.normal(0.0, INIT_STD, size=shape)
        elif init == "residual":
            data = rng.normal(0.0, residual_std, size=shape)
        elif init == "ones":
            data = np.ones(shape)
        else:
            data = np.zeros(shape)
        params[name] = Tensor(data.astype(dtype), requires_grad=True, name=name)
    n_params = sum(t.data.size for t in params.values())
    logger.info(
        f"Initialized model: {cfg.n_layers} layers, {cfg.n_heads} heads, "
        f"{cfg.d_model} dims, {n_params:,} parameters"
    )
    return GeoFormer(cfg, params)


def next_token_loss(logits: Tensor, targets: np.ndarray) -> Tensor:
    """
    Mean cross-entropy over non-ignored positions.

    Args:
        logits: [B, T, V] model output
        targets: [B, T] next-token ids, IGNORE_INDEX where no loss applies

    Raises:
        EmptyLossError: If every position is ignored
    """
    B, T, V = logits.shape
    flat = ops.reshape(logits, (B * T, V))
    return ops.cross_entropy(flat, np.asarray(targets).reshape(-1), IGNORE_INDEX)


__all__ = [
    "ContextOverflowError",
    "EmptyLossError",
    "GeoFormer",
    "InferenceSession",
    "InvalidTokenError",
    "init_model",
    "is_decayed",
    "next_token_loss",
    "param_specs",
]
