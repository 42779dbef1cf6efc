"""
Pure NumPy forward kernels.

The tape primitives in `ops` and the cached inference path of the model both
call these, so recorded and unrecorded computations produce the same numbers.
"""

import numpy as np

MASK_VALUE = -1e9
GELU_C = float(np.sqrt(2.0 / np.pi))
GELU_K = 0.044715


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def layer_norm(x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float = 1e-5):
    """Returns (output, normalized input, reciprocal std)."""
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = centered * rstd
    return xhat * gain + bias, xhat, rstd


def gelu(x: np.ndarray) -> np.ndarray:
    """Tanh approximation of GELU."""
    return 0.5 * x * (1.0 + np.tanh(GELU_C * (x + GELU_K * x * x * x)))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    inner = GELU_C * (x + GELU_K * x * x * x)
    t = np.tanh(inner)
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * x * x)


def causal_mask(t_query: int, t_key: int, dtype) -> np.ndarray:
    """
    Additive mask for queries at the last t_query of t_key positions.

    Query i (absolute position t_key - t_query + i) may attend to keys at
    positions <= its own.
    """
    offset = t_key - t_query
    q = np.arange(t_query)[:, None] + offset
    k = np.arange(t_key)[None, :]
    return np.where(k > q, MASK_VALUE, 0.0).astype(dtype)
