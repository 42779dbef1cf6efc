"""
Finite-difference verification of backward rules.
"""

from typing import Callable, Dict, Optional

import numpy as np

from geoformer.autograd.tensor import GradientError, Tape, Tensor, backward

_FLOOR = 1e-8


def _relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), _FLOOR)


def grad_check(
    f: Callable[[Tensor], Tensor],
    x: Tensor,
    step: float = 1e-5,
    max_coords: Optional[int] = None,
    seed: int = 0,
) -> float:
    """
    Maximum relative error between the tape gradient and central differences.

    The check runs in 64-bit precision regardless of the input's dtype.

    Args:
        f: Scalar-valued function of one tensor
        x: Point at which to differentiate
        step: Finite-difference step (> 0)
        max_coords: If set, only this many randomly chosen coordinates are checked
        seed: Seed for choosing coordinates

    Returns:
        max over checked coordinates of |a - cd| / max(|a|, |cd|, 1e-8)
    """
    if step <= 0:
        raise GradientError("step must be positive")
    point = Tensor(x.data.astype(np.float64), requires_grad=True)
    with Tape() as tape:
        out = f(point)
    backward(tape, out, params=[point])
    analytic = point.grad

    def evaluate(values: np.ndarray) -> float:
        return f(Tensor(values)).item()

    return _max_error(evaluate, point.data, analytic, step, max_coords, seed)


def grad_check_params(
    loss_fn: Callable[[], Tensor],
    params: Dict[str, Tensor],
    step: float = 1e-5,
    max_coords: Optional[int] = None,
    seed: int = 0,
) -> Dict[str, float]:
    """
    Per-parameter maximum relative error for a loss over many parameters.

    `loss_fn` must read the parameters' current data on every call; the
    parameters are perturbed in place and restored.
    """
    for p in params.values():
        p.grad = None
    with Tape() as tape:
        loss = loss_fn()
    backward(tape, loss, params=params.values())

    errors = {}
    for name, p in params.items():
        analytic = p.grad
        original = p.data

        def evaluate(values: np.ndarray, p=p) -> float:
            p.data = values
            try:
                return loss_fn().item()
            finally:
                p.data = original

        errors[name] = _max_error(evaluate, original, analytic, step, max_coords, seed)
    return errors


def _max_error(
    evaluate: Callable[[np.ndarray], float],
    values: np.ndarray,
    analytic: np.ndarray,
    step: float,
    max_coords: Optional[int],
    seed: int,
) -> float:
    flat_size = values.size
    coords = np.arange(flat_size)
    if max_coords is not None and max_coords < flat_size:
        coords = np.random.default_rng(seed).choice(flat_size, size=max_coords, replace=False)

    worst = 0.0
    for index in coords:
        plus = values.copy()
        plus.reshape(-1)[index] += step
        minus = values.copy()
        minus.reshape(-1)[index] -= step
        numeric = (evaluate(plus) - evaluate(minus)) / (2.0 * step)
        worst = max(worst, _relative_error(float(analytic.reshape(-1)[index]), numeric))
    return worst
