"""
Trajectory similarity metrics: DTW (lower is better) and GEO-BLEU (higher is better).

Both accept any sequence of points exposing `.x` and `.y` (GridCell,
PingRecord) or plain (x, y) pairs.
"""

import math
from typing import Any, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from geoformer.core.errors import GeoFormerError
from geoformer.core.models.config import GeoBleuParams

BRUTEFORCE_MAX_LEN = 6


class MetricError(GeoFormerError):
    """Raised for inputs a metric cannot score."""
    pass


def _coords(points: Sequence[Any], label: str) -> List[Tuple[float, float]]:
    if len(points) == 0:
        raise MetricError(f"{label} sequence is empty")
    out = []
    for p in points:
        if hasattr(p, "x"):
            out.append((float(p.x), float(p.y)))
        else:
            out.append((float(p[0]), float(p[1])))
    return out


def _pairwise(ca: np.ndarray, cb: np.ndarray) -> np.ndarray:
    return np.hypot(ca[:, None, 0] - cb[None, :, 0], ca[:, None, 1] - cb[None, :, 1])


def _distance_matrix(a: Sequence[Any], b: Sequence[Any]) -> np.ndarray:
    return _pairwise(np.asarray(_coords(a, "first")), np.asarray(_coords(b, "second")))


def dtw(a: Sequence[Any], b: Sequence[Any]) -> float:
    """
    Dynamic time warping distance with a Euclidean point cost.

    D[i][j] = d(a_i, b_j) + min(D[i-1][j], D[i][j-1], D[i-1][j-1]), anchored
    at D[0][0] = d(a_0, b_0); returns D[-1][-1].

    Raises:
        MetricError: If either sequence is empty
    """
    d = _distance_matrix(a, b)
    n, m = d.shape
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        cost = d[i - 1].tolist()
        # the up and diagonal predecessors come from the finished row above
        from_above = np.minimum(acc[i - 1, 1:], acc[i - 1, :-1]).tolist()
        left = math.inf
        row = []
        for j in range(m):
            left = cost[j] + min(from_above[j], left)
            row.append(left)
        acc[i, 1:] = row
    return float(acc[n, m])


def _monotone_paths(n: int, m: int) -> Iterator[List[Tuple[int, int]]]:
    def extend(path: List[Tuple[int, int]]):
        i, j = path[-1]
        if (i, j) == (n - 1, m - 1):
            yield path
            return
        for di, dj in ((1, 0), (0, 1), (1, 1)):
            if i + di < n and j + dj < m:
                yield from extend(path + [(i + di, j + dj)])

    yield from extend([(0, 0)])


def dtw_bruteforce(a: Sequence[Any], b: Sequence[Any]) -> float:
    """
    Minimum warping cost by enumerating every monotone path; an oracle for dtw.

    Raises:
        MetricError: Empty input, or a sequence longer than 6 points
    """
    if len(a) > BRUTEFORCE_MAX_LEN or len(b) > BRUTEFORCE_MAX_LEN:
        raise MetricError(
            f"brute-force DTW is limited to {BRUTEFORCE_MAX_LEN} points per sequence"
        )
    d = _distance_matrix(a, b)
    best = math.inf
    for path in _monotone_paths(*d.shape):
        total = 0.0
        for i, j in path:
            total += float(d[i, j])
        best = min(best, total)
    return best


def _ngram_log_similarity(d: np.ndarray, n: int, beta: float) -> np.ndarray:
    """log sim[i, j] = -beta * sum_k d[i+k, j+k] for n-grams starting at i and j."""
    rows, cols = d.shape[0] - n + 1, d.shape[1] - n + 1
    total = np.zeros((rows, cols))
    for k in range(n):
        total += d[k:k + rows, k:k + cols]
    return -beta * total


def _greedy_match(log_sim: np.ndarray) -> float:
    """
    Log of the summed similarity when gen n-grams take distinct ref n-grams
    best-first. Staying in log space keeps far-apart matches above zero.
    """
    order = np.argsort(-log_sim, axis=None, kind="stable")
    used_gen = np.zeros(log_sim.shape[0], dtype=bool)
    used_ref = np.zeros(log_sim.shape[1], dtype=bool)
    matched = []
    remaining = min(log_sim.shape)
    for flat in order:
        i, j = divmod(int(flat), log_sim.shape[1])
        if used_gen[i] or used_ref[j]:
            continue
        used_gen[i] = used_ref[j] = True
        matched.append(float(log_sim[i, j]))
        remaining -= 1
        if remaining == 0:
            break
    return float(np.logaddexp.reduce(matched))


def geo_bleu(
    generated: Sequence[Any], reference: Sequence[Any], params: Optional[GeoBleuParams] = None
) -> float:
    """
    BLEU-style score with spatially softened n-gram matches.

    For each n up to max_n, precision p_n is the greedily matched similarity
    mass divided by the number of generated n-grams. The score is the
    brevity penalty min(1, exp(1 - |ref| / |gen|)) times the geometric mean
    of the p_n. Orders longer than either sequence are left out of the mean.
    Precisions are combined as logs, so distant predictions keep a small
    positive score that still shrinks with distance.

    Raises:
        MetricError: If either sequence is empty
    """
    params = params or GeoBleuParams()
    gen = np.asarray(_coords(generated, "generated"))
    ref = np.asarray(_coords(reference, "reference"))
    d = _pairwise(gen, ref)

    log_precisions = []
    for n in range(1, params.max_n + 1):
        if len(gen) < n or len(ref) < n:
            continue
        log_sim = _ngram_log_similarity(d, n, params.beta)
        log_precisions.append(_greedy_match(log_sim) - math.log(log_sim.shape[0]))

    brevity = min(1.0, math.exp(1.0 - len(ref) / len(gen)))
    score = brevity * math.exp(sum(log_precisions) / len(log_precisions))
    return min(1.0, max(0.0, score))
