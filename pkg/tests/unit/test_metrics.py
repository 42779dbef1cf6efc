"""
Unit tests for DTW and GEO-BLEU.
"""

import math

import numpy as np
import pytest

from geoformer.core.models.config import GeoBleuParams
from geoformer.core.models.mobility import GridCell
from geoformer.evaluation import MetricError, dtw, dtw_bruteforce, geo_bleu


def random_points(rng, n):
    return [tuple(int(v) for v in rng.integers(0, 50, size=2)) for _ in range(n)]


@pytest.mark.unit
class TestDtw:
    """Test the DP against hand values and the exhaustive oracle."""

    def test_single_points(self):
        assert dtw([(0, 0)], [(3, 4)]) == pytest.approx(5.0)

    def test_warping_absorbs_repeats(self):
        assert dtw([(0, 0), (1, 0)], [(0, 0), (1, 0), (2, 0)]) == pytest.approx(1.0)

    def test_identical_sequences(self):
        points = [(1, 2), (5, 5), (9, 0)]
        assert dtw(points, points) == 0.0

    def test_accepts_cells_and_records(self):
        assert dtw([GridCell(x=0, y=0)], [(3, 4)]) == pytest.approx(5.0)

    def test_long_parallel_tracks(self):
        """Every path visits at least 300 cells at distance >= 1; the diagonal hits 300."""
        a = [(i, 0) for i in range(300)]
        b = [(i, 1) for i in range(300)]

        result = dtw(a, b)

        assert isinstance(result, float)
        assert result == pytest.approx(300.0)

    def test_matches_bruteforce_on_random_pairs(self):
        """
        Test DP optimality.

        Purpose: The dynamic program finds the cheapest monotone warping path.

        Checkpoints:
        - Equal to exhaustive enumeration on 100 random pairs of 1..5 points
        """
        rng = np.random.default_rng(0)
        for _ in range(100):
            a = random_points(rng, int(rng.integers(1, 6)))
            b = random_points(rng, int(rng.integers(1, 6)))
            assert dtw(a, b) == pytest.approx(dtw_bruteforce(a, b), rel=1e-12)

    def test_symmetry_and_translation_invariance(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            a = random_points(rng, 7)
            b = random_points(rng, 4)
            shift = lambda pts: [(x + 13, y - 7) for x, y in pts]  # noqa: E731
            assert dtw(a, b) == pytest.approx(dtw(b, a))
            assert dtw(shift(a), shift(b)) == pytest.approx(dtw(a, b))

    def test_empty_input(self):
        with pytest.raises(MetricError):
            dtw([], [(0, 0)])

    def test_bruteforce_size_limit(self):
        with pytest.raises(MetricError):
            dtw_bruteforce([(0, 0)] * 7, [(0, 0)])


@pytest.mark.unit
class TestGeoBleu:
    """Test the softened n-gram score."""

    def test_identical_is_one(self):
        points = [(1, 1), (2, 2), (3, 3), (4, 4)]
        assert geo_bleu(points, points) == pytest.approx(1.0)

    def test_single_point_decay(self):
        """exp(-beta * d) with beta = 0.5 and d = 5."""
        assert geo_bleu([(0, 0)], [(3, 4)]) == pytest.approx(math.exp(-2.5))
        assert geo_bleu([(0, 0)], [(3, 4)]) == pytest.approx(0.08208, abs=1e-5)

    def test_closer_is_better(self):
        ref = [(10, 10), (11, 10), (12, 10)]
        near = [(10, 11), (11, 11), (12, 11)]
        far = [(10, 20), (11, 20), (12, 20)]
        assert geo_bleu(near, ref) > geo_bleu(far, ref)

    def test_bounded(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            score = geo_bleu(random_points(rng, 5), random_points(rng, 5))
            assert 0.0 <= score <= 1.0

    def test_brevity_penalty(self):
        ref = [(0, 0), (1, 0), (2, 0), (3, 0)]
        assert geo_bleu(ref[:2], ref) == pytest.approx(math.exp(1 - 4 / 2))

    def test_order_matters_for_higher_ngrams(self):
        ref = [(0, 0), (10, 0), (20, 0)]
        assert geo_bleu(list(reversed(ref)), ref) < geo_bleu(ref, ref)

    def test_beta_controls_decay(self):
        params = GeoBleuParams(max_n=1, beta=1.0)
        assert geo_bleu([(0, 0)], [(0, 2)], params) == pytest.approx(math.exp(-2.0))

    def test_distant_predictions_stay_ordered(self):
        """
        Test scores for predictions hundreds of cells away.

        Purpose: The trigram similarity mass is far below the float range
        here, yet the score must stay positive and keep falling with distance.

        Checkpoints:
        - Both scores strictly positive
        - The nearer of two distant predictions scores higher
        """
        gen = [(0, 0), (0, 1), (0, 2)]
        near = [(x + 400, y + 400) for x, y in gen]
        far = [(x + 450, y + 450) for x, y in gen]

        near_score, far_score = geo_bleu(gen, near), geo_bleu(gen, far)

        assert far_score > 0.0
        assert near_score > far_score

    def test_empty_input(self):
        with pytest.raises(MetricError):
            geo_bleu([(0, 0)], [])
