"""
Unit tests for constrained next-token sampling.
"""

import numpy as np
import pytest

from geoformer.core.models.config import GenConfig
from geoformer.generation import ImpossibleConstraintError, sample_token


def rng(seed=0):
    return np.random.default_rng(seed)


@pytest.mark.unit
class TestSampleToken:
    """Test mask, temperature, top-k and top-p."""

    def test_low_temperature_is_greedy(self):
        logits = np.array([0.1, 2.0, 1.9, -1.0])
        cfg = GenConfig(temperature=1e-4, top_k=4)

        picks = {sample_token(logits, cfg, rng(s)).token_id for s in range(20)}

        assert picks == {1}

    def test_allowed_set_is_respected(self):
        """
        Test the allowed-set mask.

        Purpose: Tokens outside the allowed set are never emitted, even when
        they hold almost all of the probability mass.

        Checkpoints:
        - Every draw is in {0, 3}
        - n_allowed reports the feasible count
        """
        logits = np.array([0.0, 50.0, 50.0, 0.0])
        cfg = GenConfig(temperature=1.0, top_k=5)

        results = [sample_token(logits, cfg, rng(s), allowed=[0, 3]) for s in range(30)]

        assert {r.token_id for r in results} == {0, 3}
        assert all(r.n_allowed == 2 for r in results)

    def test_singleton_allowed_set(self):
        result = sample_token(np.zeros(10), GenConfig(), rng(), allowed=[7])
        assert result.token_id == 7
        assert result.probability == pytest.approx(1.0)

    def test_nothing_feasible(self):
        with pytest.raises(ImpossibleConstraintError):
            sample_token(np.full(5, -np.inf), GenConfig(), rng())
        with pytest.raises(ImpossibleConstraintError):
            sample_token(np.array([0.0, -np.inf]), GenConfig(), rng(), allowed=[1])

    def test_top_k_counts_feasible_tokens_only(self):
        logits = np.array([10.0, 9.0, 1.0, 0.5, 0.0])
        cfg = GenConfig(temperature=1.0, top_k=2)

        results = [sample_token(logits, cfg, rng(s), allowed=[2, 3, 4]) for s in range(50)]

        assert {r.token_id for r in results} <= {2, 3}
        assert all(r.n_kept == 2 for r in results)

    def test_top_p_keeps_smallest_prefix(self):
        logits = np.log(np.array([0.5, 0.3, 0.15, 0.05]))
        cfg = GenConfig(temperature=1.0, top_k=4, top_p=0.75)

        results = [sample_token(logits, cfg, rng(s)) for s in range(50)]

        assert {r.token_id for r in results} == {0, 1}
        assert all(r.n_kept == 2 for r in results)

    def test_empirical_distribution_matches_softmax(self):
        logits = np.log(np.array([0.6, 0.3, 0.1]))
        cfg = GenConfig(temperature=1.0, top_k=3)
        generator = rng(123)

        draws = [sample_token(logits, cfg, generator).token_id for _ in range(4000)]

        freq = np.bincount(draws, minlength=3) / len(draws)
        np.testing.assert_allclose(freq, [0.6, 0.3, 0.1], atol=0.03)

    def test_rank_and_probability(self):
        logits = np.log(np.array([0.2, 0.8]))
        result = sample_token(logits, GenConfig(temperature=1.0, top_k=2), rng())
        expected = {1: (0, 0.8), 0: (1, 0.2)}[result.token_id]
        assert (result.rank, result.probability) == (expected[0], pytest.approx(expected[1]))

    def test_same_seed_same_draws(self):
        logits = np.random.default_rng(5).normal(size=50)
        cfg = GenConfig(temperature=0.7, top_k=10)
        a = [sample_token(logits, cfg, rng(9)).token_id for _ in range(5)]
        b = [sample_token(logits, cfg, rng(9)).token_id for _ in range(5)]
        assert a == b
