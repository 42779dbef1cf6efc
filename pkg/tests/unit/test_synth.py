"""
Unit tests for the synthetic mobility generator.
"""

import pytest

from geoformer.core.errors import ConfigurationError
from geoformer.data import generate_synthetic, synth_properties_report, write_csv
from tests.factories import small_synth_config


@pytest.mark.unit
class TestGenerateSynthetic:
    """Test determinism and shape of generated data."""

    def test_same_config_same_records(self, tmp_path):
        """
        Test determinism.

        Purpose: Output is a pure function of the config, down to the bytes of
        the written CSV.

        Checkpoints:
        - Two generations are equal
        - Their CSV files are byte-identical
        """
        cfg = small_synth_config(n_users=4, n_days=20)

        a = write_csv(generate_synthetic(cfg), tmp_path / "a.csv")
        b = write_csv(generate_synthetic(cfg), tmp_path / "b.csv")

        assert a.read_bytes() == b.read_bytes()

    def test_seed_changes_output(self):
        a = generate_synthetic(small_synth_config(n_users=2, n_days=10, seed=0))
        b = generate_synthetic(small_synth_config(n_users=2, n_days=10, seed=1))
        assert a != b

    def test_users_and_days_in_range(self):
        records = generate_synthetic(small_synth_config(n_users=5, n_days=12))

        assert {r.uid for r in records} == set(range(5))
        assert max(r.day for r in records) <= 11
        assert len({r.key for r in records}) == len(records)

    def test_zero_users(self):
        assert generate_synthetic(small_synth_config(n_users=0)) == []

    def test_never_observed(self):
        assert generate_synthetic(small_synth_config(p_observe=[0.0] * 48)) == []

    def test_noise_free_pattern_repeats_weekly(self):
        """
        Test exact weekly periodicity.

        Purpose: Without jitter, exploration or dropout a user's day depends
        only on its day-of-week.

        Checkpoints:
        - Every ping on day d + 7 repeats the cell of day d at the same slot
        """
        cfg = small_synth_config(
            n_users=3, n_days=21, noise_radius=0, p_explore=0.0, p_observe=[1.0] * 48
        )
        cells = {r.key: (r.x, r.y) for r in generate_synthetic(cfg)}

        assert len(cells) == 3 * 21 * 48
        for (uid, day, slot), cell in cells.items():
            if day + 7 < 21:
                assert cells[(uid, day + 7, slot)] == cell

    def test_emergency_day_beyond_horizon(self):
        with pytest.raises(ConfigurationError):
            generate_synthetic(small_synth_config(n_days=10, emergency_day=20))


@pytest.mark.unit
class TestSynthProperties:
    """Test that generated data carries the intended qualitative structure."""

    def test_weekly_periodicity_and_daytime_peak(self):
        """
        Test seasonality signatures.

        Purpose: Weekday commutes and weekend leisure give a weekly rhythm in
        daily movement, and the observation profile peaks in daytime.

        Checkpoints:
        - Lag-7 autocorrelation of daily movement exceeds lag 3
        - Daytime slots carry more pings than night slots
        """
        cfg = small_synth_config(n_users=20, n_days=56, p_explore=0.0, noise_radius=0)
        records = generate_synthetic(cfg)

        report = synth_properties_report(records, horizon=56)

        assert report.autocorrelation[7] > report.autocorrelation[3]
        assert report.autocorrelation[7] > 0.5
        assert sum(report.events_per_slot[20:30]) > sum(report.events_per_slot[0:10])

    def test_emergency_reduces_movement(self):
        cfg = small_synth_config(
            n_users=20, n_days=75, emergency_day=60, noise_radius=0
        )

        report = synth_properties_report(generate_synthetic(cfg), horizon=60)

        assert report.mean_movement_after < report.mean_movement_before

    def test_report_needs_records(self):
        with pytest.raises(ConfigurationError):
            synth_properties_report([])
