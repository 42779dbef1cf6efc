"""
Mobility data: ingestion, splitting, exploratory statistics and synthesis.
"""

from geoformer.data.ingest import (
    build_histories,
    ingest_csv,
    records_to_frame,
    split_users,
    write_csv,
)
from geoformer.data.stats import (
    autocorrelation,
    daily_movement_counts,
    events_per_slot,
    oov_rates,
    oov_summary,
)
from geoformer.data.synth import generate_synthetic, synth_properties_report

__all__ = [
    "autocorrelation",
    "build_histories",
    "daily_movement_counts",
    "events_per_slot",
    "generate_synthetic",
    "ingest_csv",
    "oov_rates",
    "oov_summary",
    "records_to_frame",
    "split_users",
    "synth_properties_report",
    "write_csv",
]
