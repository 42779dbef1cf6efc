"""
Unit tests for CSV ingestion, history assembly and user splitting.
"""

import pytest

from geoformer.core.errors import (
    ConfigurationError,
    CsvParseError,
    DuplicateRecordError,
    IngestError,
    RangeError,
)
from geoformer.data import build_histories, ingest_csv, split_users, write_csv
from tests.factories import ping, routine_history


def write_text(tmp_path, text, name="pings.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


@pytest.mark.unit
class TestIngestCsv:
    """Test parsing and validation of ping files."""

    def test_coordinates_become_zero_based(self, tmp_path):
        """
        Test coordinate conversion.

        Purpose: Files carry 1-based x, y in [1, 500]; records are 0-based so
        they line up with the x000..x499 token labels.

        Checkpoints:
        - x=1, y=500 in the file become x=0, y=499
        - Records come back sorted by (uid, day, slot)
        """
        path = write_text(tmp_path, "uid,d,t,x,y\n2,0,5,10,10\n1,3,7,1,500\n1,3,2,4,4\n")

        records = ingest_csv(path)

        assert [r.key for r in records] == [(1, 3, 2), (1, 3, 7), (2, 0, 5)]
        assert (records[1].x, records[1].y) == (0, 499)

    def test_write_then_ingest_preserves_records(self, tmp_path):
        records = [ping(0, 0, 0, 0, 0), ping(0, 74, 47, 499, 499), ping(3, 10, 1, 5, 6)]

        path = write_csv(records, tmp_path / "out" / "p.csv")

        assert ingest_csv(path) == records
        assert path.read_bytes().startswith(b"uid,d,t,x,y\n")
        assert b"\r" not in path.read_bytes()

    def test_header_only_file_gives_no_records(self, tmp_path):
        assert ingest_csv(write_text(tmp_path, "uid,d,t,x,y\n")) == []

    def test_empty_file(self, tmp_path):
        with pytest.raises(CsvParseError):
            ingest_csv(write_text(tmp_path, ""))

    def test_wrong_header(self, tmp_path):
        with pytest.raises(CsvParseError) as exc_info:
            ingest_csv(write_text(tmp_path, "uid,day,t,x,y\n1,0,0,1,1\n"))
        assert exc_info.value.line == 1

    def test_non_integer_field_reports_line(self, tmp_path):
        """
        Test malformed values.

        Purpose: The error names the offending file line (header is line 1).

        Checkpoints:
        - "abc" in the third data row is reported on line 4
        - Fractional values are not integers either
        """
        text = "uid,d,t,x,y\n1,0,0,1,1\n1,0,1,1,1\n1,0,abc,1,1\n"
        with pytest.raises(CsvParseError) as exc_info:
            ingest_csv(write_text(tmp_path, text))
        assert exc_info.value.line == 4
        assert "line 4" in str(exc_info.value)

        with pytest.raises(CsvParseError):
            ingest_csv(write_text(tmp_path, "uid,d,t,x,y\n1,0,0,1.5,1\n", "f.csv"))

    @pytest.mark.parametrize(
        "row",
        ["1,75,0,1,1", "1,0,48,1,1", "1,0,0,0,1", "1,0,0,1,501", "-1,0,0,1,1"],
    )
    def test_out_of_range_values(self, tmp_path, row):
        with pytest.raises(RangeError) as exc_info:
            ingest_csv(write_text(tmp_path, f"uid,d,t,x,y\n1,0,0,1,1\n{row}\n"))
        assert exc_info.value.line == 3

    def test_duplicate_key(self, tmp_path):
        text = "uid,d,t,x,y\n1,0,0,1,1\n2,0,0,1,1\n1,0,0,9,9\n"
        with pytest.raises(DuplicateRecordError) as exc_info:
            ingest_csv(write_text(tmp_path, text))
        assert exc_info.value.line == 4
        assert isinstance(exc_info.value, IngestError)


@pytest.mark.unit
class TestBuildHistories:
    """Test per-user history assembly."""

    def test_gaps_are_materialized_as_empty_days(self):
        """
        Test gap filling.

        Purpose: Days between a user's first and last ping exist in the history
        even without pings, so every window has 8 day blocks.

        Checkpoints:
        - Days 2..5 all exist; day 3 and 4 are all-absent
        - Days outside [first, last] are not materialized
        - dow follows (day + dow_offset) mod 7
        """
        records = [ping(7, 2, 0, 1, 1), ping(7, 5, 10, 2, 2)]

        history = build_histories(records, dow_offset=4)[7]

        assert sorted(history.days) == [2, 3, 4, 5]
        assert history.days[3].n_observed == 0
        assert history.days[5].slots[10].x == 2
        assert history.days[2].dow == (2 + 4) % 7

    def test_invalid_dow_offset(self):
        with pytest.raises(ConfigurationError):
            build_histories([ping(0, 0, 0, 0, 0)], dow_offset=7)

    def test_histories_roundtrip_to_pings(self):
        history = routine_history(3, n_days=10)
        rebuilt = build_histories(history.pings())[3]
        assert rebuilt == history


@pytest.mark.unit
class TestSplitUsers:
    """Test the held-out user split."""

    def test_split_is_deterministic_and_disjoint(self):
        histories = {uid: routine_history(uid, n_days=9) for uid in range(10)}

        first = split_users(histories, n_val=2, n_test=3, seed=5)
        second = split_users(histories, n_val=2, n_test=3, seed=5)

        assert first == second
        assert len(first.val_uids) == 2
        assert len(first.test_uids) == 3
        assert first.train_uids | first.held_out_uids == frozenset(range(10))

    def test_different_seed_changes_split(self):
        histories = {uid: routine_history(uid, n_days=9) for uid in range(30)}
        a = split_users(histories, 5, 5, seed=0)
        b = split_users(histories, 5, 5, seed=1)
        assert (a.val_uids, a.test_uids) != (b.val_uids, b.test_uids)

    def test_not_enough_users(self):
        histories = {uid: routine_history(uid, n_days=9) for uid in range(3)}
        with pytest.raises(ConfigurationError):
            split_users(histories, n_val=2, n_test=2)
