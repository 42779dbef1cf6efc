"""
Unit tests for window enumeration, held-out masking and batch collation.
"""

import numpy as np
import pytest

from geoformer.autograd import IGNORE_INDEX
from geoformer.core.models.mobility import DatasetSplit, UserHistory
from geoformer.tokenizer.linearizer import linearize_window
from geoformer.tokenizer.vocabulary import DATA_ID, SEP_ID, Vocabulary
from geoformer.training import (
    TrainingError,
    TrainingWindow,
    WindowDataset,
    collate,
    make_eval_windows,
    make_windows,
)
from tests.factories import make_day, routine_cells, routine_history


@pytest.fixture
def histories():
    return {uid: routine_history(uid, n_days=75) for uid in range(4)}


@pytest.fixture
def split():
    return DatasetSplit(
        train_uids=frozenset({0, 1}),
        val_uids=frozenset({2}),
        test_uids=frozenset({3}),
        horizon_day=60,
    )


def count_by_user(windows):
    counts = {}
    for w in windows:
        counts[w.uid] = counts.get(w.uid, 0) + 1
    return counts


@pytest.mark.unit
class TestMakeWindows:
    """Test stride-1 enumeration and the held-out cut."""

    def test_counts_per_user(self, split, histories):
        """
        Test window counts.

        Purpose: Training users contribute every 8-day window of their
        history; held-out users only windows that end before the horizon.

        Checkpoints:
        - Train users over days 0..74: 75 - 8 + 1 = 68 windows
        - Held-out users over days 0..59: 60 - 8 + 1 = 53 windows
        """
        counts = count_by_user(make_windows(split, histories))

        assert counts == {0: 68, 1: 68, 2: 53, 3: 53}

    def test_held_out_users_never_reach_the_horizon(self, split, histories):
        windows = make_windows(split, histories)
        for w in windows:
            if w.uid in split.held_out_uids:
                assert w.target_day < split.horizon_day

    def test_finetune_range(self, split, histories):
        windows = make_windows(split, histories, day_min=60, day_max=75)

        counts = count_by_user(windows)

        assert counts == {0: 8, 1: 8}
        assert min(w.start_day for w in windows) == 60
        assert max(w.target_day for w in windows) == 74

    def test_range_shorter_than_a_window(self, split, histories):
        with pytest.raises(TrainingError):
            make_windows(split, histories, day_min=60, day_max=67)

    def test_gap_free_windows_only(self, split):
        history = routine_history(0, n_days=20)
        days = dict(history.days)
        del days[10]
        histories = {0: history.model_copy(update={"days": days})}

        windows = make_windows(split, histories, 0, 20)

        assert all(10 not in w.days for w in windows)
        assert len(windows) == 3 + 2

    def test_window_model_validation(self):
        assert TrainingWindow.starting_at(5, 3).days == tuple(range(3, 11))
        with pytest.raises(ValueError):
            TrainingWindow(uid=0, start_day=0, days=(0, 1, 2))


@pytest.mark.unit
class TestEvalWindows:
    def test_validation_users_after_horizon(self, split, histories):
        windows = make_eval_windows(split, histories)

        assert {w.uid for w in windows} == {2}
        assert all(w.target_day >= 60 for w in windows)
        assert len(windows) == 15

    def test_disjoint_from_training(self, split, histories):
        train = {(w.uid, w.start_day) for w in make_windows(split, histories)}
        val = {(w.uid, w.start_day) for w in make_eval_windows(split, histories)}
        assert not train & val


@pytest.mark.unit
class TestCollate:
    """Test padding and target masking."""

    def test_shift_and_padding(self):
        short = linearize_window(routine_history(1, n_days=8), 0)
        long = linearize_window(routine_history(12345, n_days=8), 0)

        batch = collate([short, long])

        width = len(long) - 1
        assert batch.inputs.shape == batch.targets.shape == (2, width)
        np.testing.assert_array_equal(batch.inputs[1], long.token_ids[:-1])
        np.testing.assert_array_equal(batch.targets[1], long.token_ids[1:])
        pad = len(long) - len(short)
        assert (batch.targets[0, -pad:] == IGNORE_INDEX).all()
        assert batch.n_targets == (len(short) - 1) + (len(long) - 1)

    def test_target_day_only(self):
        """
        Test target-day masking.

        Purpose: Only the target day block and the closing <eos> are
        supervised.

        Checkpoints:
        - The first supervised target follows <|sep|>
        - Number of targets equals the target block length plus <eos>
        """
        window = linearize_window(routine_history(1, n_days=8), 0)

        batch = collate([window], target_day_only=True)

        supervised = np.flatnonzero(batch.targets[0] != IGNORE_INDEX)
        assert batch.inputs[0, supervised[0]] == SEP_ID
        assert batch.n_targets == len(window) - 1 - window.sep_index

    def test_empty_batch(self):
        with pytest.raises(TrainingError):
            collate([])


@pytest.mark.unit
class TestWindowDataset:
    def test_training_dataset_uses_truncated_view(self, split, histories):
        dataset = WindowDataset.for_training(split, histories)

        assert len(dataset) == 68 * 2 + 53 * 2
        assert max(dataset.histories[3].days) == 59

    def test_batches_follow_order(self, split, histories):
        dataset = WindowDataset.for_training(split, histories, day_min=60, day_max=75)
        order = [5, 0, 3]

        batches = list(dataset.batches(2, order))

        assert [len(b.windows) for b in batches] == [2, 1]
        assert batches[0].windows[0].start_day == dataset.windows[5].start_day
        assert batches[1].windows[0].start_day == dataset.windows[3].start_day

    def test_validation_dataset(self, split, histories):
        dataset = WindowDataset.for_validation(split, histories, target_day_only=True)
        batch = dataset.batch([0])
        assert batch.windows[0].uid == 2
        assert batch.n_targets < batch.inputs.shape[1]


SENTINEL = (450, 451)


def with_marked_future(history, horizon_day):
    """Copy of a routine history whose post-horizon days add a unique cell."""
    days = dict(history.days)
    for day in range(horizon_day, 75):
        cells = {**routine_cells(history.dow(day)), 30: SENTINEL}
        days[day] = make_day(history.dow(day), cells)
    return UserHistory(uid=history.uid, dow_offset=history.dow_offset, days=days)


def row_uid(row):
    digits = []
    for token in row:
        if token == DATA_ID:
            break
        digits.append(str(int(token) - Vocabulary.digit_id(0)))
    return int("".join(digits))


@pytest.mark.unit
class TestLeakage:
    """Enumerate every training token and look for held-out futures."""

    @pytest.fixture
    def marked(self, split, histories):
        return {
            uid: with_marked_future(h, split.horizon_day) if uid in split.held_out_uids else h
            for uid, h in histories.items()
        }

    def sentinel_tokens(self):
        return {Vocabulary.x_id(SENTINEL[0]), Vocabulary.y_id(SENTINEL[1])}

    def batch_tokens(self, batch):
        return set(batch.inputs.ravel()) | set(batch.targets[batch.targets != IGNORE_INDEX])

    @pytest.mark.parametrize("day_range", [(0, 75), (60, 75)], ids=["train", "finetune"])
    def test_no_held_out_future_in_any_batch(self, split, marked, day_range):
        """
        Test that training batches never carry held-out post-horizon data.

        Purpose: Held-out users' days from the horizon on are marked with a
        cell nobody else visits; no collated token may reveal it.

        Checkpoints:
        - Sentinel x/y tokens absent from every input and target
        - Rows of held-out users exist only in the pre-horizon range
        - Every row's uid digits match the window it was built from
        """
        dataset = WindowDataset.for_training(split, marked, *day_range)
        held_out_rows = 0

        for batch in dataset.batches(8):
            assert not self.batch_tokens(batch) & self.sentinel_tokens()
            for row, window in zip(batch.inputs, batch.windows):
                uid = row_uid(row)
                assert uid == window.uid
                held_out_rows += uid in split.held_out_uids

        if day_range == (60, 75):
            assert held_out_rows == 0
        else:
            assert held_out_rows == 53 * 2

    def test_sentinel_reaches_validation_batches(self, split, marked):
        dataset = WindowDataset.for_validation(split, marked)
        seen = set().union(*(self.batch_tokens(b) for b in dataset.batches(8)))
        assert self.sentinel_tokens() <= seen
