import numpy as np
import pytest

from mindloop.features import (
    FeatureTensor,
    stack_features,
    stratified_split,
    window_epochs,
)
from mindloop.signal_core import EpochSet, ParameterError

FS = 250.0


def epochs_of(n_epochs, labels=None, n_channels=2, n_frames=750, seed=0):
    rng = np.random.default_rng(seed)
    if labels is None:
        labels = np.arange(n_epochs) % 3
    return EpochSet(
        epochs=rng.standard_normal((n_epochs, n_channels, n_frames)),
        labels=np.asarray(labels),
        class_names=("a", "b", "c"),
        sample_rate_hz=FS,
        channel_names=tuple(f"ch{i}" for i in range(n_channels)),
        tmin=0.0,
        tmax=n_frames / FS,
    )


def tensor_from(epoch_set):
    n = epoch_set.n_epochs
    rng = np.random.default_rng(42)
    return FeatureTensor(
        data=rng.standard_normal((n, 4, 10)),
        labels=epoch_set.labels,
        class_names=epoch_set.class_names,
        parent_epoch=(epoch_set.source_epoch if epoch_set.source_epoch is not None
                      else np.arange(n)),
        offset_frames=(epoch_set.offset_frames if epoch_set.offset_frames is not None
                       else np.zeros(n, dtype=np.int64)),
    )


class TestWindowing:
    def test_190_epochs_give_760_windows(self):
        es = epochs_of(190, labels=np.arange(190) % 3)
        windowed = window_epochs(es)
        assert windowed.n_epochs == 760

    def test_720_epochs_give_2880_windows(self):
        es = epochs_of(720)
        windowed = window_epochs(es)
        assert windowed.n_epochs == 2880

    def test_window_equal_to_epoch_is_identity(self):
        es = epochs_of(5, n_frames=500)
        windowed = window_epochs(es, window_s=2.0, stride_s=2.0)
        assert windowed.n_epochs == 5
        np.testing.assert_array_equal(windowed.epochs, es.epochs)

    def test_window_longer_than_epoch(self):
        es = epochs_of(2, n_frames=100)
        with pytest.raises(ParameterError):
            window_epochs(es, window_s=1.0)

    def test_provenance_bijection(self):
        es = epochs_of(12)
        windowed = window_epochs(es)
        pairs = set(zip(windowed.source_epoch.tolist(),
                        windowed.offset_frames.tolist()))
        assert len(pairs) == windowed.n_epochs
        assert {p for p, _ in pairs} == set(range(12))
        offsets = sorted({o for _, o in pairs})
        assert offsets == [0, 166, 332, 498]

    def test_labels_inherited(self):
        es = epochs_of(6, labels=[0, 1, 2, 0, 1, 2])
        windowed = window_epochs(es)
        np.testing.assert_array_equal(windowed.labels,
                                      np.repeat(es.labels, 4))

    def test_window_content_matches_slices(self):
        es = epochs_of(3)
        windowed = window_epochs(es)
        np.testing.assert_array_equal(windowed.epochs[5],
                                      es.epochs[1, :, 166:166 + 250])


class TestStratifiedSplit:
    def test_190_epoch_counts(self):
        # 190 parent epochs (64/63/63) -> 760 windows -> 608/152.
        labels = np.array([0] * 64 + [1] * 63 + [2] * 63)
        es = epochs_of(190, labels=labels)
        tensor = tensor_from(window_epochs(es))
        train, test = stratified_split(tensor, ratio=0.8, seed=0)
        assert train.n_windows == 608
        assert test.n_windows == 152
        for c in range(3):
            n_c = np.sum(labels == c)
            train_c = np.sum(train.labels == c) / 4
            assert abs(train_c - 0.8 * n_c) <= 1.0

    def test_no_parent_epoch_straddles_split(self):
        es = epochs_of(30)
        tensor = tensor_from(window_epochs(es))
        train, test = stratified_split(tensor, ratio=0.8, seed=3)
        assert set(train.parent_epoch) & set(test.parent_epoch) == set()
        assert train.n_windows + test.n_windows == tensor.n_windows

    def test_deterministic(self):
        es = epochs_of(30, seed=1)
        tensor = tensor_from(window_epochs(es))
        t1, _ = stratified_split(tensor, ratio=0.8, seed=9)
        t2, _ = stratified_split(tensor, ratio=0.8, seed=9)
        np.testing.assert_array_equal(t1.parent_epoch, t2.parent_epoch)
        t3, _ = stratified_split(tensor, ratio=0.8, seed=10)
        assert not np.array_equal(t1.parent_epoch, t3.parent_epoch)

    def test_ratio_bounds_enforced(self):
        es = epochs_of(30)
        tensor = tensor_from(window_epochs(es))
        for ratio in (0.0, 1.0, 1.5, -0.1):
            with pytest.raises(ParameterError):
                stratified_split(tensor, ratio=ratio)

    def test_small_class_rejected(self):
        es = epochs_of(3, labels=[0, 1, 2])
        tensor = tensor_from(es)  # one window per class
        with pytest.raises(ParameterError):
            stratified_split(tensor, ratio=0.8)


class TestStackFeatures:
    def test_channel_arithmetic(self):
        es = epochs_of(8)
        windowed = window_epochs(es)
        morlet = tensor_from(windowed)  # 4 channels x 10 steps stand-in
        csp = np.random.default_rng(0).standard_normal((morlet.n_windows, 12))
        stacked = stack_features(morlet, csp)
        assert stacked.n_feature_channels == 4 + 12
        assert stacked.n_steps == morlet.n_steps
        # static block broadcast along time
        np.testing.assert_array_equal(stacked.data[:, 4:, 0],
                                      stacked.data[:, 4:, -1])

    def test_disabled_csp_passthrough(self):
        es = epochs_of(4)
        morlet = tensor_from(es)
        assert stack_features(morlet, None) is morlet

    def test_provenance_preserved(self):
        es = epochs_of(4)
        windowed = window_epochs(es)
        morlet = tensor_from(windowed)
        csp = np.zeros((morlet.n_windows, 3))
        stacked = stack_features(morlet, csp)
        np.testing.assert_array_equal(stacked.parent_epoch, morlet.parent_epoch)
        np.testing.assert_array_equal(stacked.offset_frames, morlet.offset_frames)

    def test_count_mismatch(self):
        from mindloop.signal_core import ShapeError

        es = epochs_of(4)
        morlet = tensor_from(es)
        with pytest.raises(ShapeError):
            stack_features(morlet, np.zeros((morlet.n_windows + 1, 3)))
