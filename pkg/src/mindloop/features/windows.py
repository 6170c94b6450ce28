"""Sliding-window extraction, leakage-free stratified splitting, stacking."""

from __future__ import annotations

import numpy as np

from ..signal_core.types import EpochSet, ParameterError, ShapeError
from .tensor import FeatureTensor

DEFAULT_WINDOW_S = 1.0
DEFAULT_STRIDE_S = 2.0 / 3.0


def window_frame_counts(n_frames: int, sample_rate_hz: float,
                        window_s: float = DEFAULT_WINDOW_S,
                        stride_s: float = DEFAULT_STRIDE_S):
    """(window_frames, stride_frames, n_windows) for one epoch length.

    Stride uses floor() so the default 1 s / (2/3) s geometry cuts exactly 4
    windows out of a 3 s epoch at 250 Hz.
    """
    window = int(round(window_s * sample_rate_hz))
    stride = max(1, int(stride_s * sample_rate_hz))
    if window > n_frames:
        raise ParameterError(
            f"window of {window} frames exceeds epoch length {n_frames}")
    n_windows = (n_frames - window) // stride + 1
    return window, stride, n_windows


def window_epochs(epoch_set: EpochSet, window_s: float = DEFAULT_WINDOW_S,
                  stride_s: float = DEFAULT_STRIDE_S) -> EpochSet:
    """Cut sliding windows from every epoch; labels are inherited.

    The result records, per window, the parent epoch index and start offset
    so later splits can group by parent.
    """
    window, stride, n_per_epoch = window_frame_counts(
        epoch_set.n_frames, epoch_set.sample_rate_hz, window_s, stride_s)

    starts = np.arange(n_per_epoch) * stride
    windows = np.stack([epoch_set.epochs[:, :, s:s + window] for s in starts],
                       axis=1)  # [n_epochs x n_per_epoch x ch x window]
    windows = windows.reshape(-1, epoch_set.n_channels, window)

    parents = np.repeat(np.arange(epoch_set.n_epochs), n_per_epoch)
    offsets = np.tile(starts, epoch_set.n_epochs)
    labels = np.repeat(epoch_set.labels, n_per_epoch)

    return EpochSet(
        epochs=windows,
        labels=labels,
        class_names=epoch_set.class_names,
        sample_rate_hz=epoch_set.sample_rate_hz,
        channel_names=epoch_set.channel_names,
        tmin=epoch_set.tmin,
        tmax=epoch_set.tmin + window_s,
        baseline=epoch_set.baseline,
        norm_mean=epoch_set.norm_mean,
        norm_std=epoch_set.norm_std,
        source_epoch=parents,
        offset_frames=offsets,
    )


def _allocate_train_epochs(parent_labels: dict, ratio: float, seed: int):
    """Pick training parent-epoch ids, stratified by class.

    Per-class quotas use largest-remainder rounding so the total equals
    round(ratio * n_epochs) while each class stays within one epoch of its
    exact share.
    """
    rng = np.random.default_rng(seed)
    classes = sorted(parent_labels)
    n_total = sum(len(parent_labels[c]) for c in classes)
    target_total = int(round(ratio * n_total))

    quotas = {c: ratio * len(parent_labels[c]) for c in classes}
    counts = {c: int(np.floor(quotas[c])) for c in classes}
    shortfall = target_total - sum(counts.values())
    by_remainder = sorted(classes, key=lambda c: (quotas[c] - counts[c], c),
                          reverse=True)
    for c in by_remainder[:shortfall]:
        counts[c] += 1

    train_ids = []
    for c in classes:
        ids = np.array(sorted(parent_labels[c]))
        rng.shuffle(ids)
        train_ids.extend(ids[:counts[c]])
    return set(train_ids)


def stratified_split(tensor: FeatureTensor, ratio: float = 0.8, seed: int = 0):
    """Split windows into train/test by parent epoch, stratified by class.

    All windows of one epoch land on the same side, so no near-duplicate
    windows straddle the split.
    """
    if not 0.0 < ratio < 1.0:
        raise ParameterError("split ratio must lie strictly between 0 and 1")
    parent_labels: dict[int, set] = {}
    for parent, label in zip(tensor.parent_epoch, tensor.labels):
        parent_labels.setdefault(int(label), set()).add(int(parent))
    for c, parents in parent_labels.items():
        windows = int(np.sum(tensor.labels == c))
        if windows < 5:
            raise ParameterError(
                f"class {tensor.class_names[c]!r} has only {windows} windows")

    train_parents = _allocate_train_epochs(parent_labels, ratio, seed)
    in_train = np.array([int(p) in train_parents for p in tensor.parent_epoch])
    if not in_train.any() or in_train.all():
        raise ParameterError("split produced an empty side; adjust ratio")
    return tensor.select(np.flatnonzero(in_train)), tensor.select(np.flatnonzero(~in_train))


def split_epochs(epoch_set: EpochSet, ratio: float = 0.8, seed: int = 0):
    """Stratified epoch-level split of an (unwindowed) EpochSet.

    Used by the offline chain before any statistics are fit, so that
    normalization and CSP never see test epochs.
    """
    if not 0.0 < ratio < 1.0:
        raise ParameterError("split ratio must lie strictly between 0 and 1")
    parent_labels: dict[int, set] = {}
    for idx, label in enumerate(epoch_set.labels):
        parent_labels.setdefault(int(label), set()).add(idx)
    train_ids = _allocate_train_epochs(parent_labels, ratio, seed)
    train_rows = np.array(sorted(train_ids), dtype=np.int64)
    test_rows = np.array(sorted(set(range(epoch_set.n_epochs)) - train_ids),
                         dtype=np.int64)
    if len(train_rows) == 0 or len(test_rows) == 0:
        raise ParameterError("split produced an empty side; adjust ratio")
    return _take_epochs(epoch_set, train_rows), _take_epochs(epoch_set, test_rows)


def _take_epochs(epoch_set: EpochSet, rows: np.ndarray) -> EpochSet:
    return EpochSet(
        epochs=epoch_set.epochs[rows],
        labels=epoch_set.labels[rows],
        class_names=epoch_set.class_names,
        sample_rate_hz=epoch_set.sample_rate_hz,
        channel_names=epoch_set.channel_names,
        tmin=epoch_set.tmin,
        tmax=epoch_set.tmax,
        baseline=epoch_set.baseline,
        norm_mean=epoch_set.norm_mean,
        norm_std=epoch_set.norm_std,
        source_epoch=(epoch_set.source_epoch[rows]
                      if epoch_set.source_epoch is not None else None),
        offset_frames=(epoch_set.offset_frames[rows]
                       if epoch_set.offset_frames is not None else None),
    )


def stack_features(morlet_part: FeatureTensor, csp_part: np.ndarray | None) -> FeatureTensor:
    """Broadcast the static CSP block along time and append it as extra
    feature channels, so the sequence model sees both."""
    if csp_part is None or csp_part.shape[1] == 0:
        return morlet_part
    if csp_part.shape[0] != morlet_part.n_windows:
        raise ShapeError(
            f"CSP block has {csp_part.shape[0]} rows, morlet part has "
            f"{morlet_part.n_windows} windows")
    broadcast = np.repeat(csp_part[:, :, None], morlet_part.n_steps, axis=2)
    return FeatureTensor(
        data=np.concatenate([morlet_part.data, broadcast], axis=1),
        labels=morlet_part.labels,
        class_names=morlet_part.class_names,
        parent_epoch=morlet_part.parent_epoch,
        offset_frames=morlet_part.offset_frames,
    )
