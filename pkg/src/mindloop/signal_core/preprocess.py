"""Cropping, re-referencing, epoching, baseline correction and normalization.

The online and offline paths share these functions; ASR must run before the
common average reference so artifact removal sees full-rank data.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .types import (
    DataQualityError,
    EpochSet,
    Marker,
    ParameterError,
    Recording,
    SampleChunk,
)

log = logging.getLogger(__name__)

DEFAULT_CROP_S = 10.0
DEFAULT_TMIN = 0.0
DEFAULT_TMAX = 3.0
DEFAULT_BASELINE = (-0.5, 0.0)
NORM_EPS = 1e-12


def crop_head(recording: Recording, seconds: float) -> Recording:
    """Drop the first ``seconds`` of a recording (filter settle-in).

    Markers before the cut are removed; the rest are re-based so t=0 is the
    first remaining sample.
    """
    if seconds < 0:
        raise ParameterError("crop length must be non-negative")
    if seconds == 0:
        return recording
    fs = recording.montage.sample_rate_hz
    cut = int(round(seconds * fs))
    if cut >= recording.n_frames:
        raise DataQualityError(
            f"cannot crop {seconds}s from a {recording.duration_s:.2f}s recording")
    markers = [Marker(m.timestamp - seconds, m.label)
               for m in recording.markers if m.timestamp >= seconds]
    return Recording(
        montage=recording.montage,
        samples=recording.samples[:, cut:],
        markers=markers,
        session_id=recording.session_id,
    )


def common_average_reference(chunk: SampleChunk, included_channels=None) -> SampleChunk:
    """Subtract the mean over the included channels from every channel.

    ``included_channels`` is a list of channel names; defaults to all.
    Applied strictly after ASR so artifact removal sees full-rank data.
    """
    names = chunk.montage.channel_names
    if included_channels is None:
        idx = np.arange(len(names))
    else:
        if len(included_channels) == 0:
            raise ParameterError("CAR inclusion set must be non-empty")
        idx = np.array([names.index(c) for c in included_channels])
    mean = chunk.samples[idx].mean(axis=0, keepdims=True)
    referenced = chunk.samples - mean
    montage = replace(chunk.montage, reference_scheme="common_average")
    return SampleChunk(referenced, chunk.start_timestamp, montage)


def car_recording(recording: Recording, included_channels=None) -> Recording:
    chunk = SampleChunk(recording.samples, 0.0, recording.montage)
    out = common_average_reference(chunk, included_channels)
    return Recording(montage=out.montage, samples=out.samples,
                     markers=list(recording.markers),
                     session_id=recording.session_id)


def epoch_and_baseline(recording: Recording, cue_to_class_map: dict,
                       tmin: float = DEFAULT_TMIN, tmax: float = DEFAULT_TMAX,
                       baseline: tuple = DEFAULT_BASELINE) -> EpochSet:
    """Cut one epoch per recognized marker and subtract the baseline mean.

    Markers whose label appears in ``cue_to_class_map`` produce an epoch
    spanning [t+tmin, t+tmax); the per-channel mean over
    [t+baseline[0], t+baseline[1]) is subtracted. Markers too close to the
    recording edges are skipped with a counted warning.
    """
    if not tmin < tmax:
        raise ParameterError("need tmin < tmax")
    b0, b1 = baseline
    if not b0 < b1:
        raise ParameterError("baseline interval must be non-empty")
    if b1 > tmax:
        raise ParameterError("baseline must end within the epoch window")

    fs = recording.montage.sample_rate_hz
    n_frames = int(round((tmax - tmin) * fs))
    class_names = tuple(sorted(set(cue_to_class_map.values())))
    class_index = {name: i for i, name in enumerate(class_names)}

    epochs, labels, skipped = [], [], 0
    for marker in recording.markers:
        if marker.label not in cue_to_class_map:
            continue
        start = int(round((marker.timestamp + tmin) * fs))
        bstart = int(round((marker.timestamp + b0) * fs))
        bstop = int(round((marker.timestamp + b1) * fs))
        if min(start, bstart) < 0 or max(start + n_frames, bstop) > recording.n_frames:
            skipped += 1
            continue
        segment = recording.samples[:, start:start + n_frames]
        base = recording.samples[:, bstart:bstop].mean(axis=1, keepdims=True)
        epochs.append(segment - base)
        labels.append(class_index[cue_to_class_map[marker.label]])

    if skipped:
        log.warning("skipped %d markers too close to the recording edge", skipped)
    if not epochs:
        raise DataQualityError("no recognized markers produced epochs")

    return EpochSet(
        epochs=np.stack(epochs),
        labels=np.array(labels),
        class_names=class_names,
        sample_rate_hz=fs,
        channel_names=recording.montage.channel_names,
        tmin=tmin,
        tmax=tmax,
        baseline=(b0, b1),
    )


@dataclass(frozen=True)
class NormStats:
    """Per-channel z-scoring statistics, fit on training data only."""

    mean: np.ndarray
    std: np.ndarray

    def apply(self, samples: np.ndarray) -> np.ndarray:
        """Z-score a [channels x frames] array with the stored stats."""
        return (samples - self.mean[:, None]) / self.std[:, None]


def normalize_epochs(epoch_set: EpochSet, stats: NormStats | None = None):
    """Per-channel z-scoring across all epochs and frames.

    When ``stats`` is given (from the training set) it is reused verbatim,
    so test and online data see exactly the training transform.

    Returns
    -------
    (EpochSet, NormStats)
    """
    if stats is None:
        flat = epoch_set.epochs.transpose(1, 0, 2).reshape(epoch_set.n_channels, -1)
        mean = flat.mean(axis=1)
        std = flat.std(axis=1)
        degenerate = std < NORM_EPS
        if degenerate.any():
            log.warning("zero-variance channels during normalization: %s",
                        [epoch_set.channel_names[i]
                         for i in np.flatnonzero(degenerate)])
            std = np.where(degenerate, 1.0, std)
        stats = NormStats(mean=mean, std=std)
    elif stats.mean.shape[0] != epoch_set.n_channels:
        raise ParameterError("normalization stats do not match channel count")

    normalized = (epoch_set.epochs - stats.mean[None, :, None]) / stats.std[None, :, None]
    out = EpochSet(
        epochs=normalized,
        labels=epoch_set.labels.copy(),
        class_names=epoch_set.class_names,
        sample_rate_hz=epoch_set.sample_rate_hz,
        channel_names=epoch_set.channel_names,
        tmin=epoch_set.tmin,
        tmax=epoch_set.tmax,
        baseline=epoch_set.baseline,
        norm_mean=stats.mean.copy(),
        norm_std=stats.std.copy(),
        source_epoch=epoch_set.source_epoch,
        offset_frames=epoch_set.offset_frames,
    )
    return out, stats
