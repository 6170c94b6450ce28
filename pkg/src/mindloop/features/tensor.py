"""The stacked feature tensor handed to classifiers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..signal_core.types import ParameterError, ShapeError


@dataclass
class FeatureTensor:
    """Windowed features: a [n_windows x feature_channels x time_steps]
    sequence block, labels, and provenance back to the parent epochs.

    ``parent_epoch[i]``/``offset_frames[i]`` identify where window i was cut
    from, so splits can be made leakage-free at the epoch level.
    """

    data: np.ndarray
    labels: np.ndarray
    class_names: tuple
    parent_epoch: np.ndarray
    offset_frames: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.parent_epoch = np.asarray(self.parent_epoch, dtype=np.int64)
        self.offset_frames = np.asarray(self.offset_frames, dtype=np.int64)
        if self.data.ndim != 3:
            raise ShapeError("feature data must be 3-D [n x channels x steps]")
        n = self.data.shape[0]
        if not (self.labels.shape[0] == self.parent_epoch.shape[0]
                == self.offset_frames.shape[0] == n):
            raise ShapeError("labels/provenance must align with feature rows")
        if not np.all(np.isfinite(self.data)):
            raise ParameterError("feature tensor contains NaN or Inf")

    @property
    def n_windows(self) -> int:
        return self.data.shape[0]

    @property
    def n_feature_channels(self) -> int:
        return self.data.shape[1]

    @property
    def n_steps(self) -> int:
        return self.data.shape[2]

    def select(self, rows: np.ndarray) -> "FeatureTensor":
        return FeatureTensor(
            data=self.data[rows],
            labels=self.labels[rows],
            class_names=self.class_names,
            parent_epoch=self.parent_epoch[rows],
            offset_frames=self.offset_frames[rows],
        )


def pool_time(tensor: FeatureTensor) -> np.ndarray:
    """Time-pooled flat vectors [n x channels] for the shallow baselines."""
    return tensor.data.mean(axis=2)
