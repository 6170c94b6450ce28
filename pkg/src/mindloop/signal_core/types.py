"""Domain types for raw EEG signals: montages, chunks, recordings, epochs."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

#: Electrode labels of a generic 24-channel 10-20 cap (mobile saline headset class).
CAP_24 = [
    "Fp1", "Fp2", "AFz", "F7", "F3", "Fz", "F4", "F8",
    "T7", "C3", "Cz", "C4", "T8", "CPz",
    "P7", "P3", "Pz", "P4", "P8", "POz",
    "O1", "O2", "M1", "M2",
]

DEFAULT_SAMPLE_RATE = 250.0


class SignalError(Exception):
    """Base class for signal-domain errors."""


class ParameterError(SignalError):
    """Invalid parameter (Nyquist violation, empty set, bad bounds...)."""


class ShapeError(SignalError):
    """Array dimensions inconsistent with the montage or model."""


class DataQualityError(SignalError):
    """Data unusable (all channels rejected, zero epochs, rank-deficient...)."""


@dataclass(frozen=True)
class Montage:
    """Channel layout and sampling metadata of one EEG stream.

    Parameters
    ----------
    channel_names : list of str
        Unique electrode labels (10-20 system).
    sample_rate_hz : float
        Sampling rate, > 0.
    reference_scheme : str
        Either ``"device"`` (as-recorded) or ``"common_average"``.
    """

    channel_names: tuple
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE
    reference_scheme: str = "device"

    def __post_init__(self):
        names = tuple(self.channel_names)
        object.__setattr__(self, "channel_names", names)
        if len(names) == 0:
            raise ParameterError("montage needs at least one channel")
        if len(set(names)) != len(names):
            raise ParameterError("channel names must be unique")
        if not self.sample_rate_hz > 0:
            raise ParameterError("sample_rate_hz must be positive")
        if self.reference_scheme not in ("device", "common_average"):
            raise ParameterError(f"unknown reference scheme {self.reference_scheme!r}")

    @property
    def n_channels(self) -> int:
        return len(self.channel_names)

    def index_of(self, name: str) -> int:
        return self.channel_names.index(name)

    def drop(self, names) -> "Montage":
        keep = [c for c in self.channel_names if c not in set(names)]
        return replace(self, channel_names=tuple(keep))

    @classmethod
    def default_24(cls, sample_rate_hz: float = DEFAULT_SAMPLE_RATE) -> "Montage":
        return cls(tuple(CAP_24), sample_rate_hz)


@dataclass
class SampleChunk:
    """A contiguous block of frames from one stream.

    ``samples`` is [channels x frames] in microvolts; ``start_timestamp`` is
    the stream-clock time (seconds) of the first frame.
    """

    samples: np.ndarray
    start_timestamp: float
    montage: Montage

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2:
            raise ShapeError("samples must be 2-D [channels x frames]")
        if self.samples.shape[0] != self.montage.n_channels:
            raise ShapeError(
                f"chunk has {self.samples.shape[0]} rows, montage has "
                f"{self.montage.n_channels} channels"
            )
        if self.samples.shape[1] < 1:
            raise ShapeError("chunk must contain at least one frame")

    @property
    def n_frames(self) -> int:
        return self.samples.shape[1]

    @property
    def end_timestamp(self) -> float:
        return self.start_timestamp + self.n_frames / self.montage.sample_rate_hz


@dataclass(frozen=True)
class Marker:
    """A timestamped event (task cue, calibration boundary, game event)."""

    timestamp: float
    label: str


@dataclass
class Recording:
    """A complete multichannel recording with its event markers.

    Marker timestamps are seconds relative to the first sample.
    """

    montage: Montage
    samples: np.ndarray
    markers: list = field(default_factory=list)
    session_id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2:
            raise ShapeError("samples must be 2-D [channels x frames]")
        if self.samples.shape[0] != self.montage.n_channels:
            raise ShapeError("sample rows must match montage channel count")
        self.markers = sorted(self.markers, key=lambda m: m.timestamp)
        for m in self.markers:
            if not (0.0 <= m.timestamp <= self.duration_s + 1e-9):
                raise ParameterError(
                    f"marker {m.label!r} at {m.timestamp}s outside recording span"
                )

    @property
    def n_frames(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.samples.shape[1] / self.montage.sample_rate_hz


@dataclass
class EpochSet:
    """Labeled fixed-length segments cut around task-onset markers.

    ``epochs`` is [n_epochs x channels x frames]; ``labels`` holds integer
    class ids indexing ``class_names``. After :func:`window_epochs` the
    optional ``source_epoch``/``offset_frames`` arrays record, per row, the
    parent epoch index and the window start offset inside it.
    """

    epochs: np.ndarray
    labels: np.ndarray
    class_names: tuple
    sample_rate_hz: float
    channel_names: tuple
    tmin: float
    tmax: float
    baseline: Optional[tuple] = None
    norm_mean: Optional[np.ndarray] = None
    norm_std: Optional[np.ndarray] = None
    source_epoch: Optional[np.ndarray] = None
    offset_frames: Optional[np.ndarray] = None

    def __post_init__(self):
        self.epochs = np.asarray(self.epochs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.epochs.ndim != 3:
            raise ShapeError("epochs must be 3-D [n x channels x frames]")
        if self.epochs.shape[0] != self.labels.shape[0]:
            raise ShapeError("labels must align with epochs")
        if self.epochs.shape[0] < 1:
            raise DataQualityError("epoch set is empty")
        if self.labels.size and (self.labels.min() < 0
                                 or self.labels.max() >= len(self.class_names)):
            raise ParameterError("labels outside configured class set")

    @property
    def n_epochs(self) -> int:
        return self.epochs.shape[0]

    @property
    def n_channels(self) -> int:
        return self.epochs.shape[1]

    @property
    def n_frames(self) -> int:
        return self.epochs.shape[2]
