"""Artifact handling: channel rejection and artifact subspace reconstruction.

ASR calibrates a mixing matrix M (matrix square root of a robust covariance
of clean rest data) together with per-direction RMS thresholds. At run time,
each fixed-length window is eigendecomposed; directions whose variance
exceeds the calibrated threshold are zeroed and the window reconstructed as

    R = M @ pinv(keep * (V.T @ M)) @ V.T

where ``keep`` zeroes the rejected rows. Windows with no flagged direction
pass through untouched, which keeps the operation cheap on clean data.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .types import DataQualityError, ParameterError, Recording, SampleChunk, ShapeError

log = logging.getLogger(__name__)

DEFAULT_CUTOFF_K = 20.0
DEFAULT_PROCESS_WINDOW_S = 0.5
CALIBRATION_SUBWINDOW_S = 1.0


@dataclass(frozen=True)
class RejectionCriteria:
    """Thresholds for rejecting broken channels.

    flatline_s: longest tolerated constant stretch, seconds.
    noise_z: reject channels whose std exceeds noise_z x median channel std.
    spike_uv: reject channels containing any |sample| above this amplitude.
    """

    flatline_s: float = 5.0
    noise_z: float = 5.0
    spike_uv: float = 500.0


def reject_channels(recording: Recording,
                    criteria: RejectionCriteria = RejectionCriteria()):
    """Drop channels with flatlines, excessive noise or non-physiological spikes.

    Returns
    -------
    (Recording, dict)
        The cleaned recording and ``{channel_name: reason}`` for every
        rejected channel.

    Raises
    ------
    DataQualityError
        If every channel would be rejected.
    """
    if recording.montage.n_channels < 2:
        raise ParameterError("channel rejection needs at least 2 channels")

    fs = recording.montage.sample_rate_hz
    x = recording.samples
    rejected: dict[str, str] = {}

    stds = x.std(axis=1)
    median_std = float(np.median(stds))
    flat_limit = int(round(criteria.flatline_s * fs))

    for idx, name in enumerate(recording.montage.channel_names):
        if _longest_constant_run(x[idx]) > flat_limit:
            rejected[name] = "flatline"
        elif np.max(np.abs(x[idx])) > criteria.spike_uv:
            rejected[name] = "spike"
        elif median_std > 0 and stds[idx] > criteria.noise_z * median_std:
            rejected[name] = "noise"

    if len(rejected) == recording.montage.n_channels:
        raise DataQualityError("all channels rejected; recording unusable")
    if not rejected:
        return recording, rejected

    keep = [i for i, name in enumerate(recording.montage.channel_names)
            if name not in rejected]
    log.info("rejected channels: %s", rejected)
    cleaned = Recording(
        montage=recording.montage.drop(rejected),
        samples=x[keep],
        markers=list(recording.markers),
        session_id=recording.session_id,
    )
    return cleaned, rejected


def _longest_constant_run(channel: np.ndarray) -> int:
    """Length in frames of the longest stretch of consecutive equal samples."""
    diffs = np.diff(channel) == 0.0
    if not diffs.any():
        return 1
    # Runs of True in diffs of length k correspond to k+1 equal samples.
    padded = np.concatenate(([False], diffs, [False]))
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    run_lengths = edges[1::2] - edges[0::2]
    return int(run_lengths.max()) + 1


@dataclass
class AsrModel:
    """Calibrated artifact-subspace-reconstruction statistics.

    M is symmetric positive definite (sqrtm of the robust calibration
    covariance); thresholds per calibration direction are mu + k*sigma of
    sub-window RMS.
    """

    mixing: np.ndarray            # M, [channels x channels]
    directions: np.ndarray        # eigenvectors of M, columns
    rms_mean: np.ndarray          # mu_i per direction
    rms_std: np.ndarray           # sigma_i per direction
    cutoff_k: float
    window_s: float
    sample_rate_hz: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.threshold_matrix())):
            raise DataQualityError("ASR thresholds are not finite")

    @property
    def n_channels(self) -> int:
        return self.mixing.shape[0]

    @property
    def window_frames(self) -> int:
        return int(round(self.window_s * self.sample_rate_hz))

    def threshold_rms(self) -> np.ndarray:
        return self.rms_mean + self.cutoff_k * self.rms_std

    def threshold_matrix(self) -> np.ndarray:
        """T = diag(mu + k*sigma) @ V.T, the rejection thresholds as a map."""
        return np.diag(self.threshold_rms()) @ self.directions.T


def asr_calibrate(calibration: Recording, cutoff_k: float = DEFAULT_CUTOFF_K,
                  window_s: float = DEFAULT_PROCESS_WINDOW_S) -> AsrModel:
    """Fit ASR statistics from >= 30 s of clean, bandpass-filtered rest data.

    The robust covariance is the element-wise median of per-sub-window
    covariances; per-direction RMS statistics are plain mean/std over the
    same sliding sub-windows.

    Raises
    ------
    DataQualityError
        If the calibration covariance is rank deficient (reject broken
        channels first).
    """
    fs = calibration.montage.sample_rate_hz
    x = calibration.samples
    if calibration.duration_s < 30.0:
        raise ParameterError("calibration must be at least 30 s long")

    sub = int(round(CALIBRATION_SUBWINDOW_S * fs))
    hop = sub // 2
    starts = range(0, x.shape[1] - sub + 1, hop)
    covs = np.stack([np.cov(x[:, s:s + sub]) for s in starts])
    robust_cov = np.median(covs, axis=0)

    eigvals = linalg.eigvalsh(robust_cov)
    if eigvals[0] <= 1e-12 * max(eigvals[-1], 1.0):
        raise DataQualityError(
            "rank-deficient calibration covariance; run channel rejection "
            "before ASR calibration")

    mixing = linalg.sqrtm(robust_cov).real
    mixing = (mixing + mixing.T) / 2.0
    _, directions = linalg.eigh(mixing)

    projected = directions.T @ x
    rms = np.stack([
        np.sqrt(np.mean(projected[:, s:s + sub] ** 2, axis=1)) for s in starts
    ])  # [n_subwindows x channels]
    model = AsrModel(
        mixing=mixing,
        directions=directions,
        rms_mean=rms.mean(axis=0),
        rms_std=rms.std(axis=0),
        cutoff_k=cutoff_k,
        window_s=window_s,
        sample_rate_hz=fs,
    )
    return model


def asr_process(model: AsrModel, window: SampleChunk) -> SampleChunk:
    """Clean one processing window.

    Per-window PCA; components with variance above the calibrated threshold
    are zeroed and the signal reconstructed through the calibration mixing.
    If nothing exceeds the thresholds the input is returned unchanged.
    """
    x = window.samples
    if x.shape[0] != model.n_channels:
        raise ShapeError(
            f"window has {x.shape[0]} channels, model expects {model.n_channels}")
    if x.shape[1] != model.window_frames:
        raise ShapeError(
            f"window has {x.shape[1]} frames, model expects {model.window_frames}")

    cov = np.cov(x)
    eigvals, v = linalg.eigh(cov)
    # Threshold variance in each window direction: squared norm of the
    # calibration threshold map applied to that direction.
    limits = np.sum((model.threshold_matrix() @ v) ** 2, axis=0)
    keep = eigvals <= limits
    if keep.all():
        return window

    vt_m = v.T @ model.mixing
    reconstructor = model.mixing @ linalg.pinv(keep[:, None] * vt_m) @ v.T
    cleaned = reconstructor @ x
    return SampleChunk(cleaned, window.start_timestamp, window.montage)


def asr_process_recording(model: AsrModel, recording: Recording) -> Recording:
    """Clean a whole recording window-by-window (tail shorter than one
    processing window is passed through)."""
    wf = model.window_frames
    out = recording.samples.copy()
    montage = recording.montage
    fs = montage.sample_rate_hz
    for start in range(0, recording.n_frames - wf + 1, wf):
        chunk = SampleChunk(out[:, start:start + wf], start / fs, montage)
        out[:, start:start + wf] = asr_process(model, chunk).samples
    return Recording(montage=montage, samples=out,
                     markers=list(recording.markers),
                     session_id=recording.session_id)
