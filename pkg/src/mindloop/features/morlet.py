"""Single-trial spectro-temporal power from complex Morlet wavelets."""

from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve

from ..signal_core.types import EpochSet, ParameterError
from .tensor import FeatureTensor

DEFAULT_FREQS_HZ = tuple(np.arange(6.0, 33.0, 2.0))  # 6-32 Hz, 14 bins
DEFAULT_N_CYCLES = 2.0
DEFAULT_TIME_DECIM = 3


def morlet_wavelet(freq_hz: float, sample_rate_hz: float,
                   n_cycles: float = DEFAULT_N_CYCLES) -> np.ndarray:
    """Complex Morlet wavelet, L2-normalized, truncated at 5 sigma."""
    sigma_t = n_cycles / (2.0 * np.pi * freq_hz)
    half = int(np.ceil(5.0 * sigma_t * sample_rate_hz))
    t = np.arange(-half, half + 1) / sample_rate_hz
    wavelet = np.exp(2j * np.pi * freq_hz * t) * np.exp(-(t ** 2) / (2 * sigma_t ** 2))
    return wavelet / np.linalg.norm(wavelet)


def morlet_power(epoch_set: EpochSet, freqs_hz=DEFAULT_FREQS_HZ,
                 n_cycles: float = DEFAULT_N_CYCLES,
                 time_decim: int = DEFAULT_TIME_DECIM) -> FeatureTensor:
    """Per-channel, per-frequency power over time, decimated along time.

    The output tensor is [n_epochs x (channels*freqs) x ceil(frames/decim)],
    feature channels ordered channel-major (all frequencies of channel 0
    first). Power is the squared magnitude of the complex wavelet
    convolution ('same' length), so it scales with amplitude squared.
    """
    freqs = np.asarray(freqs_hz, dtype=float)
    fs = epoch_set.sample_rate_hz
    nyquist = fs / 2.0
    if np.any(freqs <= 0) or np.any(freqs >= nyquist):
        raise ParameterError("wavelet frequencies must lie in (0, Nyquist)")
    min_frames = np.ceil(n_cycles * fs / freqs.min())
    if epoch_set.n_frames < min_frames:
        raise ParameterError(
            f"epochs of {epoch_set.n_frames} frames are too short for "
            f"{n_cycles} cycles at {freqs.min()} Hz")
    if time_decim < 1:
        raise ParameterError("time_decim must be >= 1")

    wavelets = [morlet_wavelet(f, fs, n_cycles) for f in freqs]
    n_epochs, n_channels, n_frames = epoch_set.epochs.shape
    n_steps = int(np.ceil(n_frames / time_decim))

    power = np.empty((n_epochs, n_channels * len(freqs), n_steps))
    for fi, w in enumerate(wavelets):
        # Convolve all epochs/channels with this wavelet in one call.
        analytic = fftconvolve(epoch_set.epochs, w[None, None, :], mode="same")
        p = np.abs(analytic) ** 2
        power[:, fi::len(freqs), :] = p[:, :, ::time_decim]

    labels = epoch_set.labels.copy()
    return FeatureTensor(
        data=power,
        labels=labels,
        class_names=epoch_set.class_names,
        parent_epoch=(epoch_set.source_epoch.copy()
                      if epoch_set.source_epoch is not None
                      else np.arange(n_epochs)),
        offset_frames=(epoch_set.offset_frames.copy()
                       if epoch_set.offset_frames is not None
                       else np.zeros(n_epochs, dtype=np.int64)),
    )


def feature_channel_names(channel_names, freqs_hz=DEFAULT_FREQS_HZ):
    """Names of the morlet feature channels, matching the tensor ordering."""
    return [f"{ch}@{f:g}Hz" for ch in channel_names for f in freqs_hz]
