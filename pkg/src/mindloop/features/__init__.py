"""Morlet + CSP feature extraction, windowing and stratified splitting."""

from .tensor import FeatureTensor, pool_time
from .morlet import (
    DEFAULT_FREQS_HZ,
    DEFAULT_N_CYCLES,
    DEFAULT_TIME_DECIM,
    feature_channel_names,
    morlet_power,
    morlet_wavelet,
)
from .csp import CspFitError, CspModel, csp_fit, csp_transform, csp_transform_array
from .windows import (
    DEFAULT_STRIDE_S,
    DEFAULT_WINDOW_S,
    split_epochs,
    stack_features,
    stratified_split,
    window_epochs,
    window_frame_counts,
)

__all__ = [
    "CspFitError",
    "CspModel",
    "DEFAULT_FREQS_HZ",
    "DEFAULT_N_CYCLES",
    "DEFAULT_STRIDE_S",
    "DEFAULT_TIME_DECIM",
    "DEFAULT_WINDOW_S",
    "FeatureTensor",
    "csp_fit",
    "csp_transform",
    "csp_transform_array",
    "feature_channel_names",
    "morlet_power",
    "morlet_wavelet",
    "pool_time",
    "split_epochs",
    "stack_features",
    "stratified_split",
    "window_epochs",
    "window_frame_counts",
]
