"""Raw-signal domain types and the preprocessing chain (offline and streaming)."""

from .types import (
    CAP_24,
    DataQualityError,
    EpochSet,
    Marker,
    Montage,
    ParameterError,
    Recording,
    SampleChunk,
    ShapeError,
    SignalError,
)
from .filters import (
    FilterDesignError,
    FilterState,
    apply_filter,
    design_bandpass,
    filter_recording_samples,
    frequency_response,
    measure_group_delay,
)
from .artifacts import (
    AsrModel,
    RejectionCriteria,
    asr_calibrate,
    asr_process,
    asr_process_recording,
    reject_channels,
)
from .preprocess import (
    NormStats,
    car_recording,
    common_average_reference,
    crop_head,
    epoch_and_baseline,
    normalize_epochs,
)
from .io import (
    RecordingFormatError,
    load_mapping,
    load_recording,
    save_mapping,
    save_recording,
)

__all__ = [
    "CAP_24",
    "AsrModel",
    "DataQualityError",
    "EpochSet",
    "FilterDesignError",
    "FilterState",
    "Marker",
    "Montage",
    "NormStats",
    "ParameterError",
    "Recording",
    "RecordingFormatError",
    "RejectionCriteria",
    "SampleChunk",
    "ShapeError",
    "SignalError",
    "apply_filter",
    "asr_calibrate",
    "asr_process",
    "asr_process_recording",
    "car_recording",
    "common_average_reference",
    "crop_head",
    "design_bandpass",
    "epoch_and_baseline",
    "filter_recording_samples",
    "frequency_response",
    "load_mapping",
    "load_recording",
    "measure_group_delay",
    "normalize_epochs",
    "reject_channels",
    "save_mapping",
    "save_recording",
]
