"""Experiment orchestration: cue schedules, synthetic EEG, paradigm, training."""

from .cues import (
    CueSchedule,
    generate_cue_sequence,
    schedule_markers,
    task_mapping,
)
from .synth import ClassSignature, SynthConfig, SynthEngine, SynthSource, synth_generate
from .paradigm import (
    CALIBRATION_END,
    CALIBRATION_START,
    SourceStarvation,
    run_calibration,
    run_paradigm,
)
from .offline import (
    StageFailure,
    TrainArtifacts,
    format_confusion,
    save_artifacts,
    train_from_recordings,
)

__all__ = [
    "CALIBRATION_END",
    "CALIBRATION_START",
    "ClassSignature",
    "CueSchedule",
    "SourceStarvation",
    "StageFailure",
    "SynthConfig",
    "SynthEngine",
    "SynthSource",
    "TrainArtifacts",
    "format_confusion",
    "generate_cue_sequence",
    "run_calibration",
    "run_paradigm",
    "save_artifacts",
    "schedule_markers",
    "synth_generate",
    "task_mapping",
    "train_from_recordings",
]
