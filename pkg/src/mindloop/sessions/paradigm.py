"""Paradigm execution: stream a source into a recording while emitting the
schedule's markers (and forwarding cues to any attached display)."""

from __future__ import annotations

import logging

import numpy as np

from ..signal_core.io import save_recording
from ..signal_core.types import Marker, Recording, SignalError
from .cues import CueSchedule, schedule_markers

log = logging.getLogger(__name__)

CALIBRATION_START = "calibration:start"
CALIBRATION_END = "calibration:end"


class SourceStarvation(SignalError):
    """The source ended before the schedule did; partial data preserved."""

    def __init__(self, message, partial: Recording | None = None):
        super().__init__(message)
        self.partial = partial


def run_paradigm(schedule: CueSchedule, source, sink_path=None,
                 cue_callback=None, session_id: str = "") -> Recording:
    """Record the source for the schedule's duration, injecting markers.

    ``cue_callback(class_name, duration_ms)`` is invoked at every cue onset
    (hook for the console/game display). When the source ends early a
    SourceStarvation error carries (and, given ``sink_path``, saves) the
    partial recording.
    """
    pending = sorted(schedule_markers(schedule), key=lambda m: m.timestamp)
    emitted: list[Marker] = []
    blocks = []
    frames = 0
    montage = source.montage
    fs = montage.sample_rate_hz
    needed = int(round(schedule.duration_s * fs))

    def flush_markers(up_to: float):
        while pending and pending[0].timestamp <= up_to:
            marker = pending.pop(0)
            emitted.append(marker)
            if cue_callback is not None and marker.label.startswith("cue:"):
                cue_callback(marker.label.split(":", 1)[1],
                             int(schedule.task_s * 1000))

    for kind, payload in source.events():
        if kind != "chunk":
            continue
        flush_markers(payload.start_timestamp)
        blocks.append(payload.samples)
        frames += payload.n_frames
        if frames >= needed:
            break
    flush_markers(frames / fs)

    recording = None
    if blocks:
        samples = np.concatenate(blocks, axis=1)[:, :needed]
        in_span = [m for m in emitted if m.timestamp <= samples.shape[1] / fs]
        recording = Recording(montage=montage, samples=samples,
                              markers=in_span, session_id=session_id)
    if frames < needed:
        if recording is not None and sink_path is not None:
            save_recording(recording, sink_path)
            log.warning("source starved; partial recording saved to %s", sink_path)
        raise SourceStarvation(
            f"source delivered {frames / fs:.1f}s of {schedule.duration_s:.1f}s",
            partial=recording)

    if sink_path is not None:
        save_recording(recording, sink_path)
    return recording


def run_calibration(source, duration_s: float = 60.0,
                    session_id: str = "calibration") -> Recording:
    """Record rest data bracketed by a single calibration marker pair."""
    fs = source.montage.sample_rate_hz
    needed = int(round(duration_s * fs))
    blocks, frames = [], 0
    for kind, payload in source.events():
        if kind != "chunk":
            continue
        blocks.append(payload.samples)
        frames += payload.n_frames
        if frames >= needed:
            break
    if frames < needed:
        raise SourceStarvation(
            f"calibration needs {duration_s}s, source gave {frames / fs:.1f}s")
    samples = np.concatenate(blocks, axis=1)[:, :needed]
    markers = [Marker(0.0, CALIBRATION_START),
               Marker(duration_s - 1.0 / fs, CALIBRATION_END)]
    return Recording(montage=source.montage, samples=samples, markers=markers,
                     session_id=session_id)
