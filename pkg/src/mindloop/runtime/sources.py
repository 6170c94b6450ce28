"""Stream sources: file replay and any generator-backed producer.

A source exposes ``montage``, ``realtime_factor`` and ``events()``, a
generator yielding ("chunk", SampleChunk) and ("marker", Marker) in
stream-time order. Pacing is applied by the pipeline's source stage so
tests can consume sources directly at full speed.
"""

from __future__ import annotations

import numpy as np

from ..signal_core.io import load_recording
from ..signal_core.types import Marker, Montage, Recording, SampleChunk

DEFAULT_CHUNK_FRAMES = 25


class ReplaySource:
    """Replays a recording as timestamped chunks with markers in-band."""

    def __init__(self, recording: Recording, realtime_factor: float = 1.0,
                 chunk_frames: int = DEFAULT_CHUNK_FRAMES):
        if chunk_frames < 1:
            raise ValueError("chunk_frames must be >= 1")
        if realtime_factor < 0:
            raise ValueError("realtime_factor must be >= 0 (0 = unpaced)")
        self.recording = recording
        self.realtime_factor = realtime_factor
        self.chunk_frames = chunk_frames

    @property
    def montage(self) -> Montage:
        return self.recording.montage

    def events(self):
        fs = self.recording.montage.sample_rate_hz
        samples = self.recording.samples
        markers = list(self.recording.markers)
        next_marker = 0
        for start in range(0, samples.shape[1], self.chunk_frames):
            t0 = start / fs
            while next_marker < len(markers) and markers[next_marker].timestamp <= t0:
                yield "marker", markers[next_marker]
                next_marker += 1
            block = samples[:, start:start + self.chunk_frames]
            yield "chunk", SampleChunk(block, t0, self.recording.montage)
        for marker in markers[next_marker:]:
            yield "marker", marker


def open_replay(recording_path, realtime_factor: float = 1.0,
                chunk_frames: int = DEFAULT_CHUNK_FRAMES) -> ReplaySource:
    """Open a recording file as a paced stream source."""
    return ReplaySource(load_recording(recording_path), realtime_factor,
                        chunk_frames)


def concat_chunks(source) -> np.ndarray:
    """All chunk samples of a source concatenated (test/diagnostic helper)."""
    blocks = [payload.samples for kind, payload in source.events()
              if kind == "chunk"]
    return np.concatenate(blocks, axis=1)
