"""Headless quick-time-event harness.

Mirrors the training game's accumulator against the live pipeline: at every
task cue, control frames matching the cued class (and above its threshold)
charge a bar by delta_up; mismatches decay it by delta_down. The bar
reaching 1 within the deadline counts as a success. All timing uses the
stream clock, so unpaced (factor 0) replays score identically to real time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class QteTrial:
    cue_class: str
    onset: float
    deadline: float
    bar: float = 0.0
    success: bool = False
    done: bool = False
    resolved_at: float | None = None


@dataclass
class QteResult:
    trials: list

    @property
    def n_trials(self) -> int:
        return len(self.trials)

    @property
    def n_success(self) -> int:
        return sum(t.success for t in self.trials)

    @property
    def success_rate(self) -> float:
        return self.n_success / self.n_trials if self.trials else 0.0

    def per_class(self) -> dict:
        table: dict = {}
        for trial in self.trials:
            entry = table.setdefault(trial.cue_class, {"success": 0, "total": 0})
            entry["total"] += 1
            entry["success"] += int(trial.success)
        return table


@dataclass
class QteHarness:
    """Feed markers and control frames in stream-time order; read results."""

    cue_map: dict                    # marker label -> class name
    thresholds: dict                 # class name -> theta
    window_s: float = 3.0
    delta_up: float = 0.2
    delta_down: float = 0.1
    trials: list = field(default_factory=list)
    _active: QteTrial | None = None

    def on_marker(self, marker) -> None:
        cue_class = self.cue_map.get(marker.label)
        if cue_class is None:
            return
        self._finish_active(at=marker.timestamp)
        self._active = QteTrial(cue_class=cue_class, onset=marker.timestamp,
                                deadline=marker.timestamp + self.window_s)
        self.trials.append(self._active)

    def on_frame(self, frame) -> None:
        trial = self._active
        if trial is None or trial.done:
            return
        if frame.timestamp >= trial.deadline:
            self._finish_active(at=frame.timestamp)
            return
        if frame.timestamp < trial.onset:
            return
        theta = self.thresholds.get(trial.cue_class, 0.5)
        matched = frame.label == trial.cue_class
        prob = float(np.max(frame.probs)) if matched else 0.0
        if matched and prob >= theta:
            trial.bar = min(1.0, trial.bar + self.delta_up)
        else:
            trial.bar = max(0.0, trial.bar - self.delta_down)
        if trial.bar >= 1.0:
            trial.success = True
            trial.done = True
            trial.resolved_at = frame.timestamp
            self._active = None

    def _finish_active(self, at: float) -> None:
        if self._active is not None and not self._active.done:
            self._active.done = True
            self._active.resolved_at = at
            self._active = None

    def finish(self) -> QteResult:
        self._finish_active(at=float("inf"))
        return QteResult(trials=list(self.trials))


def run_scripted_qte(handle, cue_map: dict, window_s: float = 3.0,
                     marker_queue=None, control_queue=None) -> QteResult:
    """Drive a QteHarness from a running pipeline until the source ends.

    Merges the marker and control streams by stream time (frames already
    arrive in order; markers are re-ordered relative to frames by their
    timestamps). For unpaced (factor 0) sources, subscribe both queues
    BEFORE handle.start() and pass them in, or the burst of early markers
    is missed.
    """
    from .channels import Closed, Empty

    config = handle.transfer_config
    harness = QteHarness(
        cue_map=cue_map,
        thresholds=dict(config.thresholds),
        window_s=window_s,
        delta_up=config.delta_up,
        delta_down=config.delta_down,
    )
    markers = marker_queue or handle.subscribe_markers(maxsize=4096)
    control = control_queue or handle.subscribe_control(maxsize=8192)
    pending_markers: list = []

    def drain_markers():
        while True:
            try:
                pending_markers.append(markers.get(timeout=0.0))
            except (Empty, Closed):
                return

    idle_polls = 0
    while idle_polls < 40:  # ~2 s of silence after the source finished
        drain_markers()
        try:
            message = control.get(timeout=0.05)
        except Closed:
            break
        except Empty:
            if handle.source_done.is_set():
                idle_polls += 1
            continue
        idle_polls = 0
        frame = message.payload
        while pending_markers and pending_markers[0].timestamp <= frame.timestamp:
            harness.on_marker(pending_markers.pop(0))
        harness.on_frame(frame)
    drain_markers()
    for marker in pending_markers:
        harness.on_marker(marker)
    return harness.finish()
