"""Cue-sequence generation for the arrow-cue task paradigm.

Each trial runs fixation -> cue (1 s) -> task (3 s) -> break (3 s); classes
are balanced and seeded-shuffled with a run-length cap so no class repeats
more than three times in a row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..signal_core.types import ParameterError

FIXATION_S = 2.0
CUE_S = 1.0
TASK_S = 3.0
BREAK_S = 3.0
MAX_RUN = 3


@dataclass(frozen=True)
class CueSchedule:
    """Ordered (class, cue_onset_s) pairs plus the phase durations."""

    entries: tuple                    # of (class_name, cue_onset_s)
    fixation_s: float = FIXATION_S
    cue_s: float = CUE_S
    task_s: float = TASK_S
    break_s: float = BREAK_S
    seed: int = 0

    def __post_init__(self):
        onsets = [onset for _, onset in self.entries]
        spacing = self.cue_s + self.task_s + self.break_s
        for first, second in zip(onsets, onsets[1:]):
            if second - first < spacing - 1e-9:
                raise ParameterError("cue onsets spaced closer than one trial")

    @property
    def n_trials(self) -> int:
        return len(self.entries)

    @property
    def classes(self) -> tuple:
        return tuple(sorted({cls for cls, _ in self.entries}))

    @property
    def trial_s(self) -> float:
        return self.fixation_s + self.cue_s + self.task_s + self.break_s

    @property
    def duration_s(self) -> float:
        if not self.entries:
            return 0.0
        return self.entries[-1][1] + self.cue_s + self.task_s + self.break_s

    def task_onsets(self):
        """(class, task_onset_s) pairs: the moment imagery starts."""
        return [(cls, onset + self.cue_s) for cls, onset in self.entries]


def _cap_runs(order: list, rng: np.random.Generator, max_run: int) -> list:
    """Break runs longer than max_run by swapping in a later different item."""
    order = list(order)
    for _ in range(10 * len(order)):
        run_start, violation = 0, None
        for i in range(1, len(order) + 1):
            if i == len(order) or order[i] != order[run_start]:
                if i - run_start > max_run:
                    violation = run_start + max_run
                    break
                run_start = i
        if violation is None:
            return order
        candidates = [j for j in range(len(order))
                      if order[j] != order[violation]
                      and (j == 0 or order[j - 1] != order[violation])
                      and (j + 1 >= len(order) or order[j + 1] != order[violation])]
        if not candidates:
            return order
        swap = candidates[int(rng.integers(len(candidates)))]
        order[violation], order[swap] = order[swap], order[violation]
    return order


def generate_cue_sequence(classes, n_per_class: int, seed: int = 0) -> CueSchedule:
    """Balanced, seeded-random cue order with runs capped at three."""
    if n_per_class < 1:
        raise ParameterError("n_per_class must be >= 1")
    classes = sorted(classes)  # schedule depends on the set, not input order
    if len(set(classes)) != len(classes) or not classes:
        raise ParameterError("classes must be unique and non-empty")

    rng = np.random.default_rng(seed)
    order = classes * n_per_class
    rng.shuffle(order)
    if len(classes) > 1:
        order = _cap_runs(order, rng, MAX_RUN)

    trial = FIXATION_S + CUE_S + TASK_S + BREAK_S
    entries = tuple((cls, FIXATION_S + i * trial) for i, cls in enumerate(order))
    return CueSchedule(entries=entries, seed=seed)


def schedule_markers(schedule: CueSchedule):
    """Markers the paradigm emits: cue onset and task onset per trial."""
    from ..signal_core.types import Marker

    markers = []
    for cls, cue_onset in schedule.entries:
        markers.append(Marker(cue_onset, f"cue:{cls}"))
        markers.append(Marker(cue_onset + schedule.cue_s, f"task:{cls}"))
    return markers


def task_mapping(classes) -> dict:
    """The mapping-file content for schedules built by this module."""
    return {f"task:{cls}": cls for cls in classes}
