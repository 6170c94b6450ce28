"""Transfer function: smoothed class probabilities to game-control signals.

A rolling buffer averages the classifier's probability stream (downsampling
and smoothing it); the winning class, if above its threshold, drives one of
the mapped actions: proportional continuous axes (X/Y in [-1, 1]) or binary
accumulators that pulse A/B when full. Everything not actively driven
decays linearly toward rest.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from ..signal_core.types import ParameterError

CONTINUOUS_ACTIONS = ("x_neg", "x_pos", "y_neg", "y_pos")
ACTIONS = CONTINUOUS_ACTIONS + ("neutral", "bin_a", "bin_b")


@dataclass(frozen=True)
class TransferConfig:
    """Mapping, thresholds and dynamics of the transfer function."""

    class_names: tuple
    mapping: dict                      # class name -> action
    thresholds: dict                   # class name -> theta in (1/3, 1]
    buffer_len: int = 10
    delta_up: float = 0.2
    delta_down: float = 0.1

    def __post_init__(self):
        if self.buffer_len < 1:
            raise ParameterError("buffer_len must be >= 1")
        if set(self.mapping) != set(self.class_names):
            raise ParameterError(
                f"mapping must cover every class exactly once; classes "
                f"{self.class_names}, mapped {sorted(self.mapping)}")
        for cls, action in self.mapping.items():
            if action not in ACTIONS:
                raise ParameterError(f"unknown action {action!r} for {cls!r}")
        chance = 1.0 / len(self.class_names)
        for cls in self.class_names:
            theta = self.thresholds.get(cls)
            if theta is None:
                raise ParameterError(f"missing threshold for class {cls!r}")
            if not chance < theta <= 1.0:
                raise ParameterError(
                    f"threshold for {cls!r} must lie in ({chance:.3f}, 1]")
        if not (0 < self.delta_up <= 1 and 0 < self.delta_down <= 1):
            raise ParameterError("delta_up/delta_down must lie in (0, 1]")

    def with_threshold(self, cls: str, value: float) -> "TransferConfig":
        thresholds = dict(self.thresholds)
        if cls not in thresholds:
            raise ParameterError(f"unknown class {cls!r}")
        thresholds[cls] = value
        return replace(self, thresholds=thresholds)

    def with_mapping(self, cls: str, action: str) -> "TransferConfig":
        mapping = dict(self.mapping)
        if cls not in mapping:
            raise ParameterError(f"unknown class {cls!r}")
        mapping[cls] = action
        return replace(self, mapping=mapping)


@dataclass
class ControlFrame:
    """One output tick of the transfer function."""

    x: float
    y: float
    a: bool
    b: bool
    a_fill: float
    b_fill: float
    probs: np.ndarray
    label: str
    timestamp: float

    def to_wire(self) -> dict:
        return {
            "type": "control",
            "x": self.x, "y": self.y,
            "a": self.a, "b": self.b,
            "a_fill": self.a_fill, "b_fill": self.b_fill,
            "probs": [float(p) for p in self.probs],
            "label": self.label,
            "ts": self.timestamp,
        }


@dataclass
class TransferState:
    """Rolling probability buffer plus the continuous/binary accumulators."""

    buffer: deque = field(default_factory=deque)
    x: float = 0.0
    y: float = 0.0
    a_fill: float = 0.0
    b_fill: float = 0.0
    last_frame: ControlFrame | None = None

    def reset(self) -> None:
        self.buffer.clear()
        self.x = self.y = 0.0
        self.a_fill = self.b_fill = 0.0
        self.last_frame = None


def _decay(value: float, step: float) -> float:
    if value > 0:
        return max(0.0, value - step)
    return min(0.0, value + step)


def transfer_step(state: TransferState, config: TransferConfig,
                  probs: np.ndarray, timestamp: float = 0.0):
    """Advance one tick; returns ``(state, ControlFrame)``.

    Threshold-crossing continuous actions set their axis to
    sign * (p - theta) / (1 - theta); binary actions charge their
    accumulator by delta_up; everything else decays by delta_down. A full
    accumulator emits a single-tick pulse and resets.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape != (len(config.class_names),):
        raise ParameterError("probability vector does not match class count")
    if abs(float(probs.sum()) - 1.0) > 1e-6 or np.any(probs < -1e-12):
        raise ParameterError("probabilities must lie on the simplex")

    state.buffer.append(probs)
    while len(state.buffer) > config.buffer_len:
        state.buffer.popleft()
    smoothed = np.mean(state.buffer, axis=0)
    winner = int(np.argmax(smoothed))
    label = config.class_names[winner]
    theta = config.thresholds[label]
    action = config.mapping[label] if smoothed[winner] >= theta else None

    down = config.delta_down
    drive = {"x": None, "y": None, "a": False, "b": False}
    if action in CONTINUOUS_ACTIONS:
        axis = action[0]
        sign = 1.0 if action.endswith("pos") else -1.0
        magnitude = (smoothed[winner] - theta) / (1.0 - theta) if theta < 1.0 else 1.0
        drive[axis] = float(np.clip(sign * magnitude, -1.0, 1.0))
    elif action == "bin_a":
        drive["a"] = True
    elif action == "bin_b":
        drive["b"] = True
    # action None (below threshold) or "neutral": everything decays.

    state.x = drive["x"] if drive["x"] is not None else _decay(state.x, down)
    state.y = drive["y"] if drive["y"] is not None else _decay(state.y, down)
    state.a_fill = min(1.0, state.a_fill + config.delta_up) if drive["a"] \
        else max(0.0, state.a_fill - down)
    state.b_fill = min(1.0, state.b_fill + config.delta_up) if drive["b"] \
        else max(0.0, state.b_fill - down)

    pulse_a = state.a_fill >= 1.0
    pulse_b = state.b_fill >= 1.0
    frame = ControlFrame(
        x=state.x, y=state.y, a=pulse_a, b=pulse_b,
        a_fill=state.a_fill, b_fill=state.b_fill,
        probs=smoothed, label=label, timestamp=timestamp,
    )
    if pulse_a:
        state.a_fill = 0.0
    if pulse_b:
        state.b_fill = 0.0
    state.last_frame = frame
    return state, frame


def default_transfer_config(class_names, settings) -> TransferConfig:
    """Build a TransferConfig from TransferSettings, filling in defaults for
    classes the settings do not name."""
    class_names = tuple(class_names)
    mapping = dict(settings.mapping)
    fallback_actions = [a for a in CONTINUOUS_ACTIONS + ("neutral",)]
    for i, cls in enumerate(class_names):
        mapping.setdefault(cls, fallback_actions[i % len(fallback_actions)])
    mapping = {cls: mapping[cls] for cls in class_names}
    thresholds = {cls: settings.thresholds.get(cls, settings.default_threshold)
                  for cls in class_names}
    return TransferConfig(
        class_names=class_names,
        mapping=mapping,
        thresholds=thresholds,
        buffer_len=settings.buffer_len,
        delta_up=settings.delta_up,
        delta_down=settings.delta_down,
    )
