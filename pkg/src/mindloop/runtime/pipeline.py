"""The online pipeline: source -> preprocess -> classify -> transfer.

Each stage is an independent thread owning its mutable state, connected by
bounded drop-oldest channels (the source is never blocked). Messages carry
monotonic stage timestamps; the transfer stage completes each record in the
latency ledger and publishes ControlFrames for the console, the game
harness and any other subscriber.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field

import numpy as np
import torch

from ..classify.bundle import ModelBundle
from ..config import PipelineConfig
from ..features.csp import csp_transform_array
from ..features.morlet import morlet_power
from ..features.windows import stack_features
from ..signal_core.artifacts import AsrModel, asr_process
from ..signal_core.filters import apply_filter, design_bandpass
from ..signal_core.preprocess import common_average_reference
from ..signal_core.types import EpochSet, Marker, SampleChunk, SignalError
from .channels import Bus, Closed, Empty
from .latency import LatencyLedger
from .transfer import TransferState, default_transfer_config, transfer_step

log = logging.getLogger(__name__)

TOPIC_RAW = "raw"
TOPIC_PREPROCESSED = "preprocessed"
TOPIC_FEATURES = "features"
TOPIC_PROBS = "probs"
TOPIC_CONTROL = "control"
TOPIC_MARKERS = "markers"


class StartupError(SignalError):
    """Pipeline cannot be assembled (model/montage mismatch, bad config)."""


@dataclass
class StageMessage:
    """Payload plus the monotonic timestamps appended by each stage so far."""

    kind: str
    payload: object
    stream_time: float
    stamps: dict = field(default_factory=dict)
    compute: dict = field(default_factory=dict)

    def stamped(self, stage: str, started: float) -> "StageMessage":
        now = time.monotonic()
        self.stamps[stage] = now
        self.compute[stage] = now - started
        return self


class _Stage(threading.Thread):
    def __init__(self, name: str, handle: "PipelineHandle"):
        super().__init__(name=f"mindloop-{name}", daemon=True)
        self.stage_name = name
        self.handle = handle
        self.stop_event = handle.stop_event

    def run(self):
        try:
            self.loop()
        except Exception:
            log.exception("stage %s crashed", self.stage_name)
            self.handle.stop_event.set()

    def loop(self):
        raise NotImplementedError


class SourceStage(_Stage):
    """Paces the source's events into the raw topic; never blocks on
    downstream consumers."""

    def __init__(self, handle, source):
        super().__init__("source", handle)
        self.source = source

    def loop(self):
        factor = self.source.realtime_factor
        raw = self.handle.bus.topic(TOPIC_RAW)
        markers = self.handle.bus.topic(TOPIC_MARKERS)
        wall_start = time.monotonic()
        stream_start = None
        for kind, payload in self.source.events():
            if self.stop_event.is_set():
                break
            stream_time = (payload.start_timestamp if kind == "chunk"
                           else payload.timestamp)
            if stream_start is None:
                stream_start = stream_time
            if factor > 0:
                target = wall_start + (stream_time - stream_start) / factor
                delay = target - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
            if kind == "chunk":
                message = StageMessage(kind="raw_chunk", payload=payload,
                                       stream_time=stream_time)
                message.stamps["acquisition"] = time.monotonic()
                raw.publish(message)
            else:
                markers.publish(payload)
                self.handle.session_markers.append(payload)
        self.handle.source_done.set()


class PreprocessStage(_Stage):
    """Streaming bandpass -> ASR windows -> CAR -> normalization."""

    def __init__(self, handle):
        super().__init__("preprocess", handle)
        config = handle.config
        bp = config.bandpass
        montage = handle.source_montage
        self.filter_state = design_bandpass(
            bp.low_hz, bp.high_hz, bp.order, bp.stopband_db,
            montage.sample_rate_hz)
        self.asr: AsrModel | None = handle.asr_model
        self.norm = handle.bundle.norm_stats
        self.montage = montage
        self.window_frames = (self.asr.window_frames if self.asr else
                              int(round(config.asr.window_s * montage.sample_rate_hz)))
        self.pending: list = []
        self.pending_frames = 0
        self.pending_start = 0.0
        self.pending_message: StageMessage | None = None
        self.inbox = handle.bus.topic(TOPIC_RAW).subscribe(
            handle.config.runtime.queue_size)

    def loop(self):
        out = self.handle.bus.topic(TOPIC_PREPROCESSED)
        while not self.stop_event.is_set():
            try:
                message = self.inbox.get(timeout=0.05)
            except Empty:
                continue
            except Closed:
                break
            started = time.monotonic()
            chunk: SampleChunk = message.payload
            filtered = apply_filter(self.filter_state, chunk)
            for window, start_time in self._windows(filtered, message):
                if self.asr is not None:
                    window = asr_process(self.asr, window)
                window = common_average_reference(window)
                normalized = self.norm.apply(window.samples)
                out_msg = StageMessage(
                    kind="preprocessed_chunk",
                    payload=SampleChunk(normalized, start_time, window.montage),
                    stream_time=start_time,
                    stamps=dict(self.pending_message.stamps),
                    compute=dict(self.pending_message.compute),
                )
                out.publish(out_msg.stamped("preprocessing", started))

    def _windows(self, chunk: SampleChunk, message: StageMessage):
        """Group filtered chunks into fixed ASR-window-sized blocks."""
        if not self.pending:
            self.pending_start = chunk.start_timestamp
        self.pending.append(chunk.samples)
        self.pending_frames += chunk.n_frames
        self.pending_message = message
        fs = self.montage.sample_rate_hz
        while self.pending_frames >= self.window_frames:
            block = np.concatenate(self.pending, axis=1)
            window = block[:, :self.window_frames]
            rest = block[:, self.window_frames:]
            start = self.pending_start
            self.pending = [rest] if rest.shape[1] else []
            self.pending_frames = rest.shape[1]
            self.pending_start = start + self.window_frames / fs
            yield SampleChunk(window, start, chunk.montage), start


class ClassifyStage(_Stage):
    """Windows the preprocessed stream and classifies each window."""

    def __init__(self, handle):
        super().__init__("classify", handle)
        config = handle.config
        bundle = handle.bundle
        fs = handle.source_montage.sample_rate_hz
        self.fs = fs
        self.window_frames = int(round(bundle.features.window_s * fs))
        self.hop_frames = max(1, int(round(config.runtime.hop_s * fs)))
        self.warmup_s = config.runtime.warmup_s
        self.bundle = bundle
        self.model = bundle.build_model() if bundle.kind == "s4d" else None
        self.stream = np.zeros((handle.source_montage.n_channels, 0))
        self.stream_start_frame = 0     # absolute index of stream[:, 0]
        self.stream_t0 = None           # stream time of absolute frame 0
        self.next_window_end = self.window_frames
        self.inbox = handle.bus.topic(TOPIC_PREPROCESSED).subscribe(
            handle.config.runtime.queue_size)

    def loop(self):
        features_out = self.handle.bus.topic(TOPIC_FEATURES)
        probs_out = self.handle.bus.topic(TOPIC_PROBS)
        while not self.stop_event.is_set():
            try:
                message = self.inbox.get(timeout=0.05)
            except Empty:
                continue
            except Closed:
                break
            started = time.monotonic()
            chunk: SampleChunk = message.payload
            if self.stream_t0 is None:
                self.stream_t0 = (chunk.start_timestamp
                                  - self.stream_start_frame / self.fs)
            self.stream = np.concatenate([self.stream, chunk.samples], axis=1)
            stream_end = self.stream_start_frame + self.stream.shape[1]

            # One window per hop boundary, each shifted by exactly hop_frames.
            while self.next_window_end <= stream_end:
                lo = self.next_window_end - self.window_frames - self.stream_start_frame
                hi = self.next_window_end - self.stream_start_frame
                window = self.stream[:, lo:hi]
                end_time = self.stream_t0 + self.next_window_end / self.fs
                self.next_window_end += self.hop_frames
                if end_time < self.warmup_s:
                    continue
                features = self._features(window)
                features_out.publish(StageMessage(
                    kind="feature_window", payload=features,
                    stream_time=end_time,
                    stamps=dict(message.stamps), compute=dict(message.compute)))
                probs = self._classify(features)
                out = StageMessage(
                    kind="class_probs", payload=probs,
                    stream_time=end_time,
                    stamps=dict(message.stamps),
                    compute=dict(message.compute))
                probs_out.publish(out.stamped("classification", started))

            keep_from = self.next_window_end - self.window_frames
            if keep_from > self.stream_start_frame:
                cut = keep_from - self.stream_start_frame
                self.stream = self.stream[:, cut:]
                self.stream_start_frame = keep_from

    def _features(self, window: np.ndarray) -> np.ndarray:
        fcfg = self.bundle.features
        epoch_set = EpochSet(
            epochs=window[None],
            labels=np.zeros(1, dtype=np.int64),
            class_names=self.bundle.class_names,
            sample_rate_hz=self.fs,
            channel_names=tuple(self.bundle.montage.channel_names),
            tmin=0.0, tmax=window.shape[1] / self.fs)
        morlet = morlet_power(epoch_set, fcfg.freqs_hz, fcfg.n_cycles,
                              fcfg.time_decim)
        csp_block = (csp_transform_array(self.bundle.csp, window[None])
                     if fcfg.use_csp else None)
        return stack_features(morlet, csp_block).data[0]

    def _classify(self, features: np.ndarray) -> np.ndarray:
        if self.model is not None:
            # Window-level inference: the bidirectional model consumes the
            # whole buffered window, so the kernel/conv path applies online
            # too (the stepped recurrence is its tested equivalent).
            with torch.no_grad():
                probs = self.model.probabilities(
                    torch.from_numpy(features[None]), mode="conv")
            return probs.numpy()[0]
        pooled = features.mean(axis=1)[None]
        baseline = self.bundle.baseline
        if hasattr(baseline, "predict_proba"):
            return baseline.predict_proba(pooled)[0]
        label = int(baseline.predict(pooled)[0])
        probs = np.full(len(self.bundle.class_names), 0.0)
        probs[label] = 1.0
        return probs


class TransferStage(_Stage):
    """Applies the transfer function and completes the latency record."""

    def __init__(self, handle):
        super().__init__("transfer", handle)
        self.state = TransferState()
        self.inbox = handle.bus.topic(TOPIC_PROBS).subscribe(
            handle.config.runtime.queue_size)

    def loop(self):
        out = self.handle.bus.topic(TOPIC_CONTROL)
        while not self.stop_event.is_set():
            try:
                message = self.inbox.get(timeout=0.05)
            except Empty:
                continue
            except Closed:
                break
            started = time.monotonic()
            config = self.handle.transfer_config  # atomic snapshot per tick
            self.state, frame = transfer_step(self.state, config,
                                              message.payload,
                                              timestamp=message.stream_time)
            message = message.stamped("transfer", started)
            out.publish(StageMessage(kind="control_frame", payload=frame,
                                     stream_time=message.stream_time,
                                     stamps=message.stamps,
                                     compute=message.compute))
            try:
                self.handle.ledger.record(message.stamps, message.compute)
            except Exception:
                log.exception("latency record dropped")


@dataclass
class PipelineHandle:
    """Owns the bus, the stages, shared config and the session marker log."""

    bundle: ModelBundle
    config: PipelineConfig
    source_montage: object
    asr_model: AsrModel | None
    bus: Bus
    ledger: LatencyLedger = field(default_factory=LatencyLedger)
    stop_event: threading.Event = field(default_factory=threading.Event)
    source_done: threading.Event = field(default_factory=threading.Event)
    session_markers: list = field(default_factory=list)
    stages: list = field(default_factory=list)
    _transfer_lock: threading.Lock = field(default_factory=threading.Lock)

    def __post_init__(self):
        self.transfer_config = default_transfer_config(
            self.bundle.class_names, self.config.transfer)

    def start(self) -> None:
        for stage in self.stages:
            stage.start()

    def stop(self, timeout: float = 2.0) -> bool:
        """Signal all stages and join them; True if everything exited."""
        self.stop_event.set()
        self.bus.close()
        deadline = time.monotonic() + timeout
        for stage in self.stages:
            stage.join(max(0.0, deadline - time.monotonic()))
        return not any(stage.is_alive() for stage in self.stages)

    def wait_source_done(self, timeout: float | None = None) -> bool:
        return self.source_done.wait(timeout)

    def drain(self, settle_s: float = 0.2, timeout: float = 10.0) -> None:
        """Wait for the source to finish and queued work to flush."""
        self.wait_source_done(timeout)
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            before = len(self.ledger)
            time.sleep(settle_s)
            if len(self.ledger) == before:
                return

    def update_threshold(self, cls: str, value: float) -> None:
        with self._transfer_lock:
            self.transfer_config = self.transfer_config.with_threshold(cls, value)

    def update_mapping(self, cls: str, action: str) -> None:
        with self._transfer_lock:
            self.transfer_config = self.transfer_config.with_mapping(cls, action)

    def inject_marker(self, marker: Marker) -> None:
        self.session_markers.append(marker)
        self.bus.topic(TOPIC_MARKERS).publish(marker)

    def subscribe_control(self, maxsize: int = 256):
        return self.bus.topic(TOPIC_CONTROL).subscribe(maxsize)

    def subscribe_markers(self, maxsize: int = 256):
        return self.bus.topic(TOPIC_MARKERS).subscribe(maxsize)

    def dropped_counts(self) -> dict:
        return self.bus.dropped_counts()

    def config_snapshot(self) -> dict:
        config = self.transfer_config
        return {
            "type": "config",
            "thresholds": dict(config.thresholds),
            "mapping": dict(config.mapping),
            "buffer_len": config.buffer_len,
        }


def build_pipeline(bundle: ModelBundle, source, config: PipelineConfig,
                   asr_model: AsrModel | None = None) -> PipelineHandle:
    """Wire the four stages around a loaded bundle and a stream source.

    Raises StartupError when the source montage does not match the montage
    the model bundle was trained for.
    """
    montage = source.montage
    if list(montage.channel_names) != list(bundle.montage.channel_names):
        raise StartupError(
            f"source channels {list(montage.channel_names)} do not match "
            f"bundle channels {list(bundle.montage.channel_names)}")
    if abs(montage.sample_rate_hz - bundle.montage.sample_rate_hz) > 1e-9:
        raise StartupError("source sample rate does not match bundle")
    if bundle.norm_stats.mean.shape[0] != montage.n_channels:
        raise StartupError("bundle normalization stats do not match montage")

    handle = PipelineHandle(
        bundle=bundle, config=config, source_montage=montage,
        asr_model=asr_model, bus=Bus(config.runtime.queue_size))
    handle.stages = [
        SourceStage(handle, source),
        PreprocessStage(handle),
        ClassifyStage(handle),
        TransferStage(handle),
    ]
    return handle
