import time

import numpy as np
import pytest

from mindloop.config import PipelineConfig
from mindloop.runtime import (
    Bus,
    DropOldestQueue,
    Empty,
    ReplaySource,
    StartupError,
    build_pipeline,
    concat_chunks,
    open_replay,
)
from mindloop.signal_core import Marker, Montage, Recording, save_recording


def noise_recording(duration_s=6.0, seed=0, markers=()):
    from mindloop.config import MontageSettings

    settings = MontageSettings()
    montage = Montage(tuple(settings.channel_names), settings.sample_rate_hz)
    rng = np.random.default_rng(seed)
    samples = rng.standard_normal((montage.n_channels,
                                   int(duration_s * montage.sample_rate_hz)))
    return Recording(montage=montage, samples=samples, markers=list(markers))


class TestChannels:
    def test_drop_oldest_preserves_order(self):
        queue = DropOldestQueue(maxsize=3)
        for i in range(6):
            queue.put(i)
        assert queue.dropped == 3
        survivors = [queue.get(timeout=0.1) for _ in range(3)]
        assert survivors == [3, 4, 5]

    def test_get_timeout(self):
        queue = DropOldestQueue(maxsize=2)
        with pytest.raises(Empty):
            queue.get(timeout=0.01)

    def test_topic_fanout(self):
        bus = Bus(maxsize=8)
        topic = bus.topic("t")
        a, b = topic.subscribe(), topic.subscribe()
        topic.publish("x")
        assert a.get(timeout=0.1) == "x"
        assert b.get(timeout=0.1) == "x"


class TestReplaySource:
    def test_concatenation_is_bit_exact(self, tmp_path):
        recording = noise_recording(duration_s=2.0)
        path = tmp_path / "r.rec"
        save_recording(recording, path)
        source = open_replay(path, realtime_factor=0.0, chunk_frames=17)
        stored = recording.samples.astype("<f4").astype(np.float64)
        np.testing.assert_array_equal(concat_chunks(source), stored)

    def test_factor_zero_delivers_everything_in_order(self):
        recording = noise_recording(duration_s=1.0,
                                    markers=[Marker(0.5, "task:x")])
        source = ReplaySource(recording, realtime_factor=0.0, chunk_frames=25)
        events = list(source.events())
        chunks = [p for k, p in events if k == "chunk"]
        markers = [p for k, p in events if k == "marker"]
        assert len(chunks) == 10
        starts = [c.start_timestamp for c in chunks]
        assert starts == sorted(starts)
        assert [m.label for m in markers] == ["task:x"]
        # marker arrives before the chunk that starts after it
        order = [(k, getattr(p, "start_timestamp", getattr(p, "timestamp", 0)))
                 for k, p in events]
        marker_pos = next(i for i, (k, _) in enumerate(order) if k == "marker")
        assert order[marker_pos + 1][1] >= 0.5


@pytest.fixture()
def pipeline_config():
    config = PipelineConfig()
    config.asr.enabled = False
    config.runtime.warmup_s = 1.0
    return config


class TestPipeline:
    def test_tick_rate_on_replay(self, mini_bundle, pipeline_config):
        recording = noise_recording(duration_s=6.0)
        source = ReplaySource(recording, realtime_factor=0.0)
        handle = build_pipeline(mini_bundle, source, pipeline_config)
        frames_queue = handle.subscribe_control(maxsize=4096)
        handle.start()
        handle.drain(timeout=30.0)
        assert handle.stop(timeout=2.0)

        frames = []
        while True:
            try:
                frames.append(frames_queue.get(timeout=0.05))
            except Exception:
                break
        # hop 0.1 s, window 1 s, warmup 1 s: ticks from t=1.0s to t=6.0s
        expected = (6.0 - max(pipeline_config.runtime.warmup_s, 1.0)) * 10 + 1
        assert len(frames) == pytest.approx(expected, rel=0.10)
        times = [m.stream_time for m in frames]
        assert times == sorted(times)

    def test_shutdown_joins_within_two_seconds(self, mini_bundle, pipeline_config):
        recording = noise_recording(duration_s=30.0)
        source = ReplaySource(recording, realtime_factor=1.0)
        handle = build_pipeline(mini_bundle, source, pipeline_config)
        handle.start()
        time.sleep(0.5)
        t0 = time.monotonic()
        assert handle.stop(timeout=2.0)
        assert time.monotonic() - t0 < 2.0

    def test_overflow_drops_counted_no_crash(self, mini_bundle, pipeline_config):
        pipeline_config.runtime.queue_size = 4
        recording = noise_recording(duration_s=20.0)
        source = ReplaySource(recording, realtime_factor=0.0)  # 100x+ speed
        handle = build_pipeline(mini_bundle, source, pipeline_config)
        control = handle.subscribe_control(maxsize=2048)
        handle.start()
        handle.wait_source_done(20.0)
        time.sleep(0.5)
        dropped = handle.dropped_counts()
        handle.stop(timeout=2.0)
        assert sum(dropped.values()) > 0
        times = []
        while True:
            try:
                times.append(control.get(timeout=0.05).stream_time)
            except Exception:
                break
        assert times == sorted(times)  # drop-oldest never reorders survivors

    def test_montage_mismatch_is_startup_error(self, mini_bundle, pipeline_config):
        montage = Montage(("A", "B", "C"), 250.0)
        recording = Recording(montage=montage, samples=np.zeros((3, 500)))
        with pytest.raises(StartupError):
            build_pipeline(mini_bundle, ReplaySource(recording, 0.0),
                           pipeline_config)

    def test_replay_pacing_wall_clock(self, mini_bundle, pipeline_config):
        recording = noise_recording(duration_s=2.0)
        source = ReplaySource(recording, realtime_factor=1.0)
        handle = build_pipeline(mini_bundle, source, pipeline_config)
        t0 = time.monotonic()
        handle.start()
        assert handle.wait_source_done(10.0)
        elapsed = time.monotonic() - t0
        handle.stop(timeout=2.0)
        assert elapsed == pytest.approx(2.0, abs=0.4)

    def test_threshold_update_applies_between_ticks(self, mini_bundle,
                                                    pipeline_config):
        recording = noise_recording(duration_s=3.0)
        handle = build_pipeline(mini_bundle,
                                ReplaySource(recording, realtime_factor=0.0),
                                pipeline_config)
        handle.update_threshold("left", 0.9)
        assert handle.transfer_config.thresholds["left"] == 0.9
        snapshot = handle.config_snapshot()
        assert snapshot["type"] == "config"
        assert snapshot["thresholds"]["left"] == 0.9
        handle.update_mapping("left", "bin_a")
        assert handle.transfer_config.mapping["left"] == "bin_a"

    def test_latency_ledger_populated(self, mini_bundle, pipeline_config):
        from mindloop.runtime import STAGES

        recording = noise_recording(duration_s=6.0)
        handle = build_pipeline(mini_bundle,
                                ReplaySource(recording, realtime_factor=0.0),
                                pipeline_config)
        handle.start()
        handle.drain(timeout=30.0)
        handle.stop(timeout=2.0)
        records = handle.ledger.snapshot()
        assert len(records) > 10
        for entry in records:
            stamps = [entry[s] for s in STAGES]
            assert stamps == sorted(stamps)
