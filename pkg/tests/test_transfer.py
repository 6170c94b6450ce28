import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mindloop.runtime import TransferConfig, TransferState, transfer_step
from mindloop.signal_core import ParameterError

CLASSES = ("left", "rest", "right")


def make_config(**overrides):
    defaults = dict(
        class_names=CLASSES,
        mapping={"left": "x_neg", "rest": "neutral", "right": "y_pos"},
        thresholds={c: 0.5 for c in CLASSES},
        buffer_len=10,
        delta_up=0.2,
        delta_down=0.1,
    )
    defaults.update(overrides)
    return TransferConfig(**defaults)


def one_hot(index):
    probs = np.zeros(3)
    probs[index] = 1.0
    return probs


class TestConfig:
    def test_mapping_must_cover_classes(self):
        with pytest.raises(ParameterError):
            make_config(mapping={"left": "x_neg", "rest": "neutral"})

    def test_threshold_range(self):
        with pytest.raises(ParameterError):
            make_config(thresholds={"left": 0.2, "rest": 0.5, "right": 0.5})
        with pytest.raises(ParameterError):
            make_config(thresholds={"left": 1.1, "rest": 0.5, "right": 0.5})

    def test_unknown_action(self):
        with pytest.raises(ParameterError):
            make_config(mapping={"left": "jump", "rest": "neutral",
                                 "right": "y_pos"})

    def test_atomic_updates_return_new_config(self):
        config = make_config()
        updated = config.with_threshold("left", 0.7)
        assert config.thresholds["left"] == 0.5
        assert updated.thresholds["left"] == 0.7


class TestContinuousControl:
    def test_saturated_one_hot_drives_axis_to_one(self):
        config = make_config()
        state = TransferState()
        for _ in range(config.buffer_len):
            state, frame = transfer_step(state, config, one_hot(2))
        assert frame.y == pytest.approx(1.0)
        assert frame.label == "right"

    def test_other_axis_decays_toward_zero(self):
        config = make_config()
        state = TransferState()
        state.x = -0.35
        state, frame = transfer_step(state, config, one_hot(2))
        assert frame.x == pytest.approx(-0.25)
        state, frame = transfer_step(state, config, one_hot(2))
        assert frame.x == pytest.approx(-0.15)

    def test_proportional_above_threshold(self):
        config = make_config(buffer_len=1)
        state = TransferState()
        probs = np.array([0.05, 0.20, 0.75])
        state, frame = transfer_step(state, config, probs)
        assert frame.y == pytest.approx((0.75 - 0.5) / (1 - 0.5))
        assert frame.x == 0.0

    def test_negative_axis_sign(self):
        config = make_config(buffer_len=1)
        state = TransferState()
        state, frame = transfer_step(state, config, one_hot(0))
        assert frame.x == pytest.approx(-1.0)

    def test_uniform_probs_no_action(self):
        config = make_config()
        state = TransferState()
        state.x, state.y, state.a_fill = 0.5, -0.5, 0.6
        state, frame = transfer_step(state, config, np.full(3, 1 / 3))
        assert frame.x == pytest.approx(0.4)
        assert frame.y == pytest.approx(-0.4)
        assert frame.a_fill == pytest.approx(0.5)


class TestBinarySignals:
    def test_pulse_on_fifth_tick_and_reset(self):
        config = make_config(mapping={"left": "bin_a", "rest": "neutral",
                                      "right": "y_pos"}, buffer_len=1)
        state = TransferState()
        pulses = []
        for _ in range(6):
            state, frame = transfer_step(state, config, one_hot(0))
            pulses.append(frame.a)
        assert pulses == [False, False, False, False, True, False]
        # after the pulse the fill restarted from zero
        assert state.a_fill == pytest.approx(0.2)

    def test_non_matching_fill_decays(self):
        config = make_config(mapping={"left": "bin_a", "rest": "neutral",
                                      "right": "bin_b"}, buffer_len=1)
        state = TransferState()
        state.b_fill = 0.5
        state, frame = transfer_step(state, config, one_hot(0))
        assert frame.a_fill == pytest.approx(0.2)
        assert frame.b_fill == pytest.approx(0.4)

    def test_probs_validated(self):
        config = make_config()
        with pytest.raises(ParameterError):
            transfer_step(TransferState(), config, np.array([0.5, 0.5]))
        with pytest.raises(ParameterError):
            transfer_step(TransferState(), config, np.array([0.9, 0.3, 0.1]))


class TestSmoothing:
    def test_buffer_mean_is_reported(self):
        config = make_config(buffer_len=4)
        state = TransferState()
        for _ in range(2):
            state, frame = transfer_step(state, config, one_hot(2))
        state, frame = transfer_step(state, config, one_hot(0))
        np.testing.assert_allclose(frame.probs, [1 / 3, 0, 2 / 3])

    def test_label_hysteresis_under_one_hot_runs(self):
        # With one-hot inputs in runs of buffer_len, the reported label can
        # change at most once within each run (rolling-average hysteresis).
        config = make_config(buffer_len=10)
        state = TransferState()
        rng = np.random.default_rng(0)
        for _ in range(20):
            cls = int(rng.integers(0, 3))
            labels = []
            for _ in range(config.buffer_len):
                state, frame = transfer_step(state, config, one_hot(cls))
                labels.append(frame.label)
            changes = sum(1 for a, b in zip(labels, labels[1:]) if a != b)
            assert changes <= 1

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.integers(min_value=0, max_value=2), min_size=1,
                    max_size=60),
           st.integers(min_value=0, max_value=2 ** 31 - 1))
    def test_bounds_always_hold(self, classes, seed):
        rng = np.random.default_rng(seed)
        config = make_config(
            mapping={"left": "bin_a", "rest": "neutral", "right": "x_pos"},
            buffer_len=int(rng.integers(1, 12)))
        state = TransferState()
        previous_a = False
        for cls in classes:
            weights = rng.dirichlet(np.ones(3)) * 0.4
            probs = one_hot(cls) * 0.6 + weights
            probs = probs / probs.sum()
            state, frame = transfer_step(state, config, probs)
            assert -1.0 <= frame.x <= 1.0 and -1.0 <= frame.y <= 1.0
            assert 0.0 <= frame.a_fill <= 1.0 and 0.0 <= frame.b_fill <= 1.0
            # pulses are single-tick: no two consecutive True ticks
            assert not (frame.a and previous_a)
            previous_a = frame.a
