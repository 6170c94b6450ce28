import math

import numpy as np
import pytest
import torch

from mindloop.classify import (
    ClassifierError,
    S4dConfig,
    StreamState,
    mc_dropout_predict,
    s4d_init,
)

SMALL = S4dConfig(d_input=5, d_hidden=8, d_state=6, n_layers=2, dropout=0.2)


def random_input(shape, seed=0):
    g = torch.Generator().manual_seed(seed)
    return torch.randn(*shape, dtype=torch.float64, generator=g)


class TestInit:
    def test_real_parts_negative_half(self):
        model = s4d_init(SMALL, seed=0)
        for block in model.blocks:
            a = block.ssm.state_matrix()
            np.testing.assert_allclose(a.real.detach().numpy(), -0.5, atol=1e-12)

    def test_imaginary_parts_linear_in_index(self):
        cfg = S4dConfig(d_input=3, d_hidden=2, d_state=4, n_layers=1)
        model = s4d_init(cfg, seed=1)
        a = model.blocks[0].ssm.state_matrix()
        expected = np.array([0.0, math.pi, 2 * math.pi, 3 * math.pi])
        np.testing.assert_allclose(a.imag.detach().numpy(),
                                   np.tile(expected, (2, 1)), atol=1e-12)

    def test_same_seed_identical(self):
        m1, m2 = s4d_init(SMALL, seed=7), s4d_init(SMALL, seed=7)
        for (n1, p1), (n2, p2) in zip(m1.state_dict().items(),
                                      m2.state_dict().items()):
            assert n1 == n2
            assert torch.equal(p1, p2)

    def test_different_seed_differs(self):
        m1, m2 = s4d_init(SMALL, seed=7), s4d_init(SMALL, seed=8)
        assert any(not torch.equal(p1, p2)
                   for p1, p2 in zip(m1.parameters(), m2.parameters()))

    def test_discretized_magnitudes_stable(self):
        model = s4d_init(SMALL, seed=2)
        report = model.stability_report()
        assert report["max_re_a"] < 0.0
        assert report["max_abs_a_bar"] < 1.0

    def test_bad_config_rejected(self):
        with pytest.raises(ClassifierError):
            S4dConfig(d_input=4, dropout=1.0)
        with pytest.raises(ClassifierError):
            S4dConfig(d_input=4, dt_min=0.1, dt_max=0.01)


class TestForward:
    def test_zero_input_uniform_logits(self):
        model = s4d_init(SMALL, seed=3)
        with torch.no_grad():
            logits = model(torch.zeros(2, 5, 40, dtype=torch.float64))
        np.testing.assert_allclose(logits.numpy(), 0.0, atol=1e-12)

    def test_batch_of_one_matches_batch_row(self):
        model = s4d_init(SMALL, seed=4)
        x = random_input((16, 5, 60), seed=5)
        with torch.no_grad():
            full = model(x)
            single = model(x[3:4])
        np.testing.assert_allclose(single[0].numpy(), full[3].numpy(),
                                   atol=1e-12)

    @pytest.mark.parametrize("bidirectional", [True, False])
    def test_conv_scan_duality(self, bidirectional):
        cfg = S4dConfig(d_input=4, d_hidden=12, d_state=8, n_layers=3,
                        bidirectional=bidirectional)
        model = s4d_init(cfg, seed=6)
        x = random_input((2, 4, 256), seed=7)
        with torch.no_grad():
            conv = model(x, mode="conv")
            scan = model(x, mode="scan")
        rel = (conv - scan).abs().max() / conv.abs().max()
        assert float(rel) < 1e-4

    def test_wrong_width_rejected(self):
        model = s4d_init(SMALL, seed=8)
        with pytest.raises(ClassifierError):
            model(torch.zeros(1, 4, 30, dtype=torch.float64))

    def test_probabilities_on_simplex(self):
        model = s4d_init(SMALL, seed=9)
        with torch.no_grad():
            probs = model.probabilities(random_input((5, 5, 40), seed=10))
        np.testing.assert_allclose(probs.sum(dim=1).numpy(), 1.0, atol=1e-6)
        assert (probs >= 0).all()


class TestStreamState:
    def test_zero_stream_zero_logits(self):
        model = s4d_init(SMALL, seed=11)
        state = StreamState(window_steps=20)
        for _ in range(20):
            state.push(np.zeros(5))
        np.testing.assert_allclose(state.logits(model), 0.0, atol=1e-12)

    def test_matches_conv_forward_on_window(self):
        model = s4d_init(SMALL, seed=12)
        x = random_input((1, 5, 30), seed=13).numpy()[0]
        state = StreamState(window_steps=30)
        for t in range(30):
            state.push(x[:, t])
        streamed = state.logits(model)
        with torch.no_grad():
            conv = model(torch.from_numpy(x[None]), mode="conv").numpy()[0]
        rel = np.abs(streamed - conv).max() / np.abs(conv).max()
        assert rel < 1e-4

    def test_reset_reproduces_first_call(self):
        model = s4d_init(SMALL, seed=14)
        x = random_input((1, 5, 10), seed=15).numpy()[0]
        state = StreamState(window_steps=10)
        for t in range(10):
            state.push(x[:, t])
        first = state.logits(model)
        state.reset()
        assert not state.full
        for t in range(10):
            state.push(x[:, t])
        np.testing.assert_array_equal(state.logits(model), first)

    def test_rolling_buffer_keeps_window(self):
        state = StreamState(window_steps=4)
        for t in range(7):
            state.push(np.full(5, float(t)))
        window = np.stack(state.buffer, axis=1)
        np.testing.assert_array_equal(window[0], [3.0, 4.0, 5.0, 6.0])


class TestMcDropout:
    def test_zero_dropout_collapses_to_deterministic(self):
        cfg = S4dConfig(d_input=5, d_hidden=8, d_state=6, n_layers=2,
                        dropout=0.0)
        model = s4d_init(cfg, seed=16)
        x = random_input((1, 5, 30), seed=17).numpy()[0]
        pred = mc_dropout_predict(model, x, n_passes=5)
        np.testing.assert_array_equal(pred.std_probs, 0.0)
        with torch.no_grad():
            det = model.probabilities(torch.from_numpy(x[None])).numpy()[0]
        np.testing.assert_allclose(pred.mean_probs, det, atol=1e-12)

    def test_simplex_and_seeded_determinism(self):
        model = s4d_init(SMALL, seed=18)
        x = random_input((1, 5, 30), seed=19).numpy()[0]
        p1 = mc_dropout_predict(model, x, n_passes=10, seed=3)
        p2 = mc_dropout_predict(model, x, n_passes=10, seed=3)
        assert abs(p1.mean_probs.sum() - 1.0) < 1e-6
        np.testing.assert_array_equal(p1.mean_probs, p2.mean_probs)
        assert np.all(p1.std_probs >= 0)

    def test_monte_carlo_convergence(self):
        # Two independent 1000-pass estimates agree within 3 standard errors.
        model = s4d_init(SMALL, seed=20)
        x = random_input((1, 5, 30), seed=21).numpy()[0]
        a = mc_dropout_predict(model, x, n_passes=1000, seed=1)
        b = mc_dropout_predict(model, x, n_passes=1000, seed=2)
        stderr = np.maximum(a.std_probs, 1e-6) / math.sqrt(1000)
        # difference of two estimates has std sqrt(2)*stderr; allow 3 of those
        assert np.all(np.abs(a.mean_probs - b.mean_probs)
                      <= 3.0 * math.sqrt(2.0) * stderr + 1e-9)

    def test_too_few_passes_rejected(self):
        model = s4d_init(SMALL, seed=22)
        with pytest.raises(ClassifierError):
            mc_dropout_predict(model, np.zeros((5, 30)), n_passes=1)
