"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with ``pytest tests/test_acceptance.py -v -s``).

The expensive end-to-end path (synthesize -> train -> replay online) is
shared through session-scoped fixtures; everything else is self-contained.
"""

import json
import threading
import time

import numpy as np
import pytest
import torch

from mindloop.classify import S4dConfig, s4d_init
from mindloop.config import PipelineConfig
from mindloop.features import csp_fit, csp_transform, window_epochs
from mindloop.runtime import (
    ItrParams,
    ReplaySource,
    build_pipeline,
    compute_itr,
    format_report,
    latency_report,
    run_scripted_qte,
)
from mindloop.sessions import (
    SynthConfig,
    generate_cue_sequence,
    run_calibration,
    synth_generate,
    task_mapping,
    train_from_recordings,
)
from mindloop.sessions.synth import SynthSource
from mindloop.signal_core import (
    EpochSet,
    Montage,
    Recording,
    SampleChunk,
    apply_filter,
    asr_calibrate,
    asr_process,
    asr_process_recording,
    design_bandpass,
    frequency_response,
)

CLASSES = ("left", "right", "rest")
TRAIN_SEED = 11
ONLINE_SEED = 401


def announce(number, text):
    print(f"\nACCEPTANCE {number} PASS - {text}")


# --- shared end-to-end fixtures ----------------------------------------------

@pytest.fixture(scope="session")
def pipeline_config():
    config = PipelineConfig()
    config.training.seed = TRAIN_SEED
    config.runtime.queue_size = 60000  # lossless unpaced replay
    return config


@pytest.fixture(scope="session")
def synthetic_dataset(pipeline_config):
    schedule = generate_cue_sequence(CLASSES, 40, seed=TRAIN_SEED)
    synth = SynthConfig.default_three_class(seed=TRAIN_SEED, erd_fraction=0.5)
    started = time.monotonic()
    session = synth_generate(synth, schedule)
    rest = SynthSource(
        SynthConfig.default_three_class(seed=TRAIN_SEED + 1, erd_fraction=0.5),
        generate_cue_sequence(CLASSES, 1, seed=TRAIN_SEED + 1),
        realtime_factor=0.0, duration_s=80.0)
    calibration = run_calibration(rest, duration_s=75.0)
    return {"session": session, "calibration": calibration,
            "mapping": task_mapping(CLASSES),
            "synthesis_s": time.monotonic() - started}


@pytest.fixture(scope="session")
def trained(synthetic_dataset, pipeline_config):
    started = time.monotonic()
    artifacts = train_from_recordings(
        [synthetic_dataset["session"]], synthetic_dataset["calibration"],
        synthetic_dataset["mapping"], pipeline_config)
    elapsed = time.monotonic() - started
    return {"artifacts": artifacts, "train_s": elapsed,
            "total_s": elapsed + synthetic_dataset["synthesis_s"]}


@pytest.fixture(scope="session")
def online_run(trained, synthetic_dataset, pipeline_config):
    """Replay a fresh 42-trial synthetic session through the live pipeline."""
    from mindloop.signal_core import crop_head, filter_recording_samples

    schedule = generate_cue_sequence(CLASSES, 14, seed=ONLINE_SEED)
    recording = synth_generate(
        SynthConfig.default_three_class(seed=ONLINE_SEED, erd_fraction=0.5),
        schedule)

    config = pipeline_config
    bp = config.bandpass
    calibration = synthetic_dataset["calibration"]
    filt = design_bandpass(bp.low_hz, bp.high_hz, bp.order, bp.stopband_db,
                           calibration.montage.sample_rate_hz)
    cal_filtered = Recording(
        montage=calibration.montage,
        samples=filter_recording_samples(filt, calibration.samples),
        markers=list(calibration.markers))
    asr_model = asr_calibrate(crop_head(cal_filtered, config.epochs.crop_s),
                              config.asr.cutoff_k, config.asr.window_s)

    handle = build_pipeline(trained["artifacts"].bundle,
                            ReplaySource(recording, realtime_factor=0.0),
                            config, asr_model=asr_model)
    marker_queue = handle.subscribe_markers(maxsize=60000)
    control_queue = handle.subscribe_control(maxsize=60000)
    handle.start()
    holder = {}
    worker = threading.Thread(target=lambda: holder.setdefault(
        "result", run_scripted_qte(handle, synthetic_dataset["mapping"],
                                   window_s=3.0,
                                   marker_queue=marker_queue,
                                   control_queue=control_queue)))
    worker.start()
    handle.drain(timeout=900.0)
    worker.join(timeout=300.0)
    stopped = handle.stop(timeout=2.0)
    return {"qte": holder["result"], "ledger": handle.ledger,
            "stopped": stopped, "n_trials": schedule.n_trials}


# --- criteria ------------------------------------------------------------------

def test_criterion_1_s4d_duality():
    started = time.monotonic()
    rng = np.random.default_rng(1)
    worst = 0.0
    for i in range(50):
        config = S4dConfig(
            d_input=int(rng.integers(2, 9)),
            d_hidden=int(rng.integers(4, 65)),
            d_state=int(rng.integers(2, 33)),
            n_layers=int(rng.integers(1, 4)),
            dropout=0.0,
            bidirectional=bool(rng.integers(0, 2)))
        model = s4d_init(config, seed=i)
        g = torch.Generator().manual_seed(1000 + i)
        x = torch.randn(1, config.d_input, 256, dtype=torch.float64,
                        generator=g)
        with torch.no_grad():
            conv = model(x, mode="conv")
            scan = model(x, mode="scan")
        rel = float((conv - scan).abs().max() / conv.abs().max().clamp(min=1e-12))
        worst = max(worst, rel)
        assert rel < 1e-4, f"model {i}: relative error {rel:.2e}"
    elapsed = time.monotonic() - started
    assert elapsed < 60.0
    announce(1, f"recurrent/convolutional duality on 50 random models, "
                f"worst rel err {worst:.2e}, {elapsed:.1f}s")


def test_criterion_2_gradient_correctness():
    started = time.monotonic()
    config = S4dConfig(d_input=3, d_hidden=2, d_state=2, n_layers=2,
                       n_classes=3, dropout=0.0)
    model = s4d_init(config, seed=0)
    g = torch.Generator().manual_seed(2)
    x = torch.randn(4, 3, 8, dtype=torch.float64, generator=g)
    y = torch.tensor([0, 1, 2, 1])
    loss_fn = torch.nn.CrossEntropyLoss()

    model.zero_grad()
    loss_fn(model(x), y).backward()

    eps = 1e-6
    worst = 0.0
    for name, param in model.named_parameters():
        analytic = param.grad.detach().clone().reshape(-1)
        numeric = torch.zeros_like(analytic)
        for i in range(param.numel()):
            index = np.unravel_index(i, param.shape)
            with torch.no_grad():
                original = float(param[index])
                param[index] = original + eps
                plus = float(loss_fn(model(x), y))
                param[index] = original - eps
                minus = float(loss_fn(model(x), y))
                param[index] = original
            numeric[i] = (plus - minus) / (2 * eps)
        scale = max(float(analytic.norm()), float(numeric.norm()), 1e-12)
        rel = float((analytic - numeric).norm()) / scale
        worst = max(worst, rel)
        assert rel < 1e-3, f"{name}: rel err {rel:.2e}"
    elapsed = time.monotonic() - started
    assert elapsed < 60.0
    announce(2, f"finite-difference gradients for every parameter group, "
                f"worst rel err {worst:.2e}, {elapsed:.1f}s")


def test_criterion_3_csp_properties():
    rng = np.random.default_rng(3)
    epochs, labels = [], []
    for label, scale in ((0, np.sqrt(10.0)), (1, 1.0)):
        for _ in range(25):
            x = rng.standard_normal((5, 600))
            x[0] *= scale
            epochs.append(x)
            labels.append(label)
    es = EpochSet(epochs=np.stack(epochs), labels=np.array(labels),
                  class_names=("a", "b"), sample_rate_hz=250.0,
                  channel_names=("c0", "c1", "c2", "c3", "c4"),
                  tmin=0.0, tmax=2.4)
    model = csp_fit(es, n_components=4)
    for c in range(2):
        w = model.filters[c]
        composite = model.class_covs[c] + model.rest_covs[c]
        whitened = w.T @ composite @ w
        assert np.max(np.abs(whitened - np.eye(4))) < 1e-6
        projected = w.T @ model.class_covs[c] @ w
        assert np.max(np.abs(projected - np.diag(np.diag(projected)))) < 1e-6
    top = model.filters[0][:, 0]
    top = top / np.linalg.norm(top)
    assert abs(top[0]) > 0.9
    csp_transform(model, es)  # transform path sanity
    announce(3, f"CSP whitening/diagonalization within 1e-6, planted channel "
                f"weight |w1|={abs(top[0]):.3f} > 0.9")


def test_criterion_4_filter_spec():
    state = design_bandpass(1.0, 40.0, sample_rate_hz=250.0)

    def db(freqs):
        return 20 * np.log10(np.maximum(
            np.abs(frequency_response(state, np.asarray(freqs))), 1e-15))

    at_mains = db([50.0])[0]
    at_dc = db([1e-4])[0]
    passband = db(np.linspace(8.0, 30.0, 2000))
    assert at_mains <= -40.0
    assert at_dc <= -40.0
    assert np.all(np.abs(passband) <= 1.0)

    montage = Montage(("c0", "c1"), 250.0)
    rng = np.random.default_rng(4)
    x = rng.standard_normal((2, 1500))
    whole = apply_filter(state.copy_design(),
                         SampleChunk(x, 0.0, montage)).samples
    import random

    checker = random.Random(4)
    for _ in range(100):
        cuts = sorted(checker.sample(range(1, 1500), checker.randint(1, 20)))
        streaming_state = state.copy_design()
        outputs, previous = [], 0
        for cut in cuts + [1500]:
            outputs.append(apply_filter(
                streaming_state,
                SampleChunk(x[:, previous:cut], previous / 250.0,
                            montage)).samples)
            previous = cut
        np.testing.assert_array_equal(np.concatenate(outputs, axis=1), whole)
    announce(4, f"bandpass: 50 Hz at {at_mains:.1f} dB, DC at {at_dc:.1f} dB, "
                f"8-30 Hz within +/-{np.max(np.abs(passband)):.2f} dB, "
                f"bit-identical over 100 random chunkings")


def test_criterion_5_asr():
    rng = np.random.default_rng(5)
    montage = Montage(tuple(f"c{i}" for i in range(6)), 250.0)
    calibration = Recording(
        montage=montage, samples=rng.standard_normal((6, 250 * 60)) * 10.0)
    model = asr_calibrate(calibration, cutoff_k=20.0, window_s=0.5)

    # no-op on artifact-free windows: zero difference
    clean_window = rng.standard_normal((6, model.window_frames)) * 10.0
    out = asr_process(model, SampleChunk(clean_window, 0.0, montage))
    assert np.max(np.abs(out.samples - clean_window)) == 0.0

    # 50x single-channel burst inside a 10 s recording
    clean = rng.standard_normal((6, 250 * 10)) * 10.0
    contaminated = clean.copy()
    b0 = 4 * 250
    b1 = b0 + model.window_frames
    contaminated[0, b0:b1] += 50.0 * 10.0 * np.sin(
        2 * np.pi * 5.0 * np.arange(model.window_frames) / 250.0)
    processed = asr_process_recording(
        model, Recording(montage=montage, samples=contaminated)).samples

    burst_before = np.sqrt(np.mean(contaminated[0, b0:b1] ** 2))
    burst_after = np.sqrt(np.mean(processed[0, b0:b1] ** 2))
    reduction = 1.0 - burst_after / burst_before
    assert reduction >= 0.80
    worst_change = 0.0
    for channel in range(1, 6):
        change = (np.sqrt(np.mean((processed[channel] - clean[channel]) ** 2))
                  / np.sqrt(np.mean(clean[channel] ** 2)))
        worst_change = max(worst_change, change)
        assert change < 0.05
    announce(5, f"ASR: burst RMS reduced {reduction * 100:.0f}%, clean "
                f"channels changed <= {worst_change * 100:.2f}%, clean "
                f"windows bit-exact")


def test_criterion_6_window_arithmetic():
    for n_epochs, expected in ((190, 760), (720, 2880)):
        rng = np.random.default_rng(n_epochs)
        es = EpochSet(
            epochs=rng.standard_normal((n_epochs, 2, 750)),
            labels=np.arange(n_epochs) % 3,
            class_names=CLASSES, sample_rate_hz=250.0,
            channel_names=("c0", "c1"), tmin=0.0, tmax=3.0)
        windowed = window_epochs(es, window_s=1.0, stride_s=2.0 / 3.0)
        assert windowed.n_epochs == expected
    announce(6, "windowing: 190 epochs -> 760 windows, 720 -> 2880, exactly")


def test_criterion_7_itr_reproduction():
    values = {
        1.617: compute_itr(ItrParams(3, 0.73, 1.617)),
        3.117: compute_itr(ItrParams(3, 0.73, 3.117)),
        4.617: compute_itr(ItrParams(3, 0.73, 4.617)),
    }
    assert values[1.617] == pytest.approx(17.57, abs=0.05)
    assert values[3.117] == pytest.approx(9.11, abs=0.05)
    assert values[4.617] == pytest.approx(6.15, abs=0.05)
    announce(7, f"ITR at (3, 0.73): {values[1.617]:.2f} / {values[3.117]:.2f} "
                f"/ {values[4.617]:.2f} bits/min for T=1.617/3.117/4.617 s")


def test_criterion_8_end_to_end_offline(trained):
    accuracy = trained["artifacts"].window_metrics["accuracy"]
    assert accuracy >= 0.90
    assert trained["total_s"] < 600.0
    announce(8, f"offline chain on 40 trials/class synthetic data: "
                f"window accuracy {accuracy:.3f} >= 0.90 in "
                f"{trained['total_s']:.0f}s (< 600s)")


def test_criterion_9_online_closed_loop(online_run):
    result = online_run["qte"]
    assert result.n_trials == online_run["n_trials"] == 42
    assert result.success_rate >= 0.80
    per_class = {cls: f"{v['success']}/{v['total']}"
                 for cls, v in sorted(result.per_class().items())}
    announce(9, f"closed-loop QTE: {result.n_success}/{result.n_trials} "
                f"success ({result.success_rate:.2f} >= 0.80), {per_class}")


def test_criterion_10_latency_accounting(online_run):
    ledger = online_run["ledger"]
    assert len(ledger) >= 100
    from mindloop.runtime import STAGES

    for entry in ledger.snapshot():
        stamps = [entry[stage] for stage in STAGES]
        assert stamps == sorted(stamps)
    report = latency_report(ledger)
    for stage in ("preprocessing", "classification", "transfer"):
        assert {"median_ms", "p95_ms", "p99_ms"} <= set(report["stages"][stage])
    assert {"median_ms", "p95_ms", "p99_ms"} <= set(report["total"])
    assert report["accounting"]["total_ge_compute_sum"] is True
    compute_median = np.median([sum(r["compute"].values()) * 1e3
                                for r in ledger.snapshot()])
    print("\n" + format_report(report))
    announce(10, f"latency accounting over {len(ledger)} messages holds; "
                 f"median in-stage compute {compute_median:.1f} ms "
                 f"(reference end-to-end figure: 117.24 ms; unpaced replay "
                 f"inflates queue waits by design)")


def test_criterion_11_determinism(tmp_path):
    from mindloop.classify import save_model

    def one_run(tag):
        config = PipelineConfig()
        config.training.seed = 123
        config.training.max_epochs = 4
        schedule = generate_cue_sequence(CLASSES, 6, seed=123)
        session = synth_generate(
            SynthConfig.default_three_class(seed=123, erd_fraction=0.5),
            schedule)
        rest = SynthSource(
            SynthConfig.default_three_class(seed=124, erd_fraction=0.5),
            generate_cue_sequence(CLASSES, 1, seed=124),
            realtime_factor=0.0, duration_s=80.0)
        calibration = run_calibration(rest, duration_s=75.0)
        artifacts = train_from_recordings([session], calibration,
                                          task_mapping(CLASSES), config)
        bundle_path = tmp_path / f"bundle-{tag}.mlb"
        save_model(artifacts.bundle, bundle_path)
        report = json.dumps(artifacts.report.to_dict(), sort_keys=True)
        return bundle_path.read_bytes(), report

    bundle_a, report_a = one_run("a")
    bundle_b, report_b = one_run("b")
    assert bundle_a == bundle_b
    assert report_a == report_b
    announce(11, f"two fixed-seed runs: byte-identical bundles "
                 f"({len(bundle_a)} bytes) and training reports")
