"""The offline chain: recordings + calibration + mapping -> trained bundle.

Order matters: bandpass, head crop, channel rejection, ASR (full rank),
common average reference, epoching/baseline; then an epoch-level stratified
split BEFORE normalization and CSP are fit, so no statistic ever sees test
epochs; finally windowing, Morlet+CSP stacking, training and evaluation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..classify import (
    S4dConfig,
    TrainConfig,
    baseline_fit,
    bundle_from_model,
    evaluate,
    evaluate_trials,
    pooled_features,
    s4d_init,
    save_model,
    train,
)
from ..classify.bundle import ModelBundle
from ..classify.train import confusion_summary
from ..config import MontageSettings, PipelineConfig
from ..features import (
    csp_fit,
    csp_transform_array,
    morlet_power,
    split_epochs,
    stack_features,
    window_epochs,
)
from ..signal_core import (
    DataQualityError,
    NormStats,
    RejectionCriteria,
    asr_calibrate,
    asr_process_recording,
    car_recording,
    crop_head,
    design_bandpass,
    epoch_and_baseline,
    filter_recording_samples,
    normalize_epochs,
    reject_channels,
)
from ..signal_core.types import Recording

log = logging.getLogger(__name__)


class StageFailure(Exception):
    """Wraps a preprocessing failure with the stage and file that caused it."""

    def __init__(self, stage: str, source: str, original: Exception):
        super().__init__(f"{stage} failed for {source}: {original}")
        self.stage = stage
        self.source = source
        self.original = original


@dataclass
class TrainArtifacts:
    bundle: ModelBundle
    report: object
    window_metrics: dict
    trial_metrics: dict
    rejected_channels: dict
    test_windows: object


def _preprocess(recording: Recording, config: PipelineConfig, source: str,
                drop_channels=(), run_rejection=True):
    bp = config.bandpass
    try:
        filt = design_bandpass(bp.low_hz, bp.high_hz, bp.order,
                               bp.stopband_db,
                               recording.montage.sample_rate_hz)
        filtered = Recording(
            montage=recording.montage,
            samples=filter_recording_samples(filt, recording.samples),
            markers=list(recording.markers),
            session_id=recording.session_id)
    except Exception as exc:
        raise StageFailure("bandpass", source, exc) from exc
    try:
        cropped = crop_head(filtered, config.epochs.crop_s)
    except Exception as exc:
        raise StageFailure("crop", source, exc) from exc
    if drop_channels:
        keep = [c for c in cropped.montage.channel_names
                if c not in set(drop_channels)]
        idx = [cropped.montage.index_of(c) for c in keep]
        cropped = Recording(montage=cropped.montage.drop(drop_channels),
                            samples=cropped.samples[idx],
                            markers=list(cropped.markers),
                            session_id=cropped.session_id)
    rejected = {}
    if run_rejection and config.rejection.enabled:
        try:
            cropped, rejected = reject_channels(cropped, RejectionCriteria(
                config.rejection.flatline_s, config.rejection.noise_z,
                config.rejection.spike_uv))
        except Exception as exc:
            raise StageFailure("channel rejection", source, exc) from exc
    return cropped, rejected


def train_from_recordings(recordings: list, calibration: Recording | None,
                          mapping: dict, config: PipelineConfig,
                          sources: list | None = None,
                          kind: str = "s4d") -> TrainArtifacts:
    """Run the full offline chain over already-loaded recordings."""
    sources = sources or [f"recording[{i}]" for i in range(len(recordings))]
    if config.asr.enabled and calibration is None:
        raise DataQualityError(
            "ASR is enabled but no calibration recording was given; record "
            "one minute of rest data or disable asr in the config")

    # Rejection pass: union of per-recording rejections, applied everywhere
    # so all sessions share one channel set.
    rejected_all: dict = {}
    for recording, source in zip(recordings, sources):
        _, rejected = _preprocess(recording, config, source)
        rejected_all.update(rejected)
    asr_model = None
    if config.asr.enabled:
        cal_clean, cal_rejected = _preprocess(
            calibration, config, "calibration", run_rejection=True)
        rejected_all.update(cal_rejected)

    drop = tuple(sorted(rejected_all))
    if drop:
        log.info("dropping channels across all sessions: %s", drop)
    if config.asr.enabled:
        cal_clean, _ = _preprocess(calibration, config, "calibration",
                                   drop_channels=drop, run_rejection=False)
        try:
            asr_model = asr_calibrate(cal_clean, config.asr.cutoff_k,
                                      config.asr.window_s)
        except Exception as exc:
            raise StageFailure("asr calibration", "calibration", exc) from exc

    epoch_sets = []
    for recording, source in zip(recordings, sources):
        clean, _ = _preprocess(recording, config, source, drop_channels=drop,
                               run_rejection=False)
        if asr_model is not None:
            try:
                clean = asr_process_recording(asr_model, clean)
            except Exception as exc:
                raise StageFailure("asr", source, exc) from exc
        clean = car_recording(clean)
        try:
            epoch_sets.append(epoch_and_baseline(
                clean, mapping, config.epochs.tmin, config.epochs.tmax,
                tuple(config.epochs.baseline)))
        except Exception as exc:
            raise StageFailure("epoching", source, exc) from exc

    merged = _concat_epochs(epoch_sets)
    train_epochs, test_epochs = split_epochs(
        merged, config.training.split_ratio, config.training.seed)
    train_epochs, norm_stats = normalize_epochs(train_epochs)
    test_epochs, _ = normalize_epochs(test_epochs, norm_stats)

    csp = (csp_fit(train_epochs, config.features.csp_components)
           if config.features.use_csp else None)

    def featurize(epoch_set):
        windowed = window_epochs(epoch_set, config.features.window_s,
                                 config.features.stride_s)
        morlet = morlet_power(windowed, config.features.freqs_hz,
                              config.features.n_cycles,
                              config.features.time_decim)
        block = (csp_transform_array(csp, windowed.epochs)
                 if csp is not None else None)
        return stack_features(morlet, block)

    train_windows = featurize(train_epochs)
    test_windows = featurize(test_epochs)

    montage_meta = MontageSettings(
        channel_names=list(train_epochs.channel_names),
        sample_rate_hz=train_epochs.sample_rate_hz)

    if kind == "s4d":
        model_cfg = S4dConfig(
            d_input=train_windows.n_feature_channels,
            d_hidden=config.model.d_hidden,
            d_state=config.model.d_state,
            n_layers=config.model.n_layers,
            n_classes=len(merged.class_names),
            dropout=config.model.dropout,
            bidirectional=config.model.bidirectional,
            dt_min=config.model.dt_min,
            dt_max=config.model.dt_max)
        model = s4d_init(model_cfg, config.training.seed)
        fit_set, val_set = split_epochs_tensor(
            train_windows, 1.0 - config.training.val_fraction,
            config.training.seed + 1)
        model, report = train(model, fit_set, val_set, TrainConfig(
            learning_rate=config.training.learning_rate,
            batch_size=config.training.batch_size,
            max_epochs=config.training.max_epochs,
            patience=config.training.patience,
            seed=config.training.seed))
        window_metrics = evaluate(model, test_windows)
        trial_metrics = evaluate_trials(model, test_windows)
        bundle = bundle_from_model(
            model, csp, norm_stats, config.features, montage_meta,
            merged.class_names,
            train_meta={"seed": config.training.seed,
                        "epochs_run": report.epochs_run,
                        "best_val_loss": report.best_val_loss,
                        "rejected_channels": sorted(rejected_all)})
    else:
        baseline = baseline_fit(kind, pooled_features(train_windows),
                                train_windows.labels,
                                n_classes=len(merged.class_names))
        predictions = baseline.predict(pooled_features(test_windows))
        window_metrics = confusion_summary(test_windows.labels, predictions,
                                           len(merged.class_names))
        trial_metrics = window_metrics
        report = None
        bundle = ModelBundle(
            kind=kind, class_names=merged.class_names, montage=montage_meta,
            features=config.features, norm_stats=norm_stats, csp=csp,
            baseline=baseline,
            train_meta={"seed": config.training.seed,
                        "rejected_channels": sorted(rejected_all)})

    return TrainArtifacts(
        bundle=bundle, report=report, window_metrics=window_metrics,
        trial_metrics=trial_metrics, rejected_channels=rejected_all,
        test_windows=test_windows)


def split_epochs_tensor(tensor, ratio: float, seed: int):
    """Epoch-grouped split of an already-windowed FeatureTensor."""
    from ..features.windows import stratified_split

    return stratified_split(tensor, ratio, seed)


def _concat_epochs(epoch_sets):
    from ..signal_core.types import EpochSet

    first = epoch_sets[0]
    for es in epoch_sets[1:]:
        if es.class_names != first.class_names:
            raise DataQualityError("class sets differ between recordings")
        if es.channel_names != first.channel_names:
            raise DataQualityError("channel sets differ between recordings")
        if es.n_frames != first.n_frames:
            raise DataQualityError("epoch lengths differ between recordings")
    return EpochSet(
        epochs=np.concatenate([es.epochs for es in epoch_sets]),
        labels=np.concatenate([es.labels for es in epoch_sets]),
        class_names=first.class_names,
        sample_rate_hz=first.sample_rate_hz,
        channel_names=first.channel_names,
        tmin=first.tmin,
        tmax=first.tmax,
        baseline=first.baseline,
    )


def save_artifacts(artifacts: TrainArtifacts, bundle_path, report_path=None):
    save_model(artifacts.bundle, bundle_path)
    if report_path is not None and artifacts.report is not None:
        import json

        with open(report_path, "w", encoding="utf-8") as fh:
            json.dump(artifacts.report.to_dict(), fh, sort_keys=True, indent=2)


def format_confusion(metrics: dict, class_names) -> str:
    matrix = metrics["confusion_matrix"]
    width = max(len(c) for c in class_names) + 2
    lines = ["confusion matrix (rows = true):",
             " " * width + "".join(f"{c:>{width}}" for c in class_names)]
    for i, name in enumerate(class_names):
        lines.append(f"{name:>{width}}" + "".join(
            f"{matrix[i, j]:>{width}}" for j in range(len(class_names))))
    lines.append(f"accuracy: {metrics['accuracy']:.3f}")
    recalls = ", ".join(f"{c}={r:.2f}" for c, r in
                        zip(class_names, metrics["per_class_recall"]))
    lines.append(f"per-class recall: {recalls}")
    return "\n".join(lines)
