"""Command-line entry points: record, calibrate, train, run, replay,
simulate, latency-report, itr."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .config import PipelineConfig

log = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config JSON", default=None)
    common.add_argument("--seed", type=int, default=None,
                        help="override every seed in the config")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="mindloop",
        description="Real-time EEG motor-imagery decoding pipeline")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=lambda **kw: argparse.ArgumentParser(
                                    parents=[common], **kw))

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--trials-per-class", type=int, default=40)
    p.add_argument("--erd", type=float, default=0.5)
    p.add_argument("--classes", default="left,right,rest")
    p.add_argument("--calibration-s", type=float, default=70.0)

    p = sub.add_parser("record", help="run the cue paradigm against a source")
    p.add_argument("--out", required=True)
    p.add_argument("--trials-per-class", type=int, default=10)
    p.add_argument("--classes", default="left,right,rest")
    p.add_argument("--source", default="synth:0",
                   help="synth:<seed> or replay:<file>")
    p.add_argument("--factor", type=float, default=1.0)

    p = sub.add_parser("calibrate", help="record one minute of rest data")
    p.add_argument("--out", required=True)
    p.add_argument("--duration", type=float, default=60.0)
    p.add_argument("--source", default="synth:0")
    p.add_argument("--factor", type=float, default=1.0)

    p = sub.add_parser("train", help="offline chain: recordings -> bundle")
    p.add_argument("--recordings", nargs="+", required=True)
    p.add_argument("--calibration", default=None)
    p.add_argument("--mapping", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None)
    p.add_argument("--kind", default="s4d", choices=["s4d", "knn", "linear"])

    p = sub.add_parser("run", help="online pipeline with WebSocket broadcast")
    p.add_argument("--model", required=True)
    p.add_argument("--source", required=True,
                   help="replay:<file> or synth:<seed>")
    p.add_argument("--calibration", default=None,
                   help="rest recording to calibrate online ASR")
    p.add_argument("--factor", type=float, default=1.0)
    p.add_argument("--ws", default=None, help="host:port for the console")
    p.add_argument("--mapping", default=None,
                   help="mapping file for forwarding cues to the console")
    p.add_argument("--ledger", default=None, help="latency ledger output")
    p.add_argument("--trials-per-class", type=int, default=10,
                   help="schedule size for synth sources")

    p = sub.add_parser("replay", help="inspect and stream a recording file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--factor", type=float, default=0.0)

    p = sub.add_parser("latency-report", help="summarize a latency ledger")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("itr", help="Wolpaw information transfer rate")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    return parser


def load_config(args) -> PipelineConfig:
    config = (PipelineConfig.load(args.config) if args.config
              else PipelineConfig())
    if args.seed is not None:
        config.training.seed = args.seed
    return config


def _make_source(spec: str, config: PipelineConfig, factor: float,
                 trials_per_class: int = 10, classes=("left", "right", "rest")):
    from .runtime import open_replay
    from .sessions import SynthConfig, SynthSource, generate_cue_sequence

    kind, _, arg = spec.partition(":")
    if kind == "replay":
        return open_replay(arg, realtime_factor=factor,
                           chunk_frames=config.runtime.chunk_frames)
    if kind == "synth":
        # synth:<seed> for the default generator, synth:<config.json> for a
        # full signal-model description
        if arg and not arg.isdigit():
            with open(arg, "r", encoding="utf-8") as fh:
                synth = SynthConfig.from_dict(json.load(fh))
            classes = tuple(sorted(synth.signatures)) or classes
            seed = synth.seed
        else:
            seed = int(arg or 0)
            synth = SynthConfig.default_three_class(seed=seed)
        schedule = generate_cue_sequence(classes, trials_per_class, seed=seed)
        return SynthSource(synth, schedule, realtime_factor=factor,
                           chunk_frames=config.runtime.chunk_frames)
    raise SystemExit(f"unknown source spec {spec!r} (use replay:<file> or "
                     f"synth:<seed|config.json>)")


def cmd_simulate(args, config) -> int:
    from .sessions import (SynthConfig, generate_cue_sequence, run_calibration,
                           synth_generate, task_mapping)
    from .sessions.synth import SynthSource
    from .signal_core import save_mapping, save_recording

    classes = tuple(args.classes.split(","))
    seed = config.training.seed
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    schedule = generate_cue_sequence(classes, args.trials_per_class, seed=seed)
    synth = SynthConfig.default_three_class(seed=seed, erd_fraction=args.erd)
    recording = synth_generate(synth, schedule)
    save_recording(recording, out / "session.rec")

    rest_source = SynthSource(
        SynthConfig.default_three_class(seed=seed + 1, erd_fraction=args.erd),
        generate_cue_sequence(classes, 1, seed=seed + 1),
        realtime_factor=0.0, duration_s=args.calibration_s)
    calibration = run_calibration(rest_source,
                                  duration_s=args.calibration_s - 5.0)
    save_recording(calibration, out / "calibration.rec")
    save_mapping(task_mapping(classes), out / "mapping.json")
    print(f"wrote {out / 'session.rec'} ({recording.duration_s:.0f}s, "
          f"{schedule.n_trials} trials), calibration and mapping")
    return 0


def cmd_record(args, config) -> int:
    from .sessions import generate_cue_sequence, run_paradigm

    classes = tuple(args.classes.split(","))
    seed = config.training.seed
    schedule = generate_cue_sequence(classes, args.trials_per_class, seed=seed)
    source = _make_source(args.source, config, args.factor,
                          args.trials_per_class, classes)
    recording = run_paradigm(
        schedule, source, sink_path=args.out,
        cue_callback=lambda cls, ms: print(f"cue: {cls} ({ms} ms)"))
    print(f"recorded {recording.duration_s:.0f}s with "
          f"{len(recording.markers)} markers -> {args.out}")
    return 0


def cmd_calibrate(args, config) -> int:
    from .sessions import run_calibration
    from .signal_core import save_recording

    source = _make_source(args.source, config, args.factor)
    if hasattr(source, "duration_s"):
        source.duration_s = args.duration + 10.0
    recording = run_calibration(source, duration_s=args.duration)
    save_recording(recording, args.out)
    print(f"calibration saved to {args.out} ({recording.duration_s:.0f}s)")
    return 0


def cmd_train(args, config) -> int:
    from .sessions import StageFailure, format_confusion, save_artifacts, train_from_recordings
    from .signal_core import DataQualityError, load_mapping, load_recording

    mapping = load_mapping(args.mapping)
    recordings = [load_recording(path) for path in args.recordings]
    calibration = (load_recording(args.calibration)
                   if args.calibration else None)
    try:
        artifacts = train_from_recordings(
            recordings, calibration, mapping, config,
            sources=list(args.recordings), kind=args.kind)
    except (StageFailure, DataQualityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    save_artifacts(artifacts, args.out, args.report)
    print(format_confusion(artifacts.window_metrics,
                           artifacts.bundle.class_names))
    trial = artifacts.trial_metrics
    print(f"per-trial (majority vote) accuracy: {trial['accuracy']:.3f}")
    print(f"bundle -> {args.out}")
    return 0


def cmd_run(args, config) -> int:
    from .classify import load_model
    from .runtime import FrameBroadcaster, build_pipeline, format_report, latency_report
    from .signal_core import load_mapping

    bundle = load_model(args.model)
    source = _make_source(args.source, config, args.factor,
                          args.trials_per_class)
    asr_model = None
    if config.asr.enabled and args.calibration:
        asr_model = calibrate_online_asr(args.calibration, config)
    handle = build_pipeline(bundle, source, config, asr_model=asr_model)

    broadcaster = None
    if args.ws:
        host, _, port = args.ws.partition(":")
        cue_map = load_mapping(args.mapping) if args.mapping else {}
        broadcaster = FrameBroadcaster(handle, host=host or "127.0.0.1",
                                       port=int(port or 8765), cue_map=cue_map)
        broadcaster.start()
        print(f"console websocket on ws://{host or '127.0.0.1'}:{port or 8765}")

    handle.start()
    try:
        handle.drain(timeout=3600.0)
    except KeyboardInterrupt:
        print("interrupted")
    finally:
        if broadcaster is not None:
            broadcaster.stop()
        handle.stop(timeout=2.0)

    print(f"control frames: {len(handle.ledger)}; dropped: "
          f"{handle.dropped_counts()}")
    if args.ledger:
        handle.ledger.save(args.ledger)
        print(f"ledger -> {args.ledger}")
    if len(handle.ledger) >= 100:
        print(format_report(latency_report(handle.ledger)))
        print(_format_budget(bundle, config, handle))
    return 0


def _format_budget(bundle, config, handle) -> str:
    from .runtime import latency_budget
    from .signal_core import design_bandpass

    bp = config.bandpass
    filt = design_bandpass(bp.low_hz, bp.high_hz, bp.order, bp.stopband_db,
                           bundle.montage.sample_rate_hz)
    budget = latency_budget(filt, bundle.features.window_s, handle.ledger,
                            accuracy=0.73,
                            n_classes=len(bundle.class_names))
    return (f"budget per selection: group delay "
            f"{budget['filter_group_delay_s'] * 1e3:.0f} ms (measured) + "
            f"window {budget['windowing_s'] * 1e3:.0f} ms + compute "
            f"{budget['computational_median_s'] * 1e3:.0f} ms = "
            f"{budget['selection_time_s'] * 1e3:.0f} ms "
            f"(theoretical ITR at P=0.73: "
            f"{budget['itr_bits_per_min']:.2f} bits/min)")


def calibrate_online_asr(calibration_path, config):
    """Filter+crop the rest recording and fit the ASR statistics for the
    live preprocessing stage."""
    from .sessions.offline import _preprocess
    from .signal_core import asr_calibrate, load_recording

    calibration = load_recording(calibration_path)
    # no channel rejection here: the live source streams the full montage
    clean, _ = _preprocess(calibration, config, calibration_path,
                           run_rejection=False)
    return asr_calibrate(clean, config.asr.cutoff_k, config.asr.window_s)


def cmd_replay(args, config) -> int:
    from .runtime import open_replay

    source = open_replay(args.infile, realtime_factor=args.factor,
                         chunk_frames=config.runtime.chunk_frames)
    recording = source.recording
    print(f"{args.infile}: {recording.montage.n_channels} channels @ "
          f"{recording.montage.sample_rate_hz:g} Hz, "
          f"{recording.duration_s:.1f}s, {len(recording.markers)} markers")
    start = time.monotonic()
    chunks = frames = markers = 0
    for kind, payload in source.events():
        if args.factor > 0:
            target = start + payload_time(payload) / args.factor
            delay = target - time.monotonic()
            if delay > 0:
                time.sleep(delay)
        if kind == "chunk":
            chunks += 1
            frames += payload.n_frames
        else:
            markers += 1
            print(f"  marker @{payload.timestamp:.2f}s {payload.label}")
    print(f"streamed {chunks} chunks / {frames} frames / {markers} markers "
          f"in {time.monotonic() - start:.2f}s")
    return 0


def payload_time(payload) -> float:
    return getattr(payload, "start_timestamp", None) or getattr(
        payload, "timestamp", 0.0)


def cmd_latency_report(args, _config) -> int:
    from .runtime import LatencyLedger, format_report, latency_report

    ledger = LatencyLedger.load(args.infile)
    report = latency_report(ledger)
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        print(format_report(report))
    return 0


def cmd_itr(args, _config) -> int:
    from .runtime import ItrParams, compute_itr

    bits = compute_itr(ItrParams(args.n, args.p, args.t))
    print(f"{bits:.2f} bits/min")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "record": cmd_record,
    "calibrate": cmd_calibrate,
    "train": cmd_train,
    "run": cmd_run,
    "replay": cmd_replay,
    "latency-report": cmd_latency_report,
    "itr": cmd_itr,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    config = load_config(args)
    return COMMANDS[args.command](args, config)


if __name__ == "__main__":
    sys.exit(main())
