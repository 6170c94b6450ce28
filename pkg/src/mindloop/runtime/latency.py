"""Per-stage latency instrumentation and reporting.

Every message carries monotonic-clock timestamps from four stages:
acquisition, preprocessing, classification, transfer. The report gives
median/p95/p99 per inter-stage delta plus the total, and checks the
accounting invariant total >= sum of in-stage compute times (the rest is
queue wait).
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field

import numpy as np

from ..signal_core.types import ParameterError, SignalError

STAGES = ("acquisition", "preprocessing", "classification", "transfer")
MIN_MESSAGES = 100


class ReportError(SignalError):
    pass


@dataclass
class LatencyLedger:
    """Thread-safe accumulator of per-message stage timestamps."""

    records: list = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def record(self, stamps: dict, compute: dict) -> None:
        entry = {stage: float(stamps[stage]) for stage in STAGES}
        entry["compute"] = {k: float(v) for k, v in compute.items()}
        previous = None
        for stage in STAGES:
            if previous is not None and entry[stage] < previous:
                raise ParameterError(
                    f"stage timestamps not monotonic at {stage!r}")
            previous = entry[stage]
        with self._lock:
            self.records.append(entry)

    def __len__(self) -> int:
        with self._lock:
            return len(self.records)

    def snapshot(self) -> list:
        with self._lock:
            return list(self.records)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for entry in self.snapshot():
                fh.write(json.dumps(entry, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "LatencyLedger":
        ledger = cls()
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                entry = json.loads(line)
                ledger.record({s: entry[s] for s in STAGES},
                              entry.get("compute", {}))
        return ledger


def _percentiles(values: np.ndarray) -> dict:
    return {
        "median_ms": float(np.percentile(values, 50) * 1e3),
        "p95_ms": float(np.percentile(values, 95) * 1e3),
        "p99_ms": float(np.percentile(values, 99) * 1e3),
    }


def latency_report(ledger: LatencyLedger, min_messages: int = MIN_MESSAGES) -> dict:
    """Percentile statistics per stage delta and for the total path."""
    records = ledger.snapshot()
    if len(records) == 0:
        raise ReportError("latency ledger is empty")
    if len(records) < min_messages:
        raise ReportError(
            f"need at least {min_messages} messages, ledger has {len(records)}")

    report = {"n_messages": len(records), "stages": {}}
    times = {stage: np.array([r[stage] for r in records]) for stage in STAGES}
    for prev, stage in zip(STAGES, STAGES[1:]):
        report["stages"][stage] = _percentiles(times[stage] - times[prev])
    total = times[STAGES[-1]] - times[STAGES[0]]
    report["total"] = _percentiles(total)

    compute_sum = np.array([sum(r["compute"].values()) for r in records])
    report["accounting"] = {
        "total_ge_compute_sum": bool(np.all(total >= compute_sum - 1e-9)),
        "median_queue_wait_ms": float(np.median(total - compute_sum) * 1e3),
    }
    return report


def latency_budget(filter_state, window_s: float, ledger: LatencyLedger,
                   accuracy: float | None = None,
                   n_classes: int = 3) -> dict:
    """Methodological + computational delay budget per selection.

    Uses the MEASURED filter group delay (median over 8-30 Hz) rather than
    any quoted figure, plus the causal window length and the median
    in-stage compute time; optionally reports the Wolpaw ITR at a given
    accuracy for the resulting selection time.
    """
    from ..signal_core.filters import measure_group_delay
    import numpy as np

    grid = np.linspace(8.0, 30.0, 100)
    group_delay_s = float(np.median(measure_group_delay(filter_state, grid)))
    records = ledger.snapshot()
    compute_s = (float(np.median([sum(r["compute"].values()) for r in records]))
                 if records else 0.0)
    total_s = group_delay_s + window_s + compute_s
    budget = {
        "filter_group_delay_s": group_delay_s,
        "windowing_s": window_s,
        "computational_median_s": compute_s,
        "selection_time_s": total_s,
    }
    if accuracy is not None:
        from .itr import ItrParams, compute_itr

        budget["itr_bits_per_min"] = compute_itr(
            ItrParams(n_classes, accuracy, total_s))
    return budget


def format_report(report: dict) -> str:
    lines = [f"latency over {report['n_messages']} messages",
             f"{'stage':<16}{'median':>10}{'p95':>10}{'p99':>10}"]
    for stage, stats in report["stages"].items():
        lines.append(f"{stage:<16}{stats['median_ms']:>9.2f}ms"
                     f"{stats['p95_ms']:>9.2f}ms{stats['p99_ms']:>9.2f}ms")
    stats = report["total"]
    lines.append(f"{'total':<16}{stats['median_ms']:>9.2f}ms"
                 f"{stats['p95_ms']:>9.2f}ms{stats['p99_ms']:>9.2f}ms")
    lines.append(f"queue wait median: "
                 f"{report['accounting']['median_queue_wait_ms']:.2f}ms")
    return "\n".join(lines)
