"""Online pipeline: stages, pub/sub, transfer function, latency, WebSocket."""

from .channels import Bus, Closed, DropOldestQueue, Empty, Topic
from .transfer import (
    ACTIONS,
    ControlFrame,
    TransferConfig,
    TransferState,
    default_transfer_config,
    transfer_step,
)
from .itr import ItrParams, compute_itr
from .latency import (
    LatencyLedger,
    ReportError,
    STAGES,
    format_report,
    latency_budget,
    latency_report,
)
from .sources import ReplaySource, concat_chunks, open_replay
from .pipeline import (
    PipelineHandle,
    StageMessage,
    StartupError,
    TOPIC_CONTROL,
    TOPIC_MARKERS,
    TOPIC_PROBS,
    build_pipeline,
)
from .qte import QteHarness, QteResult, run_scripted_qte
from .ws import FrameBroadcaster

__all__ = [
    "ACTIONS",
    "Bus",
    "Closed",
    "ControlFrame",
    "DropOldestQueue",
    "Empty",
    "FrameBroadcaster",
    "ItrParams",
    "LatencyLedger",
    "PipelineHandle",
    "QteHarness",
    "QteResult",
    "ReplaySource",
    "ReportError",
    "STAGES",
    "StageMessage",
    "StartupError",
    "TOPIC_CONTROL",
    "TOPIC_MARKERS",
    "TOPIC_PROBS",
    "Topic",
    "TransferConfig",
    "TransferState",
    "build_pipeline",
    "compute_itr",
    "concat_chunks",
    "default_transfer_config",
    "format_report",
    "latency_budget",
    "latency_report",
    "open_replay",
    "run_scripted_qte",
    "transfer_step",
]
