"""Pipeline configuration: one JSON-serializable tree covering every stage.

Library functions take plain arguments; this module only maps a config file
onto them. Any subset of keys may appear in the JSON; the rest keep their
defaults.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field


@dataclass
class MontageSettings:
    channel_names: list = field(default_factory=lambda: [
        "F3", "F4", "C3", "Cz", "C4", "P3", "P4", "Oz"])
    sample_rate_hz: float = 250.0


@dataclass
class FilterSettings:
    low_hz: float = 1.0
    high_hz: float = 40.0
    order: int = 12
    stopband_db: float = 40.0


@dataclass
class RejectionSettings:
    enabled: bool = True
    flatline_s: float = 5.0
    noise_z: float = 5.0
    spike_uv: float = 500.0


@dataclass
class AsrSettings:
    enabled: bool = True
    cutoff_k: float = 20.0
    window_s: float = 0.5


@dataclass
class EpochSettings:
    tmin: float = 0.0
    tmax: float = 3.0
    baseline: list = field(default_factory=lambda: [-0.5, 0.0])
    crop_s: float = 10.0


@dataclass
class FeatureSettings:
    freqs_hz: list = field(default_factory=lambda: [float(f) for f in range(6, 33, 2)])
    n_cycles: float = 2.0
    time_decim: int = 3
    window_s: float = 1.0
    stride_s: float = 2.0 / 3.0
    use_csp: bool = True
    csp_components: int = 4


@dataclass
class ModelSettings:
    n_layers: int = 3
    d_hidden: int = 64
    d_state: int = 32
    dropout: float = 0.2
    bidirectional: bool = True
    dt_min: float = 1e-3
    dt_max: float = 1e-1


@dataclass
class TrainSettings:
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 60
    patience: int = 10
    split_ratio: float = 0.8
    val_fraction: float = 0.15
    seed: int = 0


@dataclass
class TransferSettings:
    buffer_len: int = 10
    default_threshold: float = 0.5
    thresholds: dict = field(default_factory=dict)
    mapping: dict = field(default_factory=lambda: {
        "left": "x_neg", "right": "y_pos", "rest": "neutral"})
    delta_up: float = 0.2
    delta_down: float = 0.1


@dataclass
class RuntimeSettings:
    chunk_frames: int = 25
    hop_s: float = 0.1
    queue_size: int = 64
    warmup_s: float = 2.0
    ws_host: str = "127.0.0.1"
    ws_port: int = 8765


@dataclass
class PipelineConfig:
    montage: MontageSettings = field(default_factory=MontageSettings)
    bandpass: FilterSettings = field(default_factory=FilterSettings)
    rejection: RejectionSettings = field(default_factory=RejectionSettings)
    asr: AsrSettings = field(default_factory=AsrSettings)
    epochs: EpochSettings = field(default_factory=EpochSettings)
    features: FeatureSettings = field(default_factory=FeatureSettings)
    model: ModelSettings = field(default_factory=ModelSettings)
    training: TrainSettings = field(default_factory=TrainSettings)
    transfer: TransferSettings = field(default_factory=TransferSettings)
    runtime: RuntimeSettings = field(default_factory=RuntimeSettings)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, tree: dict) -> "PipelineConfig":
        config = cls()
        for section_field in dataclasses.fields(cls):
            overrides = tree.get(section_field.name)
            if overrides is None:
                continue
            section = getattr(config, section_field.name)
            known = {f.name for f in dataclasses.fields(section)}
            unknown = set(overrides) - known
            if unknown:
                raise ValueError(
                    f"unknown keys in config section {section_field.name!r}: "
                    f"{sorted(unknown)}")
            for key, value in overrides.items():
                setattr(section, key, value)
        unknown_sections = set(tree) - {f.name for f in dataclasses.fields(cls)}
        if unknown_sections:
            raise ValueError(f"unknown config sections: {sorted(unknown_sections)}")
        return config

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
