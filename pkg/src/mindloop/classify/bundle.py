"""Versioned model bundle: everything the online pipeline needs in one file.

Layout:

    b"MLBNDL\\0\\0" | u32 version | u64 meta_len | meta JSON | tensor blob

The JSON metadata holds the model kind, configs, class names and a manifest
of (name, dtype, shape, offset) for the raw little-endian tensors that
follow. Round-trips are bit-exact, so fixed-seed training produces
byte-identical bundles.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch

from ..config import FeatureSettings, MontageSettings
from ..features.csp import CspModel
from ..signal_core.preprocess import NormStats
from .s4d import S4dClassifier, S4dConfig
from .train import KnnModel, LinearModel

MAGIC = b"MLBNDL\x00\x00"
BUNDLE_VERSION = 1


class BundleFormatError(Exception):
    """Corrupt, truncated or incompatible bundle file."""


@dataclass
class ModelBundle:
    """A trained classifier plus the feature/normalization state it assumes."""

    kind: str                       # "s4d" | "knn" | "linear"
    class_names: tuple
    montage: MontageSettings
    features: FeatureSettings
    norm_stats: NormStats
    s4d_config: Optional[S4dConfig] = None
    s4d_state: Optional[dict] = None          # name -> float64 ndarray
    csp: Optional[CspModel] = None
    baseline: Optional[object] = None         # KnnModel | LinearModel
    train_meta: dict = dataclasses.field(default_factory=dict)

    def build_model(self) -> S4dClassifier:
        if self.kind != "s4d":
            raise BundleFormatError(f"bundle holds a {self.kind!r} model")
        model = S4dClassifier(self.s4d_config)
        state = {k: torch.from_numpy(v.copy()) for k, v in self.s4d_state.items()}
        model.load_state_dict(state)
        model.eval()
        return model


def bundle_from_model(model: S4dClassifier, csp, norm_stats, feature_settings,
                      montage_settings, class_names, train_meta=None) -> ModelBundle:
    state = {name: tensor.detach().numpy().astype(np.float64)
             for name, tensor in model.state_dict().items()}
    return ModelBundle(
        kind="s4d",
        class_names=tuple(class_names),
        montage=montage_settings,
        features=feature_settings,
        norm_stats=norm_stats,
        s4d_config=model.config,
        s4d_state=state,
        csp=csp,
        train_meta=train_meta or {},
    )


def _collect_tensors(bundle: ModelBundle) -> dict:
    tensors = {
        "norm/mean": bundle.norm_stats.mean,
        "norm/std": bundle.norm_stats.std,
    }
    if bundle.kind == "s4d":
        for name, array in bundle.s4d_state.items():
            tensors[f"s4d/{name}"] = array
    elif bundle.kind == "knn":
        tensors["knn/train_x"] = bundle.baseline.train_x
        tensors["knn/train_y"] = bundle.baseline.train_y
    elif bundle.kind == "linear":
        tensors["linear/weights"] = bundle.baseline.weights
        tensors["linear/bias"] = bundle.baseline.bias
    else:
        raise BundleFormatError(f"unknown model kind {bundle.kind!r}")
    if bundle.csp is not None:
        tensors["csp/filters"] = bundle.csp.filters
        tensors["csp/class_covs"] = bundle.csp.class_covs
        tensors["csp/rest_covs"] = bundle.csp.rest_covs
        tensors["csp/eigenvalues"] = bundle.csp.eigenvalues
    return tensors


def save_model(bundle: ModelBundle, path) -> None:
    tensors = _collect_tensors(bundle)
    manifest, blobs, offset = [], [], 0
    for name in sorted(tensors):
        array = np.ascontiguousarray(tensors[name])
        if array.dtype == np.int64:
            dtype = "<i8"
        else:
            array = array.astype(np.float64)
            dtype = "<f8"
        blob = array.astype(dtype).tobytes()
        manifest.append({"name": name, "dtype": dtype,
                         "shape": list(array.shape), "offset": offset,
                         "nbytes": len(blob)})
        blobs.append(blob)
        offset += len(blob)

    meta = {
        "kind": bundle.kind,
        "class_names": list(bundle.class_names),
        "montage": dataclasses.asdict(bundle.montage),
        "features": dataclasses.asdict(bundle.features),
        "s4d_config": bundle.s4d_config.to_dict() if bundle.s4d_config else None,
        "knn_k": bundle.baseline.k if bundle.kind == "knn" else None,
        "n_classes": len(bundle.class_names),
        "train_meta": bundle.train_meta,
        "manifest": manifest,
    }
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", BUNDLE_VERSION))
        fh.write(struct.pack("<Q", len(meta_bytes)))
        fh.write(meta_bytes)
        for blob in blobs:
            fh.write(blob)


def load_model(path) -> ModelBundle:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(MAGIC) + 12 or raw[:len(MAGIC)] != MAGIC:
        raise BundleFormatError("not a model bundle")
    version = struct.unpack_from("<I", raw, len(MAGIC))[0]
    if version != BUNDLE_VERSION:
        raise BundleFormatError(f"unsupported bundle version {version}")
    meta_len = struct.unpack_from("<Q", raw, len(MAGIC) + 4)[0]
    meta_start = len(MAGIC) + 12
    if len(raw) < meta_start + meta_len:
        raise BundleFormatError("truncated metadata section")
    try:
        meta = json.loads(raw[meta_start:meta_start + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BundleFormatError(f"unreadable metadata: {exc}") from exc

    blob_start = meta_start + meta_len
    tensors = {}
    for entry in meta["manifest"]:
        start = blob_start + entry["offset"]
        stop = start + entry["nbytes"]
        if stop > len(raw):
            raise BundleFormatError(f"truncated tensor {entry['name']!r}")
        array = np.frombuffer(raw[start:stop], dtype=entry["dtype"])
        expected = int(np.prod(entry["shape"])) if entry["shape"] else 1
        if array.size != expected:
            raise BundleFormatError(f"tensor {entry['name']!r} size mismatch")
        tensors[entry["name"]] = array.reshape(entry["shape"]).copy()

    features = FeatureSettings(**meta["features"])
    montage = MontageSettings(**meta["montage"])
    class_names = tuple(meta["class_names"])
    norm = NormStats(mean=tensors["norm/mean"], std=tensors["norm/std"])

    csp = None
    if "csp/filters" in tensors:
        csp = CspModel(
            filters=tensors["csp/filters"],
            class_covs=tensors["csp/class_covs"],
            rest_covs=tensors["csp/rest_covs"],
            eigenvalues=tensors["csp/eigenvalues"],
            class_names=class_names,
        )
    if features.use_csp and csp is None:
        raise BundleFormatError(
            "feature config requires CSP but the bundle has no CSP block")

    kind = meta["kind"]
    bundle = ModelBundle(
        kind=kind, class_names=class_names, montage=montage, features=features,
        norm_stats=norm, csp=csp, train_meta=meta.get("train_meta", {}))
    if kind == "s4d":
        bundle.s4d_config = S4dConfig.from_dict(meta["s4d_config"])
        prefix = "s4d/"
        bundle.s4d_state = {
            name[len(prefix):]: tensors[name]
            for name in tensors if name.startswith(prefix)
        }
        if not bundle.s4d_state:
            raise BundleFormatError("s4d bundle has no parameter tensors")
    elif kind == "knn":
        bundle.baseline = KnnModel(
            train_x=tensors["knn/train_x"],
            train_y=tensors["knn/train_y"].astype(np.int64),
            k=int(meta["knn_k"]),
            n_classes=len(class_names),
        )
    elif kind == "linear":
        bundle.baseline = LinearModel(weights=tensors["linear/weights"],
                                      bias=tensors["linear/bias"])
    else:
        raise BundleFormatError(f"unknown model kind {kind!r}")
    return bundle
