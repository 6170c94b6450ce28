"""Recording and mapping file formats.

A recording file is a single binary file:

    <UTF-8 JSON header>\n<little-endian float32 samples>\n?<UTF-8 JSON trailer>

The header carries montage, session id, units, a format version and the
byte offset of the marker trailer; samples are stored channel-major (all
frames of channel 0, then channel 1, ...). Round-trips are bit-exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .types import Marker, Montage, Recording, SignalError

FORMAT_VERSION = 1
UNITS = "uV"


class RecordingFormatError(SignalError):
    """Corrupt, truncated or incompatible recording file."""


def save_recording(recording: Recording, path) -> None:
    """Write a recording; save->load->save is byte-identical."""
    samples32 = recording.samples.astype("<f4")
    payload = samples32.tobytes(order="C")
    trailer = json.dumps(
        [{"timestamp": m.timestamp, "label": m.label} for m in recording.markers],
        sort_keys=True,
    ).encode("utf-8")

    def render_header(marker_offset: int) -> bytes:
        header = {
            "format": "mindloop-recording",
            "version": FORMAT_VERSION,
            "units": UNITS,
            "session_id": recording.session_id,
            "channel_names": list(recording.montage.channel_names),
            "sample_rate_hz": recording.montage.sample_rate_hz,
            "reference_scheme": recording.montage.reference_scheme,
            "n_frames": recording.n_frames,
            "marker_offset": marker_offset,
        }
        return json.dumps(header, sort_keys=True).encode("utf-8")

    # The marker offset depends on the header length, which depends on the
    # offset's digit count; iterate to the (quick) fixed point.
    offset = 0
    for _ in range(4):
        header_bytes = render_header(offset)
        new_offset = len(header_bytes) + 1 + len(payload)
        if new_offset == offset:
            break
        offset = new_offset
    header_bytes = render_header(offset)

    with open(path, "wb") as fh:
        fh.write(header_bytes)
        fh.write(b"\n")
        fh.write(payload)
        fh.write(trailer)


def load_recording(path) -> Recording:
    """Read a recording file written by :func:`save_recording`."""
    raw = Path(path).read_bytes()
    newline = raw.find(b"\n")
    if newline < 0:
        raise RecordingFormatError("missing header line")
    try:
        header = json.loads(raw[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise RecordingFormatError(f"unreadable header: {exc}") from exc

    if header.get("format") != "mindloop-recording":
        raise RecordingFormatError("not a recording file")
    if header.get("version") != FORMAT_VERSION:
        raise RecordingFormatError(
            f"unsupported format version {header.get('version')!r}")

    montage = Montage(
        channel_names=tuple(header["channel_names"]),
        sample_rate_hz=header["sample_rate_hz"],
        reference_scheme=header.get("reference_scheme", "device"),
    )
    n_frames = header["n_frames"]
    n_values = montage.n_channels * n_frames
    start = newline + 1
    marker_offset = header["marker_offset"]
    if marker_offset != start + n_values * 4 or len(raw) < marker_offset:
        raise RecordingFormatError("truncated or inconsistent sample block")

    samples = np.frombuffer(raw[start:marker_offset], dtype="<f4")
    if samples.size != n_values:
        raise RecordingFormatError("truncated sample block")
    samples = samples.reshape(montage.n_channels, n_frames).astype(np.float64)

    try:
        marker_list = json.loads(raw[marker_offset:].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise RecordingFormatError(f"unreadable marker trailer: {exc}") from exc
    markers = [Marker(m["timestamp"], m["label"]) for m in marker_list]

    return Recording(montage=montage, samples=samples, markers=markers,
                     session_id=header["session_id"])


def load_mapping(path) -> dict:
    """Read a ``{marker_label: class_name}`` JSON mapping file."""
    with open(path, "r", encoding="utf-8") as fh:
        mapping = json.load(fh)
    if not isinstance(mapping, dict) or not mapping:
        raise RecordingFormatError("mapping file must be a non-empty JSON object")
    if not all(isinstance(k, str) and isinstance(v, str) for k, v in mapping.items()):
        raise RecordingFormatError("mapping must map marker labels to class names")
    return mapping


def save_mapping(mapping: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(mapping, fh, sort_keys=True, indent=2)
