"""Bit-exact file formats: features, annotations, predictions, checkpoints.

Binary feature container: magic "FDD1", u16 version, u32 L, u32 D (all
little-endian), then L*D float32 values time-major. JSON writers emit a
fixed key order and round floats to 6 significant digits so identical
inputs always produce byte-identical files.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import Detector, ModelConfig
from .sequence import ActionInstance, DetectionCandidate, FeatureSequence

_MAGIC = b"FDD1"
_VERSION = 1
_HEADER = struct.Struct("<4sHII")


def encode_features(features: np.ndarray) -> bytes:
    """Pack one (L, D) array into the binary container at single precision."""
    arr = np.ascontiguousarray(features, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError("features must have shape (L, D)")
    length, dim = arr.shape
    return _HEADER.pack(_MAGIC, _VERSION, length, dim) + arr.tobytes()


def decode_features(blob: bytes) -> np.ndarray:
    """Inverse of encode_features; returns float64 (L, D)."""
    if len(blob) < _HEADER.size:
        raise ValueError("not a feature file")
    magic, version, length, dim = _HEADER.unpack(blob[: _HEADER.size])
    if magic != _MAGIC or version != _VERSION:
        raise ValueError("not a feature file")
    if len(blob) - _HEADER.size != 4 * length * dim:
        raise ValueError("corrupt feature file")
    flat = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size)
    return flat.reshape(length, dim).astype(np.float64)


def write_feature_file(path, features: np.ndarray):
    Path(path).write_bytes(encode_features(features))


def read_feature_file(path) -> FeatureSequence:
    return FeatureSequence.single(decode_features(Path(path).read_bytes()))


def _round_floats(obj):
    """Recursively clamp floats to 6 significant digits for stable output."""
    if isinstance(obj, float):
        return float(f"{obj:.6g}")
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def write_json(path, obj):
    """Deterministic JSON: insertion key order, rounded floats, one trailing
    newline."""
    text = json.dumps(_round_floats(obj), indent=2, sort_keys=False)
    Path(path).write_text(text + "\n")


@dataclass
class AnnotatedVideo:
    """One annotation entry; actions are in seconds with integer label ids."""

    video_id: str
    duration_seconds: float
    fps_feature: float
    feature_file: str
    actions: list = field(default_factory=list)

    def __post_init__(self):
        if self.duration_seconds <= 0:
            raise ValueError(f"duration must be positive for {self.video_id}")
        if self.fps_feature <= 0:
            raise ValueError(f"fps_feature must be positive for {self.video_id}")


@dataclass
class AnnotationSet:
    labels: list  # class names; the index is the numeric label id
    videos: list  # AnnotatedVideo entries

    def durations(self) -> dict:
        return {v.video_id: v.duration_seconds for v in self.videos}

    def ground_truth(self) -> dict:
        return {v.video_id: list(v.actions) for v in self.videos}


def save_annotations(path, aset: AnnotationSet):
    doc = {
        "version": "1.0",
        "labels": list(aset.labels),
        "videos": [
            {
                "id": v.video_id,
                "duration_seconds": v.duration_seconds,
                "fps_feature": v.fps_feature,
                "feature_file": v.feature_file,
                "annotations": [
                    {"label": aset.labels[a.label],
                     "segment_seconds": [a.start, a.end]}
                    for a in v.actions
                ],
            }
            for v in aset.videos
        ],
    }
    write_json(path, doc)


def load_annotations(path) -> AnnotationSet:
    doc = json.loads(Path(path).read_text())
    labels = list(doc["labels"])
    index = {name: i for i, name in enumerate(labels)}
    videos = []
    for entry in doc["videos"]:
        actions = []
        for a in entry.get("annotations", []):
            if a["label"] not in index:
                raise ValueError(f"unknown label {a['label']!r} in {entry['id']}")
            s, e = a["segment_seconds"]
            actions.append(ActionInstance(float(s), float(e), index[a["label"]]))
        videos.append(AnnotatedVideo(
            video_id=entry["id"],
            duration_seconds=float(entry["duration_seconds"]),
            fps_feature=float(entry["fps_feature"]),
            feature_file=entry["feature_file"],
            actions=actions,
        ))
    return AnnotationSet(labels=labels, videos=videos)


def save_predictions(path, labels: list, preds: dict):
    """preds: video id -> DetectionCandidate list, segments in seconds."""
    doc = {"results": {
        vid: [
            {"label": labels[c.label], "score": c.score,
             "segment_seconds": [c.start, c.end]}
            for c in preds[vid]
        ]
        for vid in sorted(preds)
    }}
    write_json(path, doc)


def load_predictions(path, labels: list) -> dict:
    doc = json.loads(Path(path).read_text())
    index = {name: i for i, name in enumerate(labels)}
    out = {}
    for vid, entries in doc["results"].items():
        cands = []
        for e in entries:
            if e["label"] not in index:
                raise ValueError(f"unknown label {e['label']!r} in predictions")
            score = float(e["score"])
            if not 0.0 <= score <= 1.0:
                raise ValueError(f"score out of range in {vid}")
            s, end = e["segment_seconds"]
            if not float(s) < float(end):
                raise ValueError(f"empty segment in {vid}")
            cands.append(DetectionCandidate(vid, index[e["label"]], score,
                                            float(s), float(end)))
        out[vid] = cands
    return out


def save_checkpoint(path, model: Detector):
    """One JSON header line (config + parameter index), then one feature
    blob per parameter, f32, in store order."""
    names = model.params.names()
    header = {
        "format": "ckpt-1",
        "config": model.cfg.to_dict(),
        "params": [{"name": n, "shape": list(model.params[n].data.shape)}
                   for n in names],
    }
    blob = json.dumps(_round_floats(header), sort_keys=False).encode() + b"\n"
    parts = [blob]
    for n in names:
        parts.append(encode_features(model.params[n].data.reshape(1, -1)))
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path) -> Detector:
    raw = Path(path).read_bytes()
    cut = raw.find(b"\n")
    if cut < 0:
        raise ValueError("not a checkpoint file")
    header = json.loads(raw[:cut].decode())
    if header.get("format") != "ckpt-1":
        raise ValueError("not a checkpoint file")
    model = Detector(ModelConfig.from_dict(header["config"]))
    offset = cut + 1
    state = {}
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape)) if shape else 1
        end = offset + _HEADER.size + 4 * size
        state[entry["name"]] = decode_features(raw[offset:end]).reshape(shape)
        offset = end
    if offset != len(raw):
        raise ValueError("corrupt feature file")
    model.params.load_state_dict(state)
    return model


def seconds_to_grid(segment, fps_feature: float):
    if fps_feature <= 0:
        raise ValueError("fps_feature must be positive")
    return (segment[0] * fps_feature, segment[1] * fps_feature)


def grid_to_seconds(segment, fps_feature: float):
    if fps_feature <= 0:
        raise ValueError("fps_feature must be positive")
    return (segment[0] / fps_feature, segment[1] / fps_feature)


def parse_config(text: str) -> dict:
    """`key = value` lines into a flat dict; blanks and # comments skipped."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if not key:
            raise ValueError(f"config line {lineno}: empty key")
        out[key] = value.strip()
    return out


def load_config(path) -> dict:
    return parse_config(Path(path).read_text())
