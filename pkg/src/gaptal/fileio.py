"""File formats: GAPF binary feature container, annotation and split JSON.

GAPF layout (17-byte header, little endian):

    bytes 0..3   magic "GAPF"
    bytes 4..7   u32 version, currently 1
    byte  8      u8 kind: 0 frame features, 1 text embeddings, 2 checkpoint
    bytes 9..12  u32 rows
    bytes 13..16 u32 cols
    then rows*cols float32 values, row-major

Text-embedding and checkpoint files carry a sibling JSON manifest at
"<path>.json" (class names in row order, or the parameter table).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError

MAGIC = b"GAPF"
VERSION = 1
KIND_FRAMES = 0
KIND_TEXT = 1
KIND_CHECKPOINT = 2
_HEADER = struct.Struct("<4sIBII")  # 17 bytes


@dataclass
class VideoFeatures:
    """Per-video frame feature matrix, the model's only visual input."""

    video_id: str
    frames: np.ndarray  # (T, D) float32

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


@dataclass
class ActionInstance:
    start: float  # normalized, in [0, 1]
    end: float
    label: str

    def __post_init__(self):
        if not 0.0 <= self.start < self.end <= 1.0:
            raise ValidationError(
                f"instance violates 0 <= start < end <= 1: ({self.start}, {self.end})"
            )


@dataclass
class AnnotationSet:
    video_id: str
    duration_seconds: float
    instances: list[ActionInstance] = field(default_factory=list)


@dataclass
class ClassSplit:
    seen: list[str]
    unseen: list[str]

    def __post_init__(self):
        overlap = set(self.seen) & set(self.unseen)
        if overlap:
            raise ValidationError(f"seen/unseen classes overlap: {sorted(overlap)}")
        if not self.seen or not self.unseen:
            raise ValidationError("both seen and unseen class lists must be non-empty")

    @property
    def all_classes(self) -> list[str]:
        return list(self.seen) + list(self.unseen)


@dataclass
class TextEmbeddings:
    class_names: list[str]
    embeddings: np.ndarray  # (N_c, D) float32

    def __post_init__(self):
        if len(self.class_names) != self.embeddings.shape[0]:
            raise ValidationError(
                f"{len(self.class_names)} class names for {self.embeddings.shape[0]} embedding rows"
            )
        norms = np.linalg.norm(self.embeddings, axis=1)
        if np.any(norms == 0.0):
            raise ValidationError("text embedding rows must be non-zero")

    def restricted_to(self, classes: list[str]) -> "TextEmbeddings":
        index = {name: i for i, name in enumerate(self.class_names)}
        missing = [c for c in classes if c not in index]
        if missing:
            raise ValidationError(f"classes missing from text embeddings: {missing}")
        rows = [index[c] for c in classes]
        return TextEmbeddings(list(classes), self.embeddings[rows])


# ---- GAPF read/write ---------------------------------------------------------


def _write_gapf(path, matrix: np.ndarray, kind: int):
    mat = np.ascontiguousarray(matrix, dtype="<f4")
    if mat.ndim != 2:
        raise FormatError(f"GAPF payload must be a matrix, got shape {mat.shape}")
    rows, cols = mat.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, kind, rows, cols))
        fh.write(mat.tobytes())


def _read_gapf(path, expect_kind: int | None = None) -> tuple[np.ndarray, int]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, kind, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if expect_kind is not None and kind != expect_kind:
        raise FormatError(f"{path}: kind {kind}, expected {expect_kind}")
    expected = _HEADER.size + rows * cols * 4
    if len(raw) != expected:
        raise FormatError(f"{path}: truncated payload ({len(raw)} bytes, expected {expected})")
    mat = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(rows, cols)
    return mat.copy(), kind


def write_features(vf: VideoFeatures, path):
    if vf.frames.ndim != 2 or vf.frames.shape[0] < 1 or vf.frames.shape[1] < 1:
        raise ValidationError(f"features must be a T x D matrix with T,D >= 1, got {vf.frames.shape}")
    if not np.all(np.isfinite(vf.frames)):
        raise ValidationError(f"features for {vf.video_id!r} contain non-finite values")
    _write_gapf(path, vf.frames, KIND_FRAMES)


def read_features(path) -> VideoFeatures:
    mat, _ = _read_gapf(path, expect_kind=KIND_FRAMES)
    if not np.all(np.isfinite(mat)):
        raise FormatError(f"{path}: payload contains non-finite values")
    return VideoFeatures(video_id=Path(path).stem, frames=mat)


def manifest_path(gapf_path) -> Path:
    return Path(str(gapf_path) + ".json")


def write_text_embeddings(te: TextEmbeddings, path):
    _write_gapf(path, te.embeddings, KIND_TEXT)
    with open(manifest_path(path), "w") as fh:
        json.dump({"classes": te.class_names}, fh, indent=2)
        fh.write("\n")


def read_text_embeddings(path) -> TextEmbeddings:
    mat, _ = _read_gapf(path, expect_kind=KIND_TEXT)
    mpath = manifest_path(path)
    if not mpath.exists():
        raise FormatError(f"{path}: missing class manifest {mpath}")
    with open(mpath) as fh:
        manifest = json.load(fh)
    classes = manifest.get("classes")
    if not isinstance(classes, list) or not all(isinstance(c, str) for c in classes):
        raise FormatError(f"{mpath}: field 'classes' must be a list of strings")
    return TextEmbeddings(classes, mat)


# ---- annotation / split JSON ---------------------------------------------------


def read_split(path) -> ClassSplit:
    with open(path) as fh:
        doc = json.load(fh)
    for key in ("seen", "unseen"):
        if key not in doc or not isinstance(doc[key], list):
            raise FormatError(f"{path}: field '{key}' must be a list of class names")
    return ClassSplit(seen=doc["seen"], unseen=doc["unseen"])


def write_split(split: ClassSplit, path):
    with open(path, "w") as fh:
        json.dump({"seen": split.seen, "unseen": split.unseen}, fh, indent=2)
        fh.write("\n")


def read_annotations(path, split: ClassSplit, phase: str) -> list[AnnotationSet]:
    """Load annotations, filtered to the phase's half of the class split.

    Times are converted from seconds to the normalized [0, 1] scale. The
    train phase keeps seen-class instances, the test phase unseen-class
    ones; videos left with no instance are kept (they still matter as
    evaluation negatives; the training loop drops them itself).
    """
    if phase not in ("train", "test"):
        raise ValidationError(f"phase must be 'train' or 'test', got {phase!r}")
    keep = set(split.seen if phase == "train" else split.unseen)
    known = set(split.all_classes)
    with open(path) as fh:
        doc = json.load(fh)
    if "videos" not in doc or not isinstance(doc["videos"], list):
        raise FormatError(f"{path}: field 'videos' must be a list")
    out = []
    for entry in doc["videos"]:
        vid = entry.get("video_id")
        duration = entry.get("duration_seconds")
        if not isinstance(vid, str) or not isinstance(duration, (int, float)) or duration <= 0:
            raise FormatError(f"{path}: video entry needs video_id and positive duration_seconds")
        instances = []
        for inst in entry.get("instances", []):
            label = inst.get("label")
            s, e = inst.get("start_seconds"), inst.get("end_seconds")
            if label not in known:
                raise ValidationError(f"{vid}: unknown label {label!r} (not in seen or unseen)")
            if s is None or e is None or s >= e:
                raise ValidationError(f"{vid}: instance must satisfy start < end, got ({s}, {e})")
            if s < 0 or e > duration:
                raise ValidationError(
                    f"{vid}: instance ({s}, {e}) outside [0, {duration}] seconds"
                )
            if label in keep:
                instances.append(ActionInstance(start=s / duration, end=e / duration, label=label))
        out.append(AnnotationSet(video_id=vid, duration_seconds=float(duration), instances=instances))
    return out


def write_annotations(sets: list[AnnotationSet], path):
    """Serialize annotation sets back to seconds-based JSON."""
    videos = []
    for ann in sets:
        videos.append(
            {
                "video_id": ann.video_id,
                "duration_seconds": ann.duration_seconds,
                "instances": [
                    {
                        "start_seconds": inst.start * ann.duration_seconds,
                        "end_seconds": inst.end * ann.duration_seconds,
                        "label": inst.label,
                    }
                    for inst in ann.instances
                ],
            }
        )
    with open(path, "w") as fh:
        json.dump({"videos": videos}, fh, indent=2)
        fh.write("\n")
