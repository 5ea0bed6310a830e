"""Zero-shot classification of category-agnostic proposals and assembly of
final scored detections.

Proposal intervals are pooled from the raw frame features, averaged over the
bins, and scored by softmax-over-classes of cosine similarity to the text
embeddings at a low temperature. The final ranking score of a detection is
its foreground probability times its selected class probability.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, ValidationError
from .fileio import TextEmbeddings
from .model import ModelConfig, ProposalBatch, forward
from .roi import roi_align_np
from .tensor import Tensor


@dataclass
class Detection:
    video_id: str
    start: float  # normalized
    end: float
    label: str
    score: float


def classify(
    frames: np.ndarray,
    proposals: np.ndarray,
    text: TextEmbeddings,
    num_bins: int,
    tau: float = 0.01,
) -> tuple[list[str], np.ndarray]:
    """Labels and (N_q, N_c) class probabilities for each proposal.

    Zero-norm pooled features get cosine 0 against every class, which makes
    their softmax uniform.
    """
    if frames.shape[1] != text.embeddings.shape[1]:
        raise ShapeError(
            f"feature dim {frames.shape[1]} != text embedding dim {text.embeddings.shape[1]}"
        )
    bins = roi_align_np(frames, proposals, num_bins)  # (N_q, L, D)
    pooled = bins.mean(axis=1)  # (N_q, D)

    norms = np.linalg.norm(pooled, axis=1, keepdims=True)
    safe = np.where(norms > 0.0, norms, 1.0)
    unit_pooled = pooled / safe
    unit_pooled[norms[:, 0] == 0.0] = 0.0
    unit_text = text.embeddings / np.linalg.norm(text.embeddings, axis=1, keepdims=True)
    cos = unit_pooled @ unit_text.T  # (N_q, N_c)

    logits = cos / tau
    logits -= logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    probs = e / e.sum(axis=1, keepdims=True)
    labels = [text.class_names[i] for i in probs.argmax(axis=1)]
    return labels, probs


def infer_video_with_proposals(
    params,
    config: ModelConfig,
    video_id: str,
    frames: np.ndarray,
    text: TextEmbeddings,
    tau: float = 0.01,
) -> tuple[list[Detection], list[Detection]]:
    """Classified detections plus the category-agnostic proposals behind
    them (labelled "", scored by foreground probability alone)."""
    batch: ProposalBatch = forward(params, config, Tensor(frames.astype(np.float32)))
    raw = batch.proposals
    ordered = np.stack([np.minimum(raw[:, 0], raw[:, 1]), np.maximum(raw[:, 0], raw[:, 1])], axis=1)
    labels, probs = classify(frames, ordered, text, config.roi_bins, tau=tau)
    fg = batch.foreground_scores
    class_prob = probs[np.arange(len(labels)), probs.argmax(axis=1)]
    final = fg * class_prob
    order = np.argsort(-final, kind="stable")
    detections = [
        Detection(
            video_id=video_id,
            start=float(ordered[i, 0]),
            end=float(ordered[i, 1]),
            label=labels[i],
            score=float(final[i]),
        )
        for i in order
    ]
    fg_order = np.argsort(-fg, kind="stable")
    proposals = [
        Detection(
            video_id=video_id,
            start=float(ordered[i, 0]),
            end=float(ordered[i, 1]),
            label="",
            score=float(fg[i]),
        )
        for i in fg_order
    ]
    return detections, proposals


def infer_video(
    params,
    config: ModelConfig,
    video_id: str,
    frames: np.ndarray,
    text: TextEmbeddings,
    tau: float = 0.01,
) -> list[Detection]:
    """All N_q detections for one video, sorted by score descending.

    No suppression and no thresholding: every query's proposal is emitted.
    Rows with start > end are emitted with their endpoints swapped.
    """
    detections, _ = infer_video_with_proposals(params, config, video_id, frames, text, tau=tau)
    return detections


def write_detection_dump(detections: list[Detection], durations: dict[str, float], path):
    """Detection dump JSON with segments converted back to seconds."""
    results: dict[str, list] = {}
    for det in detections:
        if det.video_id not in durations:
            raise ValidationError(f"no duration known for video {det.video_id!r}")
        d = durations[det.video_id]
        results.setdefault(det.video_id, []).append(
            {
                "segment_seconds": [det.start * d, det.end * d],
                "label": det.label,
                "score": det.score,
            }
        )
    with open(path, "w") as fh:
        json.dump({"results": results}, fh, indent=2)
        fh.write("\n")


def read_detection_dump(path, durations: dict[str, float]) -> list[Detection]:
    with open(path) as fh:
        doc = json.load(fh)
    if "results" not in doc or not isinstance(doc["results"], dict):
        raise ValidationError(f"{path}: detection dump needs a 'results' object")
    out = []
    for vid, entries in doc["results"].items():
        if vid not in durations:
            raise ValidationError(f"{path}: unknown video {vid!r} in detection dump")
        d = durations[vid]
        for entry in entries:
            seg = entry.get("segment_seconds")
            if not isinstance(seg, list) or len(seg) != 2:
                raise ValidationError(f"{path}: segment_seconds must be [start, end]")
            out.append(
                Detection(
                    video_id=vid,
                    start=float(seg[0]) / d,
                    end=float(seg[1]) / d,
                    label=str(entry.get("label")),
                    score=float(entry.get("score", 0.0)),
                )
            )
    return out
