"""Localization metrics: interpolated AP and mAP over IoU grids, average
recall at proposal budgets, AUC of the recall curve, and mean best IoU.

All matching is greedy in score order with one ground truth per detection,
the convention of the standard benchmark evaluation protocol. Classes with
no ground truth are excluded from mAP averaging.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fileio import AnnotationSet
from .losses import tiou
from .zeroshot import Detection


@dataclass
class EvalReport:
    map_per_iou: dict[float, float] = field(default_factory=dict)
    average_map: float = 0.0
    ar_at_an: dict[int, float] = field(default_factory=dict)
    auc: float = 0.0
    miou: float = 0.0
    per_class_ap: dict[str, dict[float, float]] = field(default_factory=dict)
    ar_curve: list[float] = field(default_factory=list)  # AR at AN = 1..an_max

    def to_dict(self) -> dict:
        return {
            "map_per_iou": {f"{k:g}": v for k, v in self.map_per_iou.items()},
            "average_map": self.average_map,
            "ar_at_an": {str(k): v for k, v in self.ar_at_an.items()},
            "auc": self.auc,
            "miou": self.miou,
            "per_class_ap": {
                c: {f"{k:g}": v for k, v in table.items()} for c, table in self.per_class_ap.items()
            },
        }


def _greedy_match_flags(
    detections: list[tuple[str, float, float, float]],
    ground_truth: list[tuple[str, float, float]],
    iou_threshold: float,
) -> list[bool]:
    """True/false positive flags in score order (stable on ties)."""
    order = sorted(range(len(detections)), key=lambda i: -detections[i][3])
    by_video: dict[str, list[int]] = {}
    for j, (vid, _, _) in enumerate(ground_truth):
        by_video.setdefault(vid, []).append(j)
    matched = np.zeros(len(ground_truth), dtype=bool)
    flags = []
    for i in order:
        vid, s, e, _ = detections[i]
        best_iou, best_j = 0.0, -1
        for j in by_video.get(vid, ()):
            if matched[j]:
                continue
            overlap = tiou((s, e), ground_truth[j][1:])
            if overlap >= iou_threshold and overlap > best_iou:
                best_iou, best_j = overlap, j
        if best_j >= 0:
            matched[best_j] = True
            flags.append(True)
        else:
            flags.append(False)
    return flags


def interpolated_ap(
    detections: list[tuple[str, float, float, float]],
    ground_truth: list[tuple[str, float, float]],
    iou_threshold: float,
) -> float:
    """Average precision for one class from the interpolated PR curve.

    detections: (video_id, start, end, score); ground_truth: (video_id,
    start, end). Empty ground truth is defined as AP 0 (the caller excludes
    such classes from averaging).
    """
    if not ground_truth:
        return 0.0
    if not detections:
        return 0.0
    flags = np.asarray(_greedy_match_flags(detections, ground_truth, iou_threshold))
    tp = np.cumsum(flags)
    fp = np.cumsum(~flags)
    recall = tp / len(ground_truth)
    precision = tp / (tp + fp)
    # precision envelope, integrated over the recall steps at each positive
    mprec = np.concatenate([[0.0], precision, [0.0]])
    mrec = np.concatenate([[0.0], recall, [1.0]])
    for i in range(len(mprec) - 2, -1, -1):
        mprec[i] = max(mprec[i], mprec[i + 1])
    steps = np.where(mrec[1:] != mrec[:-1])[0] + 1
    return float(np.sum((mrec[steps] - mrec[steps - 1]) * mprec[steps]))


def map_suite(
    detections: list[Detection],
    annotations: list[AnnotationSet],
    iou_grid: list[float],
) -> tuple[dict[float, float], float, dict[str, dict[float, float]]]:
    """mAP at each threshold over classes with at least one ground truth."""
    gt_by_class: dict[str, list[tuple[str, float, float]]] = {}
    for ann in annotations:
        for inst in ann.instances:
            gt_by_class.setdefault(inst.label, []).append((ann.video_id, inst.start, inst.end))
    det_by_class: dict[str, list[tuple[str, float, float, float]]] = {}
    for det in detections:
        det_by_class.setdefault(det.label, []).append((det.video_id, det.start, det.end, det.score))

    per_class: dict[str, dict[float, float]] = {}
    for cls in sorted(gt_by_class):
        per_class[cls] = {
            thr: interpolated_ap(det_by_class.get(cls, []), gt_by_class[cls], thr)
            for thr in iou_grid
        }
    map_per_iou = {
        thr: float(np.mean([per_class[c][thr] for c in per_class])) if per_class else 0.0
        for thr in iou_grid
    }
    average_map = float(np.mean(list(map_per_iou.values()))) if map_per_iou else 0.0
    return map_per_iou, average_map, per_class


def _recall_at(
    proposals_by_video: dict[str, list[tuple[float, float, float]]],
    gt_by_video: dict[str, list[tuple[float, float]]],
    budget: int,
    tiou_grid: list[float],
) -> float:
    """Mean over the tIoU grid of the matched ground-truth fraction when
    each video keeps its `budget` highest-scored proposals."""
    total_gt = sum(len(v) for v in gt_by_video.values())
    if total_gt == 0:
        return 0.0
    recalls = []
    for thr in tiou_grid:
        matched_total = 0
        for vid, gts in gt_by_video.items():
            props = proposals_by_video.get(vid, [])[:budget]
            taken = [False] * len(gts)
            for s, e, _ in props:
                best_iou, best_j = 0.0, -1
                for j, gt in enumerate(gts):
                    if taken[j]:
                        continue
                    overlap = tiou((s, e), gt)
                    if overlap >= thr and overlap > best_iou:
                        best_iou, best_j = overlap, j
                if best_j >= 0:
                    taken[best_j] = True
                    matched_total += 1
        recalls.append(matched_total / total_gt)
    return float(np.mean(recalls))


def recall_auc(
    proposals: list[Detection],
    annotations: list[AnnotationSet],
    tiou_grid: list[float],
    an_grid: list[int],
    an_max: int,
) -> tuple[dict[int, float], float, float, list[float]]:
    """AR at the reported budgets, AUC of AR over budgets 1..an_max
    (trapezoidal, normalized by an_max), mean best IoU of ground truth
    against the top-an_max proposals, and the full AR curve. Videos
    without ground truth are skipped for recall."""
    proposals_by_video: dict[str, list[tuple[float, float, float]]] = {}
    for det in proposals:
        proposals_by_video.setdefault(det.video_id, []).append((det.start, det.end, det.score))
    for vid in proposals_by_video:
        proposals_by_video[vid].sort(key=lambda p: -p[2])

    gt_by_video = {
        ann.video_id: [(inst.start, inst.end) for inst in ann.instances]
        for ann in annotations
        if ann.instances
    }

    ar_at_an = {an: _recall_at(proposals_by_video, gt_by_video, an, tiou_grid) for an in an_grid}

    budgets = np.arange(1, an_max + 1)
    curve = np.array([_recall_at(proposals_by_video, gt_by_video, int(b), tiou_grid) for b in budgets])
    auc = float(np.trapezoid(curve, budgets) / an_max) if an_max > 1 else 0.0

    best_ious = []
    for vid, gts in gt_by_video.items():
        props = proposals_by_video.get(vid, [])[:an_max]
        for gt in gts:
            best = max((tiou((s, e), gt) for s, e, _ in props), default=0.0)
            best_ious.append(best)
    miou = float(np.mean(best_ious)) if best_ious else 0.0
    return ar_at_an, auc, miou, [float(r) for r in curve]


def evaluate(
    detections: list[Detection],
    proposals: list[Detection],
    annotations: list[AnnotationSet],
    iou_grid: list[float],
    tiou_grid: list[float],
    an_grid: list[int],
    an_max: int,
) -> EvalReport:
    """Full report: classified detections drive mAP, category-agnostic
    proposals drive AR/AUC/mIoU."""
    map_per_iou, average_map, per_class = map_suite(detections, annotations, iou_grid)
    ar_at_an, auc, miou, curve = recall_auc(proposals, annotations, tiou_grid, an_grid, an_max)
    return EvalReport(
        map_per_iou=map_per_iou,
        average_map=average_map,
        ar_at_an=ar_at_an,
        auc=auc,
        miou=miou,
        per_class_ap=per_class,
        ar_curve=curve,
    )
