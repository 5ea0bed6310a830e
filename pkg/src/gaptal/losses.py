"""Training losses: frame mask, actionness, temporal IoU, matching cost,
focal classification, detection loss, and the total objective.

The matching itself (cost matrix + assignment) runs on detached numpy
values; the loss terms are then rebuilt with tensor ops on the fixed
assignment so gradients flow only through the selected pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as tt
from .errors import ConfigError, ShapeError
from .fileio import ActionInstance
from .hungarian import Assignment, hungarian
from .tensor import Tensor

_LOG_CLAMP = 1e-7


@dataclass
class LossWeights:
    match_alpha: float = 5.0  # endpoint L1 weight in the matching cost
    match_beta: float = 2.0  # temporal IoU weight in the matching cost
    match_gamma: float = 2.0  # foreground-score weight in the matching cost
    w_cls: float = 3.0
    w_l1: float = 5.0
    w_tiou: float = 2.0
    lambda_ad: float = 3.0
    focal_alpha: float = 0.25
    focal_gamma: float = 2.0

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if value < 0:
                raise ConfigError(f"loss weight {name} must be non-negative, got {value}")


def build_mask(instances: list[ActionInstance], t: int) -> np.ndarray:
    """Foreground-background mask: entry i-1 is 1 iff i/t lies inside any
    instance interval (endpoints inclusive), for i = 1..t."""
    grid = np.arange(1, t + 1, dtype=np.float64) / t
    mask = np.zeros(t, dtype=np.float32)
    for inst in instances:
        mask[(grid >= inst.start) & (grid <= inst.end)] = 1.0
    return mask


def actionness_loss(logits: Tensor, mask: np.ndarray) -> Tensor:
    """Per-frame binary cross entropy against the mask, summed over frames."""
    if logits.shape != (len(mask),):
        raise ShapeError(f"actionness logits {logits.shape} vs mask length {len(mask)}")
    p = tt.clip(tt.sigmoid(logits), _LOG_CLAMP, 1.0 - _LOG_CLAMP)
    m = Tensor(np.asarray(mask, dtype=logits.dtype))
    ones = Tensor(np.ones(len(mask), dtype=logits.dtype))
    term = tt.mul(m, tt.log(p)) + tt.mul(ones - m, tt.log(ones - p))
    return tt.neg(tt.reduce_sum(term))


def tiou(p: tuple[float, float], q: tuple[float, float]) -> float:
    """Temporal IoU of two (start, end) intervals; 0 for an empty union."""
    inter = max(0.0, min(p[1], q[1]) - max(p[0], q[0]))
    union = (p[1] - p[0]) + (q[1] - q[0]) - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def tiou_tensor(pred: Tensor, target: tuple[float, float]) -> Tensor:
    """Differentiable temporal IoU of a predicted (start, end) pair against a
    fixed target interval. Predictions with start >= end yield exactly 0."""
    dtype = pred.dtype
    s, e = tt.take(pred, [0]), tt.take(pred, [1])
    ts = Tensor(np.asarray([target[0]], dtype=dtype))
    te = Tensor(np.asarray([target[1]], dtype=dtype))
    zero = Tensor(np.zeros(1, dtype=dtype))
    inter = tt.maximum(zero, tt.minimum(e, te) - tt.maximum(s, ts))
    union = (e - s) + (te - ts) - inter
    if pred.data[0] >= pred.data[1] or union.data[0] <= 0.0:
        return tt.reduce_sum(zero)
    return tt.reduce_sum(tt.div(inter, union))


def cost_matrix(
    proposals: np.ndarray,
    scores: np.ndarray,
    targets: list[tuple[float, float]],
    weights: LossWeights,
) -> np.ndarray:
    """Square matching cost over queries x padded targets.

    Entry (i, j) for a real target j is
    alpha * L1(p_i, t_j) - beta * tiou(p_i, t_j) - gamma * score_i,
    with L1 the mean absolute endpoint difference; padding columns are 0.
    """
    n_q = proposals.shape[0]
    if len(targets) > n_q:
        raise ShapeError(f"{len(targets)} targets exceed {n_q} queries; raise num_queries")
    cost = np.zeros((n_q, n_q), dtype=np.float64)
    for j, (ts, te) in enumerate(targets):
        l1 = 0.5 * (np.abs(proposals[:, 0] - ts) + np.abs(proposals[:, 1] - te))
        overlap = np.array([tiou((p[0], p[1]), (ts, te)) if p[0] < p[1] else 0.0 for p in proposals])
        cost[:, j] = weights.match_alpha * l1 - weights.match_beta * overlap - weights.match_gamma * scores
    return cost


def match(
    proposals: np.ndarray,
    scores: np.ndarray,
    targets: list[tuple[float, float]],
    weights: LossWeights,
) -> Assignment:
    cost = cost_matrix(proposals, scores, targets, weights)
    return hungarian(cost, num_real_targets=len(targets))


def focal_loss(score: Tensor, positive: bool, alpha_f: float, gamma_f: float) -> Tensor:
    """Focal binary loss on an already-sigmoided foreground probability."""
    p = tt.clip(score, _LOG_CLAMP, 1.0 - _LOG_CLAMP)
    one = Tensor(np.ones(p.shape, dtype=p.dtype))
    if positive:
        return tt.neg(tt.reduce_sum(alpha_f * tt.power(one - p, gamma_f) * tt.log(p)))
    return tt.neg(tt.reduce_sum((1.0 - alpha_f) * tt.power(p, gamma_f) * tt.log(one - p)))


def detection_loss(
    proposals: Tensor,
    scores: Tensor,
    targets: list[tuple[float, float]],
    weights: LossWeights,
    assignment: Assignment | None = None,
) -> tuple[Tensor, dict[str, float], Assignment]:
    """Set-prediction detection loss over one video.

    Classification (focal) is averaged over all queries; the endpoint L1 and
    IoU losses are averaged over matched pairs. Returns the weighted total,
    a per-term breakdown, and the assignment used (computable externally for
    gradient checks that need it frozen).
    """
    n_q = proposals.shape[0]
    dtype = proposals.dtype
    if assignment is None:
        assignment = match(proposals.data, scores.data, targets, weights)
    matched = dict(assignment.pairs)

    cls_terms = []
    for q in range(n_q):
        cls_terms.append(focal_loss(tt.take(scores, [q]), q in matched, weights.focal_alpha, weights.focal_gamma))
    l_cls = tt.div(
        tt.concat([t.reshape(1) for t in cls_terms], axis=0).sum(),
        Tensor(np.asarray(float(n_q), dtype=dtype)),
    )

    if matched:
        l1_terms, iou_terms = [], []
        one = Tensor(np.ones(1, dtype=dtype))
        for q, j in assignment.pairs:
            pred = tt.take(proposals, [q]).reshape(2)
            ts, te = targets[j]
            tgt = Tensor(np.asarray([ts, te], dtype=dtype))
            diff = pred - tgt
            l1_terms.append(tt.reduce_mean(tt.maximum(diff, tt.neg(diff))))
            iou_terms.append(tt.reduce_sum(one - tiou_tensor(pred, (ts, te))))
        k = Tensor(np.asarray(float(len(l1_terms)), dtype=dtype))
        l_l1 = tt.div(tt.concat([t.reshape(1) for t in l1_terms], axis=0).sum(), k)
        l_tiou = tt.div(tt.concat([t.reshape(1) for t in iou_terms], axis=0).sum(), k)
    else:
        l_l1 = Tensor(np.zeros((), dtype=dtype))
        l_tiou = Tensor(np.zeros((), dtype=dtype))

    total = weights.w_cls * l_cls + weights.w_l1 * l_l1 + weights.w_tiou * l_tiou
    breakdown = {
        "l_cls": float(l_cls.item()),
        "l_l1": float(l_l1.item()),
        "l_tiou": float(l_tiou.item()),
    }
    return total, breakdown, assignment


def total_loss(
    proposals: Tensor,
    scores: Tensor,
    actionness_logits: Tensor,
    targets: list[tuple[float, float]],
    mask: np.ndarray,
    weights: LossWeights,
    use_actionness: bool = True,
    assignment: Assignment | None = None,
) -> tuple[Tensor, dict[str, float]]:
    """Detection loss plus the weighted actionness term (when enabled)."""
    det, breakdown, _ = detection_loss(proposals, scores, targets, weights, assignment=assignment)
    if use_actionness and weights.lambda_ad != 0.0:
        l_ad = actionness_loss(actionness_logits, mask)
        breakdown["l_ad"] = float(l_ad.item())
        total = det + weights.lambda_ad * l_ad
    else:
        breakdown["l_ad"] = 0.0
        total = det
    breakdown["total"] = float(total.item())
    return total, breakdown
