"""Finite-difference audit of every loss term and every model block.

Runs on a micro configuration in float64. The two discrete choices inside
the objective are pinned before differentiation, exactly as the analytic
backward treats them: the bipartite assignment (fixed permutation) and the
gradient-stopped proposal pre-pass (fixed pooling coordinates).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import losses, model
from .fileio import ActionInstance
from .gradcheck import check_gradients
from .losses import LossWeights
from .model import ModelConfig
from .tensor import Tensor

MICRO_CONFIG = ModelConfig(
    dim=16,
    num_queries=4,
    encoder_layers=1,
    decoder_layers=1,
    attention_heads=4,
    roi_bins=8,
    dropout=0.0,
)
MICRO_FRAMES = 8
MICRO_TARGETS = [(0.1, 0.35), (0.55, 0.9)]  # N_gt = 2


@dataclass
class GradCheckResult:
    name: str
    max_rel_error: float
    passed: bool


def _block_of(param_name: str) -> str:
    head = param_name.split(".", 1)[0]
    return {"gen": "generation_head", "cls": "classification_head"}.get(head, head)


def run_loss_term_checks(tolerance: float = 1e-4, seed: int = 0) -> list[GradCheckResult]:
    rng = np.random.default_rng(seed)
    weights = LossWeights()
    results = []

    mask = losses.build_mask([ActionInstance(s, e, "x") for s, e in MICRO_TARGETS], MICRO_FRAMES)
    logits = Tensor(rng.normal(size=MICRO_FRAMES), requires_grad=True, dtype=np.float64)
    errs = check_gradients(lambda p: losses.actionness_loss(p["a"], mask), {"a": logits})
    results.append(_result("loss.actionness", errs, tolerance))

    scores = Tensor(rng.uniform(0.2, 0.8, 4), requires_grad=True, dtype=np.float64)
    errs = check_gradients(
        lambda p: losses.focal_loss(p["s"], True, weights.focal_alpha, weights.focal_gamma)
        + losses.focal_loss(p["s"], False, weights.focal_alpha, weights.focal_gamma),
        {"s": scores},
    )
    results.append(_result("loss.focal", errs, tolerance))

    pred = Tensor(np.array([0.2, 0.6]), requires_grad=True, dtype=np.float64)
    errs = check_gradients(lambda p: losses.tiou_tensor(p["x"], (0.3, 0.8)), {"x": pred})
    results.append(_result("loss.tiou", errs, tolerance))

    raw_p = np.sort(rng.uniform(0.05, 0.95, (4, 2)), axis=1)
    raw_s = rng.uniform(0.2, 0.8, 4)
    frozen = losses.match(raw_p, raw_s, MICRO_TARGETS, weights)
    params = {
        "p": Tensor(raw_p, requires_grad=True, dtype=np.float64),
        "s": Tensor(raw_s, requires_grad=True, dtype=np.float64),
    }
    errs = check_gradients(
        lambda p: losses.detection_loss(p["p"], p["s"], MICRO_TARGETS, weights, assignment=frozen)[0],
        params,
        max_coords=64,
    )
    results.append(_result("loss.detection", errs, tolerance))

    params["a"] = Tensor(rng.normal(size=MICRO_FRAMES), requires_grad=True, dtype=np.float64)
    errs = check_gradients(
        lambda p: losses.total_loss(
            p["p"], p["s"], p["a"], MICRO_TARGETS, mask, weights, assignment=frozen
        )[0],
        params,
        max_coords=64,
    )
    results.append(_result("loss.total", errs, tolerance))
    return results


def run_model_block_checks(
    tolerance: float = 1e-4,
    seed: int = 0,
    max_coords: int = 12,
    config: ModelConfig | None = None,
    h: float = 1e-5,
) -> list[GradCheckResult]:
    config = config or MICRO_CONFIG
    rng = np.random.default_rng(seed)
    weights = LossWeights()
    params32 = model.init_params(config, seed=seed)
    params = model.params_to_float64(params32)
    x = Tensor(rng.normal(size=(MICRO_FRAMES, config.dim)), dtype=np.float64)
    mask = losses.build_mask([ActionInstance(s, e, "x") for s, e in MICRO_TARGETS], MICRO_FRAMES)

    # pin both discrete choices at the base point
    base = model.forward(params, config, x)
    frozen_prepass = base.prepass_proposals
    frozen_assignment = losses.match(
        base.proposals, base.foreground_scores, MICRO_TARGETS, weights
    )

    def loss_fn(p):
        batch = model.forward(p, config, x, prepass_override=frozen_prepass)
        total, _ = losses.total_loss(
            batch.proposals_t,
            batch.scores_t,
            batch.actionness_t,
            MICRO_TARGETS,
            mask,
            weights,
            use_actionness=config.use_actionness,
            assignment=frozen_assignment,
        )
        return total

    errors = check_gradients(loss_fn, params, h=h, max_coords=max_coords, seed=seed)
    by_block: dict[str, float] = {}
    for name, err in errors.items():
        block = _block_of(name)
        by_block[block] = max(by_block.get(block, 0.0), err)
    return [
        GradCheckResult(f"model.{block}", err, err < tolerance)
        for block, err in sorted(by_block.items())
    ]


def run_full_suite(tolerance: float = 1e-4, seed: int = 0) -> list[GradCheckResult]:
    return run_loss_term_checks(tolerance, seed) + run_model_block_checks(tolerance, seed)


def _result(name: str, errs: dict[str, float], tolerance: float) -> GradCheckResult:
    worst = max(errs.values())
    return GradCheckResult(name, worst, worst < tolerance)
