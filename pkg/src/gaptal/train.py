"""Training loop: per-video forward/backward with gradient accumulation,
JSON-line loss logs, and best/last checkpointing.

One optimizer step covers `batch_size` videos (videos have heterogeneous
lengths, so accumulation stands in for batched attention). Single-threaded
and fully deterministic for a fixed config and seed: the log and both
checkpoints come out byte-identical across runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import losses, model
from .checkpoint import save_checkpoint
from .config import RunConfig
from .errors import ConfigError, NumericError
from .evaluation import recall_auc
from .fileio import AnnotationSet, VideoFeatures, read_annotations, read_features, read_split
from .optim import AdamW
from .tensor import Tape, Tensor, backward
from .zeroshot import Detection


@dataclass
class TrainArtifacts:
    last_checkpoint: Path
    best_checkpoint: Path
    log_path: Path
    epoch_records: list[dict]


def load_training_set(config: RunConfig, log=print) -> tuple[list[VideoFeatures], dict[str, AnnotationSet]]:
    """Features and seen-class annotations; videos without any training
    instance are dropped here (they stay in the evaluation set)."""
    config.data.require("features_dir", "annotations", "split")
    split = read_split(config.data.split)
    annotations = read_annotations(config.data.annotations, split, "train")
    features_dir = Path(config.data.features_dir)
    videos, ann_by_id = [], {}
    for ann in sorted(annotations, key=lambda a: a.video_id):
        if not ann.instances:
            log(f"dropping video {ann.video_id!r} from training: no seen-class instances")
            continue
        path = features_dir / f"{ann.video_id}.gapf"
        if not path.exists():
            raise ConfigError(f"missing feature file for {ann.video_id!r}: {path}")
        vf = read_features(path)
        vf.video_id = ann.video_id
        videos.append(vf)
        ann_by_id[ann.video_id] = ann
    if not videos:
        raise ConfigError("training set is empty after filtering to seen classes")
    return videos, ann_by_id


def _video_loss(params, config: RunConfig, vf: VideoFeatures, ann: AnnotationSet, dropout_rng):
    batch = model.forward(params, config.model, Tensor(vf.frames), rng=dropout_rng)
    targets = [(inst.start, inst.end) for inst in ann.instances]
    mask = losses.build_mask(ann.instances, vf.num_frames)
    return losses.total_loss(
        batch.proposals_t,
        batch.scores_t,
        batch.actionness_t,
        targets,
        mask,
        config.loss,
        use_actionness=config.model.use_actionness,
    )


def _validation_ar(params, config: RunConfig, videos, ann_by_id) -> float:
    """Category-agnostic AR over the held-out slice, averaged over an_grid."""
    proposals: list[Detection] = []
    for vf in videos:
        batch = model.forward(params, config.model, Tensor(vf.frames))
        raw = batch.proposals
        k = np.argsort(-batch.foreground_scores, kind="stable")
        for i in k:
            s, e = float(min(raw[i])), float(max(raw[i]))
            proposals.append(Detection(vf.video_id, s, e, "", float(batch.foreground_scores[i])))
    anns = [ann_by_id[vf.video_id] for vf in videos]
    ar_at_an, _, _, _ = recall_auc(
        proposals, anns, config.eval.tiou_grid, config.eval.an_grid, config.eval.an_max
    )
    return float(np.mean(list(ar_at_an.values())))


def train(config: RunConfig, out_dir, log=print) -> TrainArtifacts:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    videos, ann_by_id = load_training_set(config, log=log)

    # every k-th video is held out of training and drives checkpoint selection
    if len(videos) > config.optim.holdout_every:
        holdout = videos[:: config.optim.holdout_every]
        videos = [vf for i, vf in enumerate(videos) if i % config.optim.holdout_every != 0]
    else:
        holdout = videos
    log(f"training on {len(videos)} videos, validating recall on {len(holdout)} held-out videos")

    params = model.init_params(config.model, seed=config.seed)
    opt = AdamW(
        params,
        learning_rate=config.optim.learning_rate,
        weight_decay=config.optim.weight_decay,
    )
    shuffle_rng = np.random.default_rng(config.seed)
    dropout_rng = np.random.default_rng(config.seed + 1) if config.model.dropout > 0 else None

    log_path = out / "train_log.jsonl"
    last_path = out / "last.gapf"
    best_path = out / "best.gapf"
    best_ar = -1.0
    records: list[dict] = []

    with open(log_path, "w") as log_fh:
        for epoch in range(config.optim.epochs):
            order = shuffle_rng.permutation(len(videos))
            sums = {"total": 0.0, "l_cls": 0.0, "l_l1": 0.0, "l_tiou": 0.0, "l_ad": 0.0}
            steps = 0
            opt.zero_grad()
            pending = 0
            for rank, idx in enumerate(order):
                vf = videos[idx]
                with Tape() as tape:
                    loss, breakdown = _video_loss(params, config, vf, ann_by_id[vf.video_id], dropout_rng)
                    scaled = loss * (1.0 / config.optim.batch_size)
                if not np.isfinite(breakdown["total"]):
                    raise NumericError(
                        f"non-finite loss at epoch {epoch}, video {vf.video_id!r}: {breakdown}"
                    )
                backward(scaled, tape)
                pending += 1
                for key in sums:
                    sums[key] += breakdown[key]
                if pending == config.optim.batch_size or rank == len(order) - 1:
                    opt.step()
                    opt.zero_grad()
                    steps += 1
                    pending = 0

            record = {
                "epoch": epoch,
                "loss": sums["total"] / len(videos),
                "l_cls": sums["l_cls"] / len(videos),
                "l_l1": sums["l_l1"] / len(videos),
                "l_tiou": sums["l_tiou"] / len(videos),
                "l_ad": sums["l_ad"] / len(videos),
                "optimizer_steps": steps,
            }
            is_eval_epoch = (epoch + 1) % config.optim.eval_every == 0 or epoch == config.optim.epochs - 1
            if is_eval_epoch:
                val_ar = _validation_ar(params, config, holdout, ann_by_id)
                record["val_ar"] = val_ar
                if val_ar > best_ar:
                    best_ar = val_ar
                    save_checkpoint(params, config.model, best_path)
            records.append(record)
            log_fh.write(_stable_json_line(record))
            log(f"epoch {epoch}: loss {record['loss']:.4f}" + (f" val_ar {record.get('val_ar', float('nan')):.4f}" if is_eval_epoch else ""))

    save_checkpoint(params, config.model, last_path)
    if best_ar < 0:
        save_checkpoint(params, config.model, best_path)
    return TrainArtifacts(
        last_checkpoint=last_path,
        best_checkpoint=best_path,
        log_path=log_path,
        epoch_records=records,
    )


def _stable_json_line(record: dict) -> str:
    return json.dumps(record, sort_keys=True) + "\n"


def quiet(*_args, **_kwargs):
    """Log sink that swallows progress output."""
