"""Command-line interface: train, eval, infer, synth, gradcheck.

Every command takes --config and exits nonzero on any validation failure.
GAP_THREADS caps the evaluation/inference worker pool (default 1).
"""

import os

# pin BLAS threading before numpy loads so training stays deterministic
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from .config import ABLATIONS
from .errors import ConfigError, GaptalError


def _fail(exc):
    click.echo(f"error: {exc}", err=True)
    sys.exit(1)


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("GAP_THREADS", "1")))
    except ValueError:
        return 1


@click.group()
def main():
    """Query-based action proposal generation and zero-shot temporal action
    localization at desk scale."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", "out_dir", default="runs/train", type=click.Path())
@click.option("--seed", type=int, default=None, help="overrides the config seed")
@click.option("--ablation", type=click.Choice(ABLATIONS), default=None)
def train(config_path, out_dir, seed, ablation):
    """Train on the seen-class split and write checkpoints plus loss logs."""
    from .config import load_config
    from .report import write_train_figure
    from .train import train as run_training

    try:
        config = load_config(config_path, seed_override=seed)
        if ablation:
            config.apply_ablation(ablation)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(config.to_json() + "\n")
        artifacts = run_training(config, out, log=lambda m: click.echo(m, err=True))
        write_train_figure(artifacts.epoch_records, out / "loss_curve.png")
    except GaptalError as exc:
        _fail(exc)
    click.echo(f"checkpoints in {out_dir}: last.gapf, best.gapf")


def _load_eval_inputs(config):
    from .fileio import read_annotations, read_split

    config.data.require("annotations", "split")
    split = read_split(config.data.split)
    annotations = read_annotations(config.data.annotations, split, "test")
    durations = {a.video_id: a.duration_seconds for a in annotations}
    return split, annotations, durations


def _run_inference(config, checkpoint_path, split, durations, ablation=None):
    """Detections and category-agnostic proposals for every test video."""
    from .checkpoint import load_checkpoint
    from .fileio import read_features, read_text_embeddings

    if not checkpoint_path:
        raise ConfigError("--checkpoint is required unless --detections is given")
    config.data.require("features_dir", "text_embeddings")
    params, model_config = load_checkpoint(checkpoint_path)
    if ablation:
        # diagnostic override of the checkpoint's own switches
        model_config.use_rectifying = ablation == "full"
        model_config.use_actionness = ablation in ("full", "no_rectify")
    text = read_text_embeddings(config.data.text_embeddings).restricted_to(split.unseen)
    if text.embeddings.shape[1] != model_config.dim:
        raise ConfigError(
            f"checkpoint dim {model_config.dim} != text embedding dim {text.embeddings.shape[1]}"
        )
    features_dir = Path(config.data.features_dir)
    video_ids = sorted(durations)

    def infer_one(vid):
        from .zeroshot import infer_video_with_proposals

        path = features_dir / f"{vid}.gapf"
        if not path.exists():
            raise ConfigError(f"missing feature file for {vid!r}: {path}")
        frames = read_features(path).frames
        if frames.shape[1] != model_config.dim:
            raise ConfigError(
                f"checkpoint dim {model_config.dim} != feature dim {frames.shape[1]} for {vid!r}"
            )
        return infer_video_with_proposals(
            params, model_config, vid, frames, text, tau=config.eval.tau
        )

    workers = _worker_count()
    if workers == 1:
        results = [infer_one(vid) for vid in video_ids]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(infer_one, video_ids))

    detections, proposals = [], []
    for dets, props in results:
        detections.extend(dets)
        proposals.extend(props)
    return detections, proposals


@main.command("eval")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--checkpoint", "checkpoint_path", default=None, type=click.Path())
@click.option("--out", "out_dir", default="runs/eval", type=click.Path())
@click.option("--seed", type=int, default=None)
@click.option("--detections", "detections_path", default=None, type=click.Path(), help="evaluate an existing detection dump instead of running the model")
@click.option("--ablation", type=click.Choice(ABLATIONS), default=None, help="override the checkpoint's component switches")
def evaluate_cmd(config_path, checkpoint_path, out_dir, seed, detections_path, ablation):
    """Evaluate on the unseen-class split: mAP grid, AR@AN, AUC, mIoU."""
    from .config import load_config
    from .evaluation import evaluate
    from .report import format_table, write_eval_report
    from .zeroshot import read_detection_dump, write_detection_dump

    try:
        config = load_config(config_path, seed_override=seed)
        split, annotations, durations = _load_eval_inputs(config)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if detections_path:
            detections = read_detection_dump(detections_path, durations)
            proposals = detections
        else:
            detections, proposals = _run_inference(
                config, checkpoint_path, split, durations, ablation=ablation
            )
            write_detection_dump(detections, durations, out / "detections.json")
        report = evaluate(
            detections,
            proposals,
            annotations,
            config.eval.map_iou_grid,
            config.eval.tiou_grid,
            config.eval.an_grid,
            config.eval.an_max,
        )
        write_eval_report(report, out)
    except GaptalError as exc:
        _fail(exc)
    click.echo(format_table(report), nl=False)
    click.echo(f"report written to {out_dir}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path())
@click.option("--out", "out_dir", default="runs/infer", type=click.Path())
@click.option("--seed", type=int, default=None)
def infer(config_path, checkpoint_path, out_dir, seed):
    """Run detection over the test videos and write the dump JSON."""
    from .config import load_config
    from .zeroshot import write_detection_dump

    try:
        config = load_config(config_path, seed_override=seed)
        split, _, durations = _load_eval_inputs(config)
        detections, _ = _run_inference(config, checkpoint_path, split, durations)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_detection_dump(detections, durations, out / "detections.json")
    except GaptalError as exc:
        _fail(exc)
    click.echo(f"wrote {out / 'detections.json'}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", "out_dir", default="runs/synth", type=click.Path())
@click.option("--seed", type=int, default=None, help="overrides synth.seed from the config")
def synth(config_path, out_dir, seed):
    """Materialize the synthetic dataset described by the config."""
    from .config import load_config
    from .fileio import write_annotations, write_features, write_split, write_text_embeddings
    from .synth import synth_generate

    try:
        config = load_config(config_path)
        spec = config.synth
        if seed is not None:
            spec.seed = seed
        features, annotations, text, split = synth_generate(spec)
        out = Path(out_dir)
        (out / "features").mkdir(parents=True, exist_ok=True)
        for vf in features:
            write_features(vf, out / "features" / f"{vf.video_id}.gapf")
        write_annotations(annotations, out / "annotations.json")
        write_split(split, out / "split.json")
        write_text_embeddings(text, out / "text_embeddings.gapf")
    except GaptalError as exc:
        _fail(exc)
    click.echo(
        f"wrote {len(features)} videos, {len(text.class_names)} classes "
        f"({len(split.seen)} seen / {len(split.unseen)} unseen) to {out_dir}"
    )


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
@click.option("--tolerance", type=float, default=1e-4, show_default=True)
def gradcheck(config_path, seed, tolerance):
    """Finite-difference audit of every loss term and model block."""
    from .config import load_config
    from .gradsuite import run_full_suite

    try:
        config = load_config(config_path, seed_override=seed)
        results = run_full_suite(tolerance=tolerance, seed=config.seed)
    except GaptalError as exc:
        _fail(exc)
    failed = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        click.echo(f"{r.name:32s} max_rel_err {r.max_rel_error:.3e}  {status}")
        failed += not r.passed
    if failed:
        _fail(f"{failed} gradient check(s) exceeded tolerance {tolerance}")
    click.echo(f"all {len(results)} gradient checks within {tolerance}")


if __name__ == "__main__":
    main()
