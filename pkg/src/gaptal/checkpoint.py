"""Model checkpoints in the GAPF container (kind 2).

The payload is every parameter flattened to float32 and concatenated in
manifest order; the sibling "<path>.json" manifest lists tensor names and
shapes plus the model configuration, so a checkpoint alone is enough to
rebuild the network. Round trips are bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from .errors import FormatError
from .fileio import KIND_CHECKPOINT, _read_gapf, _write_gapf, manifest_path
from .model import ModelConfig
from .tensor import Tensor


def save_checkpoint(params: dict[str, Tensor], config: ModelConfig, path):
    names = sorted(params)
    flat = [np.ascontiguousarray(params[n].data, dtype=np.float32).reshape(-1) for n in names]
    payload = np.concatenate(flat) if flat else np.zeros(0, dtype=np.float32)
    _write_gapf(path, payload.reshape(-1, 1), KIND_CHECKPOINT)
    manifest = {
        "model_config": asdict(config),
        "tensors": [{"name": n, "shape": list(params[n].shape)} for n in names],
    }
    with open(manifest_path(path), "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def load_checkpoint(path) -> tuple[dict[str, Tensor], ModelConfig]:
    payload, _ = _read_gapf(path, expect_kind=KIND_CHECKPOINT)
    payload = payload.reshape(-1)
    mpath = manifest_path(path)
    if not mpath.exists():
        raise FormatError(f"{path}: missing checkpoint manifest {mpath}")
    with open(mpath) as fh:
        manifest = json.load(fh)
    try:
        config = ModelConfig(**manifest["model_config"])
        entries = manifest["tensors"]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{mpath}: malformed checkpoint manifest ({exc})") from exc
    params: dict[str, Tensor] = {}
    offset = 0
    for entry in entries:
        shape = tuple(int(s) for s in entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        if offset + count > payload.size:
            raise FormatError(f"{path}: payload shorter than manifest claims at {entry['name']}")
        params[entry["name"]] = Tensor(
            payload[offset : offset + count].reshape(shape).copy(), requires_grad=True
        )
        offset += count
    if offset != payload.size:
        raise FormatError(f"{path}: {payload.size - offset} unclaimed payload values")
    return params, config
