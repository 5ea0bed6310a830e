"""Run configuration: a single JSON document drives every command.

Every field has a default except the dataset paths. A config plus a seed
fully determines a run.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigError
from .losses import LossWeights
from .model import ModelConfig
from .synth import SyntheticSpec

ABLATIONS = ("full", "no_rectify", "no_rectify_no_actionness")


@dataclass
class DataPaths:
    features_dir: str = ""
    annotations: str = ""
    split: str = ""
    text_embeddings: str = ""

    def require(self, *fields: str):
        for name in fields:
            value = getattr(self, name)
            if not value:
                raise ConfigError(f"data.{name} is required for this command")
            if not Path(value).exists():
                raise ConfigError(f"data.{name} does not exist: {value}")


@dataclass
class OptimConfig:
    learning_rate: float = 1e-4
    weight_decay: float = 1e-4
    batch_size: int = 16  # gradient-accumulation count, one video per step
    epochs: int = 50
    eval_every: int = 5  # epochs between held-out validation passes
    holdout_every: int = 5  # every k-th training video joins the validation slice

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("batch_size and epochs must be >= 1")


@dataclass
class EvalConfig:
    map_iou_grid: list[float] = field(default_factory=lambda: [0.3, 0.4, 0.5, 0.6, 0.7])
    tiou_grid: list[float] = field(default_factory=lambda: [0.5 + 0.05 * i for i in range(11)])
    an_grid: list[int] = field(default_factory=lambda: [10, 25, 40])
    an_max: int = 40
    tau: float = 0.01

    def __post_init__(self):
        for name in ("map_iou_grid", "tiou_grid", "an_grid"):
            grid = getattr(self, name)
            if not grid:
                raise ConfigError(f"eval.{name} must be non-empty")
            if sorted(grid) != list(grid):
                raise ConfigError(f"eval.{name} must be sorted ascending")
        if self.an_max < 1:
            raise ConfigError("eval.an_max must be >= 1")


@dataclass
class RunConfig:
    data: DataPaths = field(default_factory=DataPaths)
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    optim: OptimConfig = field(default_factory=OptimConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    synth: SyntheticSpec = field(default_factory=SyntheticSpec)
    seed: int = 0

    def apply_ablation(self, name: str):
        if name not in ABLATIONS:
            raise ConfigError(f"unknown ablation {name!r}, expected one of {ABLATIONS}")
        self.model.use_rectifying = name == "full"
        self.model.use_actionness = name in ("full", "no_rectify")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def _build(cls, doc: dict, context: str):
    if not isinstance(doc, dict):
        raise ConfigError(f"config section '{context}' must be an object")
    valid = {f for f in cls.__dataclass_fields__}
    unknown = set(doc) - valid
    if unknown:
        raise ConfigError(f"unknown keys in config section '{context}': {sorted(unknown)}")
    try:
        return cls(**doc)
    except TypeError as exc:
        raise ConfigError(f"bad config section '{context}': {exc}") from exc


def load_config(path, seed_override: int | None = None) -> RunConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")

    sections = {
        "data": (DataPaths, "data"),
        "model": (ModelConfig, "model"),
        "loss": (LossWeights, "loss"),
        "optim": (OptimConfig, "optim"),
        "eval": (EvalConfig, "eval"),
        "synth": (SyntheticSpec, "synth"),
    }
    unknown = set(doc) - set(sections) - {"seed"}
    if unknown:
        raise ConfigError(f"{path}: unknown top-level keys {sorted(unknown)}")
    kwargs = {}
    for key, (cls, ctx) in sections.items():
        if key in doc:
            kwargs[key] = _build(cls, doc[key], ctx)
    config = RunConfig(**kwargs, seed=int(doc.get("seed", 0)))
    if seed_override is not None:
        config.seed = int(seed_override)
    return config
