"""Query-based action proposal generation and zero-shot temporal action
localization at desk scale."""

from .config import RunConfig, load_config
from .evaluation import EvalReport, evaluate, interpolated_ap, map_suite, recall_auc
from .fileio import (
    ActionInstance,
    AnnotationSet,
    ClassSplit,
    TextEmbeddings,
    VideoFeatures,
    read_annotations,
    read_features,
    read_split,
    read_text_embeddings,
    write_features,
    write_text_embeddings,
)
from .hungarian import Assignment, hungarian
from .losses import LossWeights, actionness_loss, build_mask, detection_loss, tiou, total_loss
from .model import ModelConfig, ProposalBatch, forward, init_params
from .optim import AdamW
from .roi import roi_align, roi_align_np
from .synth import SyntheticSpec, synth_generate
from .tensor import Tape, Tensor, backward, no_grad
from .zeroshot import Detection, classify, infer_video

__version__ = "0.1.0"
