"""The proposal generator network.

Pipeline: sinusoidal position embedding + pre-norm transformer encoder over
the frame features, a conv actionness head, a query decoder (self-attention,
cross-attention to the encoded frames, feedforward), a gradient-stopped
proposal pre-pass feeding temporal RoIAlign on the raw input features, a
static-dynamic rectifier that injects the pooled bins back into the queries,
and shared generation/classification heads.

Parameters live in a flat name -> Tensor dict so the optimizer and the
checkpoint format can treat them uniformly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import tensor as tt
from .errors import ConfigError, ShapeError
from .roi import roi_align
from .tensor import Tensor

RECTIFY_MODES = ("cross_attention", "mean", "max")


@dataclass
class ModelConfig:
    dim: int = 512
    num_queries: int = 40
    encoder_layers: int = 2
    decoder_layers: int = 5
    attention_heads: int = 8
    ffn_multiplier: int = 4
    roi_bins: int = 16
    dropout: float = 0.1
    use_rectifying: bool = True
    use_actionness: bool = True
    rectify_aggregation: str = "cross_attention"
    rectify_joint_bins: bool = False  # attend over all queries' bins instead of per-query

    def __post_init__(self):
        if self.dim % self.attention_heads != 0:
            raise ConfigError(f"dim {self.dim} not divisible by {self.attention_heads} heads")
        if self.roi_bins < 1 or self.num_queries < 1:
            raise ConfigError("roi_bins and num_queries must be >= 1")
        if self.encoder_layers < 1 or self.decoder_layers < 1:
            raise ConfigError("encoder_layers and decoder_layers must be >= 1")
        if self.rectify_aggregation not in RECTIFY_MODES:
            raise ConfigError(f"rectify_aggregation must be one of {RECTIFY_MODES}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")


@dataclass
class ProposalBatch:
    """Per-video model outputs, tensors retained for the loss."""

    proposals_t: Tensor  # (N_q, 2) in [0, 1]
    scores_t: Tensor  # (N_q,) in (0, 1)
    actionness_t: Tensor  # (T,) pre-sigmoid
    decoder_queries: Tensor  # (N_q, D)
    rectified_queries: Tensor  # (N_q, D); == decoder_queries when rectifying is off
    prepass_proposals: Optional[np.ndarray] = None  # detached (N_q, 2)

    @property
    def proposals(self) -> np.ndarray:
        return self.proposals_t.data

    @property
    def foreground_scores(self) -> np.ndarray:
        return self.scores_t.data

    @property
    def actionness_logits(self) -> np.ndarray:
        return self.actionness_t.data


# ---- parameter initialization --------------------------------------------------


def _uniform(rng, fan_in: int, shape) -> np.ndarray:
    bound = math.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


def _init_linear(params, rng, name: str, d_in: int, d_out: int):
    params[f"{name}.w"] = tt.parameter(_uniform(rng, d_in, (d_in, d_out)))
    params[f"{name}.b"] = tt.parameter(np.zeros(d_out, dtype=np.float32))


def _init_attention(params, rng, name: str, dim: int):
    for proj in ("q", "k", "v", "out"):
        _init_linear(params, rng, f"{name}.{proj}", dim, dim)


def _init_layer_norm(params, name: str, dim: int):
    params[f"{name}.g"] = tt.parameter(np.ones(dim, dtype=np.float32))
    params[f"{name}.b"] = tt.parameter(np.zeros(dim, dtype=np.float32))


def init_params(config: ModelConfig, seed: int = 0) -> dict[str, Tensor]:
    rng = np.random.default_rng(seed)
    d = config.dim
    hidden = d * config.ffn_multiplier
    params: dict[str, Tensor] = {}

    params["queries"] = tt.parameter((rng.standard_normal((config.num_queries, d)) * 0.02).astype(np.float32))

    for i in range(config.encoder_layers):
        base = f"encoder.{i}"
        _init_layer_norm(params, f"{base}.ln1", d)
        _init_attention(params, rng, f"{base}.attn", d)
        _init_layer_norm(params, f"{base}.ln2", d)
        _init_linear(params, rng, f"{base}.ffn1", d, hidden)
        _init_linear(params, rng, f"{base}.ffn2", hidden, d)
    _init_layer_norm(params, "encoder.final_ln", d)

    for i in range(config.decoder_layers):
        base = f"decoder.{i}"
        _init_layer_norm(params, f"{base}.ln1", d)
        _init_attention(params, rng, f"{base}.self_attn", d)
        _init_layer_norm(params, f"{base}.ln2", d)
        _init_attention(params, rng, f"{base}.cross_attn", d)
        _init_layer_norm(params, f"{base}.ln3", d)
        _init_linear(params, rng, f"{base}.ffn1", d, hidden)
        _init_linear(params, rng, f"{base}.ffn2", hidden, d)
    _init_layer_norm(params, "decoder.final_ln", d)

    # actionness head: conv(k3) -> GELU -> conv(k3) -> scalar logit per frame
    params["actionness.conv1.w"] = tt.parameter(_uniform(rng, d * 3, (d, d, 3)))
    params["actionness.conv1.b"] = tt.parameter(np.zeros(d, dtype=np.float32))
    params["actionness.conv2.w"] = tt.parameter(_uniform(rng, d * 3, (1, d, 3)))
    params["actionness.conv2.b"] = tt.parameter(np.zeros(1, dtype=np.float32))

    if config.rectify_aggregation == "cross_attention":
        _init_attention(params, rng, "rectifier.ca", d)
    else:
        _init_linear(params, rng, "rectifier.pool_proj", d, d)
    _init_attention(params, rng, "rectifier.sa", d)

    # generation head shared by the pre-pass and the final pass
    _init_linear(params, rng, "gen.fc1", d, d)
    _init_linear(params, rng, "gen.fc2", d, d)
    _init_linear(params, rng, "gen.fc3", d, 2)
    _init_linear(params, rng, "cls.fc", d, 1)
    return params


# ---- building blocks -----------------------------------------------------------


def _linear(params, name: str, x: Tensor) -> Tensor:
    return tt.matmul(x, params[f"{name}.w"]) + params[f"{name}.b"]


def _layer_norm(params, name: str, x: Tensor) -> Tensor:
    return tt.layer_norm(x, params[f"{name}.g"], params[f"{name}.b"])


def _split_heads(x: Tensor, heads: int) -> Tensor:
    # (L, D) -> (h, L, dh)
    length, d = x.shape
    return tt.transpose(tt.reshape(x, (length, heads, d // heads)), (1, 0, 2))


def _merge_heads(x: Tensor) -> Tensor:
    # (h, L, dh) -> (L, D)
    h, length, dh = x.shape
    return tt.reshape(tt.transpose(x, (1, 0, 2)), (length, h * dh))


def _attention(params, name: str, queries: Tensor, memory: Tensor, heads: int) -> Tensor:
    """Multi-head attention from `queries` over `memory` (no residual)."""
    dh = queries.shape[-1] // heads
    q = _split_heads(_linear(params, f"{name}.q", queries), heads)  # (h, Lq, dh)
    k = _split_heads(_linear(params, f"{name}.k", memory), heads)  # (h, Lk, dh)
    v = _split_heads(_linear(params, f"{name}.v", memory), heads)
    scores = tt.matmul(q, tt.transpose(k, (0, 2, 1))) * (1.0 / math.sqrt(dh))
    attn = tt.softmax(scores, axis=-1)
    return _linear(params, f"{name}.out", _merge_heads(tt.matmul(attn, v)))


def _ffn(params, base: str, x: Tensor) -> Tensor:
    return _linear(params, f"{base}.ffn2", tt.gelu(_linear(params, f"{base}.ffn1", x)))


def _maybe_dropout(x: Tensor, rate: float, rng) -> Tensor:
    if rng is None or rate <= 0.0:
        return x
    return tt.dropout(x, rate, rng)


def sinusoidal_positions(length: int, dim: int, dtype=np.float32) -> np.ndarray:
    """Fixed sin/cos position table, (length, dim)."""
    pos = np.arange(length, dtype=np.float64)[:, None]
    half = np.arange(0, dim, 2, dtype=np.float64)
    freq = np.exp(-math.log(10000.0) * half / dim)
    table = np.zeros((length, dim), dtype=np.float64)
    table[:, 0::2] = np.sin(pos * freq)
    table[:, 1::2] = np.cos(pos * freq)[:, : dim // 2]
    return table.astype(dtype)


# ---- model stages ---------------------------------------------------------------


def encode(params, config: ModelConfig, x: Tensor, rng=None) -> tuple[Tensor, Tensor]:
    """Temporal encoding: returns (encoded (T, D), actionness logits (T,))."""
    if x.shape[-1] != config.dim:
        raise ShapeError(f"feature dim {x.shape[-1]} != model dim {config.dim}")
    h = x + Tensor(sinusoidal_positions(x.shape[0], config.dim, dtype=x.dtype))
    for i in range(config.encoder_layers):
        base = f"encoder.{i}"
        normed = _layer_norm(params, f"{base}.ln1", h)
        h = h + _maybe_dropout(_attention(params, f"{base}.attn", normed, normed, config.attention_heads), config.dropout, rng)
        h = h + _maybe_dropout(_ffn(params, base, _layer_norm(params, f"{base}.ln2", h)), config.dropout, rng)
    encoded = _layer_norm(params, "encoder.final_ln", h)

    a = tt.gelu(tt.conv1d_k3(encoded, params["actionness.conv1.w"], params["actionness.conv1.b"]))
    logits = tt.reshape(tt.conv1d_k3(a, params["actionness.conv2.w"], params["actionness.conv2.b"]), (x.shape[0],))
    return encoded, logits


def decode(params, config: ModelConfig, encoded: Tensor, rng=None) -> Tensor:
    """Query decoding: (N_q, D) dynamic-aware query vectors."""
    q = params["queries"]
    if q.dtype != encoded.dtype:
        # a silent cast here would detach the query gradients
        raise ShapeError(f"query dtype {q.dtype} != encoded dtype {encoded.dtype}")
    for i in range(config.decoder_layers):
        base = f"decoder.{i}"
        normed = _layer_norm(params, f"{base}.ln1", q)
        q = q + _maybe_dropout(_attention(params, f"{base}.self_attn", normed, normed, config.attention_heads), config.dropout, rng)
        normed = _layer_norm(params, f"{base}.ln2", q)
        q = q + _maybe_dropout(_attention(params, f"{base}.cross_attn", normed, encoded, config.attention_heads), config.dropout, rng)
        q = q + _maybe_dropout(_ffn(params, base, _layer_norm(params, f"{base}.ln3", q)), config.dropout, rng)
    return _layer_norm(params, "decoder.final_ln", q)


def _per_query_cross_attention(params, config: ModelConfig, queries: Tensor, bins: Tensor) -> Tensor:
    """Each query attends over its own L pooled bin vectors."""
    n_q, d = queries.shape
    _, length, _ = bins.shape
    heads = config.attention_heads
    dh = d // heads
    q = _linear(params, "rectifier.ca.q", queries)  # (N_q, D)
    flat = tt.reshape(bins, (n_q * length, d))
    k = tt.reshape(_linear(params, "rectifier.ca.k", flat), (n_q, length, heads, dh))
    v = tt.reshape(_linear(params, "rectifier.ca.v", flat), (n_q, length, heads, dh))
    qh = tt.transpose(tt.reshape(q, (n_q, 1, heads, dh)), (0, 2, 1, 3))  # (N_q, h, 1, dh)
    kh = tt.transpose(k, (0, 2, 3, 1))  # (N_q, h, dh, L)
    vh = tt.transpose(v, (0, 2, 1, 3))  # (N_q, h, L, dh)
    attn = tt.softmax(tt.matmul(qh, kh) * (1.0 / math.sqrt(dh)), axis=-1)
    mixed = tt.reshape(tt.transpose(tt.matmul(attn, vh), (0, 2, 1, 3)), (n_q, d))
    return _linear(params, "rectifier.ca.out", mixed)


def rectify(params, config: ModelConfig, queries: Tensor, bins: Tensor) -> Tensor:
    """Inject pooled static features back into the queries (residual)."""
    n_q, d = queries.shape
    if config.rectify_aggregation == "cross_attention":
        if config.rectify_joint_bins:
            flat = tt.reshape(bins, (bins.shape[0] * bins.shape[1], d))
            injected = _attention(params, "rectifier.ca", queries, flat, config.attention_heads)
        else:
            injected = _per_query_cross_attention(params, config, queries, bins)
    else:
        pooled = (
            tt.reduce_mean(bins, axis=1)
            if config.rectify_aggregation == "mean"
            else tt.reduce_max(bins, axis=1)
        )
        injected = _linear(params, "rectifier.pool_proj", pooled)
    mixed = _attention(params, "rectifier.sa", injected, injected, config.attention_heads)
    return queries + mixed


def generation_head(params, queries: Tensor) -> Tensor:
    h = tt.gelu(_linear(params, "gen.fc1", queries))
    h = tt.gelu(_linear(params, "gen.fc2", h))
    return tt.sigmoid(_linear(params, "gen.fc3", h))  # (N_q, 2) in [0, 1]


def classification_head(params, queries: Tensor) -> Tensor:
    return tt.sigmoid(tt.reshape(_linear(params, "cls.fc", queries), (queries.shape[0],)))


def forward(
    params,
    config: ModelConfig,
    x: Tensor,
    rng=None,
    prepass_override: Optional[np.ndarray] = None,
) -> ProposalBatch:
    """Full pipeline for one video. Pass rng only during training (dropout).

    prepass_override pins the gradient-stopped pre-pass proposals to given
    values; finite-difference checks rely on this to perturb parameters
    while holding the stop-gradient branch fixed, and diagnostics use it to
    compare rectifier input and output proposals directly.
    """
    encoded, actionness = encode(params, config, x, rng=rng)
    q_hat = decode(params, config, encoded, rng=rng)

    if config.use_rectifying:
        if prepass_override is None:
            # proposal pre-pass: values only, no gradient flows back through it
            with tt.no_grad():
                prepass_np = generation_head(params, q_hat.detach()).data.copy()
        else:
            prepass_np = np.asarray(prepass_override)
        pooled = roi_align(x, prepass_np, config.roi_bins)
        q_final = rectify(params, config, q_hat, pooled.bins)
    else:
        q_final = q_hat
        prepass_np = None

    return ProposalBatch(
        proposals_t=generation_head(params, q_final),
        scores_t=classification_head(params, q_final),
        actionness_t=actionness,
        decoder_queries=q_hat,
        rectified_queries=q_final,
        prepass_proposals=prepass_np,
    )


def params_to_float64(params: dict[str, Tensor]) -> dict[str, Tensor]:
    return {
        k: Tensor(p.data.astype(np.float64), requires_grad=p.requires_grad, dtype=np.float64)
        for k, p in params.items()
    }
