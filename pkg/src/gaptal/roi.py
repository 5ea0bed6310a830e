"""Temporal RoIAlign: bin-wise linear-interpolation pooling over proposals.

Bin i of proposal (s, e) samples the frame axis at
u_i = (s + (i + 0.5) * (e - s) / L) * T and linearly interpolates between
the two neighbouring frames (indices clamped to [0, T-1]). Proposal
coordinates are consumed as plain values: no gradient ever reaches them,
only the frame features are differentiable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as tt
from .errors import NumericError
from .tensor import Tensor


@dataclass
class RoiFeatures:
    bins: Tensor  # (N_q, L, D)
    source_proposals: np.ndarray  # (N_q, 2) after start/end normalization


def sample_positions(proposals: np.ndarray, num_bins: int, num_frames: int) -> np.ndarray:
    """Fractional frame coordinates, one row of `num_bins` per proposal.

    Rows with start > end are swapped before sampling.
    """
    p = np.asarray(proposals, dtype=np.float64)
    if not np.all(np.isfinite(p)):
        raise NumericError("roi_align received non-finite proposals")
    s = np.minimum(p[:, 0], p[:, 1])[:, None]
    e = np.maximum(p[:, 0], p[:, 1])[:, None]
    centers = (np.arange(num_bins, dtype=np.float64) + 0.5) / num_bins
    return (s + centers[None, :] * (e - s)) * num_frames


def roi_align(x: Tensor, proposals, num_bins: int) -> RoiFeatures:
    """Pool (T, D) features into (N_q, L, D) bins.

    `proposals` may be a Tensor or an array; either way its values are
    detached before sampling, matching the gradient-stopped pre-pass.
    """
    raw = proposals.data if isinstance(proposals, Tensor) else np.asarray(proposals)
    t, d = x.shape
    u = sample_positions(raw, num_bins, t)  # (N_q, L)
    flat = tt.lerp_rows(x, u.reshape(-1))  # (N_q * L, D)
    bins = tt.reshape(flat, (raw.shape[0], num_bins, d))
    normalized = np.stack([np.minimum(raw[:, 0], raw[:, 1]), np.maximum(raw[:, 0], raw[:, 1])], axis=1)
    return RoiFeatures(bins=bins, source_proposals=normalized)


def roi_align_np(x: np.ndarray, proposals: np.ndarray, num_bins: int) -> np.ndarray:
    """Pure-numpy pooling for inference paths that never need gradients."""
    t = x.shape[0]
    u = sample_positions(proposals, num_bins, t) - 0.5  # (N_q, L)
    i0 = np.floor(u).astype(np.int64)
    frac = (u - i0).astype(x.dtype)
    i0c = np.clip(i0, 0, t - 1)
    i1c = np.clip(i0 + 1, 0, t - 1)
    return x[i0c] * (1.0 - frac)[..., None] + x[i1c] * frac[..., None]
