"""Finite-difference verification of analytic gradients.

Checks run the computation in float64: the caller provides parameters, this
module casts copies to float64, evaluates the loss closure with them, and
compares backward() output against central differences coordinate by
coordinate. Large tensors are probed at a deterministic random subset of
coordinates to keep runtime bounded.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import Tape, Tensor, backward


def to_float64(params: dict[str, Tensor]) -> dict[str, Tensor]:
    return {
        k: Tensor(p.data.astype(np.float64), requires_grad=p.requires_grad, dtype=np.float64)
        for k, p in params.items()
    }


def relative_error(analytic: float, numeric: float, zero_tol: float = 1e-7) -> float:
    scale = max(abs(analytic), abs(numeric))
    if scale < zero_tol:
        return 0.0
    return abs(analytic - numeric) / scale


def check_gradients(
    loss_fn: Callable[[dict[str, Tensor]], Tensor],
    params: dict[str, Tensor],
    h: float = 1e-6,
    max_coords: int = 24,
    seed: int = 0,
) -> dict[str, float]:
    """Max relative error per parameter between backward() and central FD.

    loss_fn must be a pure function of the float64 params passed in: it is
    re-evaluated many times with perturbed entries. Anything the analytic
    gradient is meant to treat as constant (detached pre-pass proposals,
    a fixed matching) must be frozen inside the closure by the caller.
    """
    p64 = to_float64(params)
    with Tape() as tape:
        loss = loss_fn(p64)
    backward(loss, tape)

    # the two loss evaluations each carry ~eps*|loss| rounding error, so the
    # difference quotient is noisy to ~eps*|loss|/h; gradients smaller than
    # noise/1e-4 cannot be certified to 1e-4 relative and count as zero
    noise = np.finfo(np.float64).eps * max(1.0, abs(loss.item())) / h
    zero_tol = max(1e-7, noise / 1e-4)

    rng = np.random.default_rng(seed)
    errors: dict[str, float] = {}
    for name, p in p64.items():
        if not p.requires_grad:
            continue
        flat = p.data.reshape(-1)
        grad = np.zeros_like(flat) if p.grad is None else p.grad.reshape(-1)
        n = flat.size
        coords = np.arange(n) if n <= max_coords else rng.choice(n, size=max_coords, replace=False)
        worst = 0.0
        for c in coords:
            orig = flat[c]
            step = h * max(1.0, abs(orig))
            flat[c] = orig + step
            up = loss_fn(p64).item()
            flat[c] = orig - step
            down = loss_fn(p64).item()
            flat[c] = orig
            fd = (up - down) / (2.0 * step)
            worst = max(worst, relative_error(float(grad[c]), fd, zero_tol=zero_tol))
        errors[name] = worst
    return errors


def check_single(
    fn: Callable[[Tensor], Tensor],
    x: np.ndarray,
    h: float = 1e-6,
    seed: int = 0,
    max_coords: int = 64,
) -> float:
    """Convenience wrapper for one-input primitives: max relative error."""
    t = Tensor(np.asarray(x, dtype=np.float64), requires_grad=True, dtype=np.float64)
    errs = check_gradients(lambda p: fn(p["x"]), {"x": t}, h=h, seed=seed, max_coords=max_coords)
    return errs["x"]
