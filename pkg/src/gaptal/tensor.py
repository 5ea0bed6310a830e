"""Dense float tensors with reverse-mode automatic differentiation.

Forward passes run in float32 by default. Gradient-check tooling rebuilds the
same computation in float64 (pass dtype=np.float64 at construction; every
primitive preserves the dtype of its operands).

Recording model: a Tape is a context manager. While a tape is active, every
primitive whose inputs require gradients appends one node, in execution order,
which is automatically a topological order. backward() walks the node list
once, in reverse, accumulating gradients into the .grad buffer of every
requires_grad tensor it reaches.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, NumericError, ShapeError

_FLOAT_DTYPES = (np.float32, np.float64)

# Innermost entry is the recording target; None entries suppress recording
# (pushed by no_grad()).
_TAPE_STACK: list["Tape | None"] = []


def active_tape() -> "Tape | None":
    return _TAPE_STACK[-1] if _TAPE_STACK else None


class Tape:
    """Ordered record of executed primitives for one forward pass."""

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc):
        popped = _TAPE_STACK.pop()
        assert popped is self, "tape stack corrupted"
        return False

    def __len__(self) -> int:
        return len(self.nodes)


class no_grad:
    """Context manager that suppresses tape recording."""

    def __enter__(self):
        _TAPE_STACK.append(None)
        return self

    def __exit__(self, *exc):
        _TAPE_STACK.pop()
        return False


class _Node:
    """One recorded primitive: output, inputs, and a vector-Jacobian closure.

    backward_fn maps the gradient at the output to a tuple of gradients
    aligned with inputs (entries may be None for non-differentiable inputs).
    """

    __slots__ = ("output", "inputs", "backward_fn")

    def __init__(self, output, inputs, backward_fn):
        self.output = output
        self.inputs = inputs
        self.backward_fn = backward_fn


class Tensor:
    """A dense float array, optionally tracked for reverse-mode gradients.

    The shape is fixed at construction; reshape/transpose return new tensors.
    .grad is populated by backward() and accumulates across calls until
    zero_grad() resets it, which is what gradient accumulation relies on.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if dtype is None:
            # numpy float arrays and scalars keep their precision (gradcheck
            # runs in float64); python lists and scalars default to float32
            if isinstance(data, (np.ndarray, np.floating)) and data.dtype in _FLOAT_DTYPES:
                arr = np.asarray(data)
            else:
                arr = np.asarray(data, dtype=np.float32)
        else:
            if dtype not in _FLOAT_DTYPES:
                raise ContractError(f"unsupported dtype {dtype!r}; use float32 or float64")
            arr = np.asarray(data, dtype=dtype)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None

    # ---- basic introspection -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype.name}, requires_grad={self.requires_grad})"

    # ---- gradient plumbing ---------------------------------------------------

    def zero_grad(self):
        self.grad = None

    def accumulate_grad(self, g: np.ndarray):
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    def detach(self) -> "Tensor":
        """A view of the same buffer, cut off from gradient tracking."""
        return Tensor(self.data, requires_grad=False)

    # ---- operator sugar --------------------------------------------------------

    def __add__(self, other):
        return add(self, _as_tensor(other, self.dtype))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _as_tensor(other, self.dtype))

    def __rsub__(self, other):
        return sub(_as_tensor(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other, self.dtype))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, _as_tensor(other, self.dtype))

    def __rtruediv__(self, other):
        return div(_as_tensor(other, self.dtype), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 or isinstance(shape[0], int) else shape[0])

    def transpose(self, *axes):
        return transpose(self, axes if axes else None)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis=axis, keepdims=keepdims)


def _as_tensor(x, dtype) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def parameter(data, dtype=None) -> Tensor:
    """A leaf tensor that collects gradients."""
    return Tensor(data, requires_grad=True, dtype=dtype)


# ---- recording helper ------------------------------------------------------


def _emit(out_data: np.ndarray, inputs: tuple, backward_fn) -> Tensor:
    tape = active_tape()
    track = tape is not None and any(
        isinstance(t, Tensor) and t.requires_grad for t in inputs
    )
    out = Tensor(out_data, requires_grad=track)
    if track:
        tape.nodes.append(_Node(out, inputs, backward_fn))
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum g down to `shape`, inverting numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---- elementwise arithmetic --------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _emit(out, (a, b), bw)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = a.data - b.data

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _emit(out, (a, b), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data

    def bw(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _emit(out, (a, b), bw)


def div(a: Tensor, b: Tensor) -> Tensor:
    out = a.data / b.data

    def bw(g):
        ga = _unbroadcast(g / b.data, a.shape)
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.shape)
        return ga, gb

    return _emit(out, (a, b), bw)


def neg(a: Tensor) -> Tensor:
    return _emit(-a.data, (a,), lambda g: (-g,))


def power(a: Tensor, exponent: float) -> Tensor:
    p = float(exponent)
    out = a.data**p

    def bw(g):
        return (g * p * a.data ** (p - 1.0),)

    return _emit(out, (a,), bw)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)

    def bw(g):
        return (g * out,)

    return _emit(out, (a,), bw)


def log(a: Tensor) -> Tensor:
    out = np.log(a.data)

    def bw(g):
        return (g / a.data,)

    return _emit(out, (a,), bw)


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)

    def bw(g):
        return (g * 0.5 / out,)

    return _emit(out, (a,), bw)


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)

    def bw(g):
        return (g * out * (1.0 - out),)

    return _emit(out, (a,), bw)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def bw(g):
        return (g * (1.0 - out * out),)

    return _emit(out, (a,), bw)


_GELU_C = 0.7978845608028654  # sqrt(2/pi)
_GELU_A = 0.044715


def gelu(a: Tensor) -> Tensor:
    # tanh form; exact enough for training and has a clean closed-form derivative
    x = a.data
    inner = _GELU_C * (x + _GELU_A * x**3)
    t = np.tanh(inner)
    out = 0.5 * x * (1.0 + t)

    def bw(g):
        dinner = _GELU_C * (1.0 + 3.0 * _GELU_A * x * x)
        dx = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner
        return (g * dx,)

    return _emit(out, (a,), bw)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    out = np.clip(a.data, lo, hi)

    def bw(g):
        inside = (a.data >= lo) & (a.data <= hi)
        return (g * inside.astype(g.dtype),)

    return _emit(out, (a,), bw)


def maximum(a: Tensor, b: Tensor) -> Tensor:
    # ties route the full gradient to the first operand
    out = np.maximum(a.data, b.data)

    def bw(g):
        take_a = (a.data >= b.data).astype(g.dtype)
        return _unbroadcast(g * take_a, a.shape), _unbroadcast(g * (1.0 - take_a), b.shape)

    return _emit(out, (a, b), bw)


def minimum(a: Tensor, b: Tensor) -> Tensor:
    out = np.minimum(a.data, b.data)

    def bw(g):
        take_a = (a.data <= b.data).astype(g.dtype)
        return _unbroadcast(g * take_a, a.shape), _unbroadcast(g * (1.0 - take_a), b.shape)

    return _emit(out, (a, b), bw)


# ---- shape manipulation ------------------------------------------------------


def reshape(a: Tensor, shape) -> Tensor:
    out = a.data.reshape(shape)

    def bw(g):
        return (g.reshape(a.shape),)

    return _emit(out, (a,), bw)


def transpose(a: Tensor, axes=None) -> Tensor:
    out = np.transpose(a.data, axes)
    inv = None if axes is None else np.argsort(axes)

    def bw(g):
        return (np.transpose(g, inv),)

    return _emit(out, (a,), bw)


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, splits, axis=axis))

    return _emit(out, tuple(tensors), bw)


def take(a: Tensor, indices, axis: int = 0) -> Tensor:
    """Gather slices along `axis` (embedding lookup when axis=0)."""
    idx = np.asarray(indices, dtype=np.int64)
    out = np.take(a.data, idx, axis=axis)

    def bw(g):
        ga = np.zeros(a.shape, dtype=g.dtype)
        # scatter-add handles repeated indices
        np.add.at(ga, tuple([slice(None)] * axis + [idx]), g)
        return (ga,)

    return _emit(out, (a,), bw)


# ---- reductions --------------------------------------------------------------


def reduce_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).astype(g.dtype, copy=True),)
        gx = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gx, a.shape).astype(g.dtype, copy=True),)

    return _emit(out, (a,), bw)


def reduce_mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = a.size if axis is None else a.shape[axis]
    out = a.data.mean(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is None:
            return (np.broadcast_to(g / count, a.shape).astype(g.dtype, copy=True),)
        gx = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gx / count, a.shape).astype(g.dtype, copy=True),)

    return _emit(out, (a,), bw)


def reduce_max(a: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    """Max along one axis; ties route the gradient to the first maximum."""
    out = a.data.max(axis=axis, keepdims=keepdims)
    argmax = a.data.argmax(axis=axis)

    def bw(g):
        ga = np.zeros(a.shape, dtype=g.dtype)
        gx = g if keepdims else np.expand_dims(g, axis)
        idx = list(np.indices(argmax.shape))
        idx.insert(axis if axis >= 0 else a.ndim + axis, argmax)
        ga[tuple(idx)] = np.squeeze(gx, axis=axis)
        return (ga,)

    return _emit(out, (a,), bw)


# ---- linear algebra ----------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs matrices, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} @ {b.shape}")
    if a.shape[:-2] != b.shape[:-2]:
        raise ShapeError(f"matmul batch dimensions disagree: {a.shape} @ {b.shape}")
    out = np.matmul(a.data, b.data)

    def bw(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return ga, gb

    return _emit(out, (a, b), bw)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    x = a.data
    if not np.all(np.isfinite(x)):
        raise NumericError("softmax input contains non-finite values")
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - dot),)

    return _emit(out, (a,), bw)


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then apply elementwise gain and bias."""
    if gain.shape != (a.shape[-1],) or bias.shape != (a.shape[-1],):
        raise ShapeError(
            f"layer_norm parameters {gain.shape}/{bias.shape} do not match feature dim {a.shape[-1]}"
        )
    x = a.data
    n = x.shape[-1]
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + bias.data

    def bw(g):
        gxhat = g * gain.data
        ggain = (g * xhat).reshape(-1, n).sum(axis=0)
        gbias = g.reshape(-1, n).sum(axis=0)
        gx = inv * (
            gxhat
            - gxhat.mean(axis=-1, keepdims=True)
            - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True)
        )
        return gx, ggain, gbias

    return _emit(out, (a, gain, bias), bw)


def conv1d_k3(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """1D convolution over time, kernel 3, zero padding 1, stride 1.

    x: (T, C_in), weight: (C_out, C_in, 3), bias: (C_out,) -> (T, C_out).
    """
    if x.ndim != 2 or weight.ndim != 3 or weight.shape[2] != 3:
        raise ShapeError(f"conv1d_k3 expects (T,Cin) and (Cout,Cin,3), got {x.shape}, {weight.shape}")
    if weight.shape[1] != x.shape[1]:
        raise ShapeError(f"conv1d_k3 channel mismatch: input {x.shape[1]}, weight {weight.shape[1]}")
    t = x.shape[0]
    xp = np.pad(x.data, ((1, 1), (0, 0)))
    stacked = np.stack([xp[k : k + t] for k in range(3)], axis=2)  # (T, Cin, 3)
    out = np.einsum("tck,ock->to", stacked, weight.data) + bias.data

    def bw(g):
        gw = np.einsum("to,tck->ock", g, stacked)
        gb = g.sum(axis=0)
        gstacked = np.einsum("to,ock->tck", g, weight.data)
        gxp = np.zeros_like(xp)
        for k in range(3):
            gxp[k : k + t] += gstacked[:, :, k]
        return gxp[1 : t + 1], gw, gb

    return _emit(out, (x, weight, bias), bw)


def lerp_rows(x: Tensor, positions: np.ndarray) -> Tensor:
    """Linear-interpolation gather of rows at fractional frame coordinates.

    For coordinate u the value is a lerp between rows floor(u - 0.5) and
    floor(u - 0.5) + 1 at fraction frac(u - 0.5), indices clamped to
    [0, T-1]. `positions` is a plain float array and never receives a
    gradient; only the row values are differentiable.
    """
    pos = np.asarray(positions, dtype=np.float64)
    if not np.all(np.isfinite(pos)):
        raise NumericError("lerp_rows received non-finite sample coordinates")
    t = x.shape[0]
    u = pos - 0.5
    i0 = np.floor(u).astype(np.int64)
    frac = (u - i0).astype(x.dtype)
    i0c = np.clip(i0, 0, t - 1)
    i1c = np.clip(i0 + 1, 0, t - 1)
    w1 = frac.reshape(frac.shape + (1,) * (x.ndim - 1))
    w0 = 1.0 - w1
    out = x.data[i0c] * w0 + x.data[i1c] * w1

    def bw(g):
        gx = np.zeros(x.shape, dtype=g.dtype)
        np.add.at(gx, i0c, g * w0)
        np.add.at(gx, i1c, g * w1)
        return (gx,)

    return _emit(out, (x,), bw)


def dropout(a: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; identity when rate == 0."""
    if rate <= 0.0:
        return a
    keep = (rng.random(a.shape) >= rate).astype(a.dtype)
    scale = 1.0 / (1.0 - rate)
    out = a.data * keep * scale

    def bw(g):
        return (g * keep * scale,)

    return _emit(out, (a,), bw)


def l2_normalize(a: Tensor, axis: int = -1, eps: float = 1e-12) -> Tensor:
    """Rows scaled to unit L2 norm (composite of primitives)."""
    sq = reduce_sum(mul(a, a), axis=axis, keepdims=True)
    norm = sqrt(add(sq, Tensor(np.asarray(eps, dtype=a.dtype))))
    return div(a, norm)


# ---- backward pass -----------------------------------------------------------


def backward(loss: Tensor, tape: Tape):
    """Accumulate d(loss)/d(t) into t.grad for every tensor on the tape.

    Visits each recorded node exactly once, in reverse execution order.
    A loss that does not depend on a parameter leaves its gradient at zero
    (represented as an untouched .grad buffer).
    """
    if loss.data.size != 1:
        raise ContractError(f"backward() needs a scalar loss, got shape {loss.shape}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    if loss.requires_grad:
        loss.accumulate_grad(grads[id(loss)])
    for node in reversed(tape.nodes):
        gout = grads.pop(id(node.output), None)
        if gout is None:
            continue
        gins = node.backward_fn(gout)
        for tin, gin in zip(node.inputs, gins):
            if gin is None or not isinstance(tin, Tensor) or not tin.requires_grad:
                continue
            key = id(tin)
            if key in grads:
                grads[key] += gin
            else:
                grads[key] = gin.copy()
            tin.accumulate_grad(gin)
