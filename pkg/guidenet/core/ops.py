"""Differentiable primitives.

Each op computes its forward result with numpy, then registers a closure that maps
the upstream gradient to one gradient per input (``None`` where no gradient flows).
"""
from dataclasses import dataclass
from typing import Literal

import numpy as np

from guidenet.core.errors import ContractError, DegenerateBatchError, DimensionError
from guidenet.core.tensor import Tensor, make_result

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# --- ELEMENTWISE ---
def add(a: Tensor, b: Tensor) -> Tensor:
    def _backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return make_result("add", a.data + b.data, (a, b), _backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    def _backward(g):
        return _unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)

    return make_result("sub", a.data - b.data, (a, b), _backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    def _backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return make_result("mul", a.data * b.data, (a, b), _backward)


def scale(a: Tensor, factor: float) -> Tensor:
    return make_result("scale", a.data * factor, (a,), lambda g: (g * factor,))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0  # subgradient at exactly 0 is 0

    return make_result("relu", np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


# --- REDUCTIONS / SHAPE ---
def sum_all(x: Tensor) -> Tensor:
    return make_result("sum", np.asarray(x.data.sum()), (x,), lambda g: (np.broadcast_to(g, x.shape).copy(),))


def mean_all(x: Tensor) -> Tensor:
    n = x.data.size
    return make_result("mean", np.asarray(x.data.mean()), (x,), lambda g: (np.broadcast_to(g / n, x.shape).copy(),))


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    return make_result("reshape", x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor, axes: tuple[int, ...]) -> Tensor:
    inverse = tuple(np.argsort(axes))
    return make_result("transpose", x.data.transpose(axes), (x,), lambda g: (g.transpose(inverse),))


def swap_last(x: Tensor) -> Tensor:
    axes = tuple(range(x.ndim - 2)) + (x.ndim - 1, x.ndim - 2)
    return transpose(x, axes)


# --- LINEAR ALGEBRA ---
def matmul(a: Tensor, b: Tensor) -> Tensor:
    """[m,k]·[k,n]; leading batch axes on either side broadcast as in ``np.matmul``."""
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} x {b.shape}")

    def _backward(g):
        grad_a = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape) if a.requires_grad else None
        grad_b = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape) if b.requires_grad else None
        return grad_a, grad_b

    return make_result("matmul", a.data @ b.data, (a, b), _backward)


# --- CONVOLUTION ---
def conv2d(input: Tensor, kernel: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of [C_in,H,W] (or [N,C_in,H,W]) with [C_out,C_in,kh,kw]."""
    single = input.ndim == 3
    if input.ndim not in (3, 4) or kernel.ndim != 4:
        raise DimensionError(f"conv2d expects [C,H,W] or [N,C,H,W] input and 4-D kernel, got {input.shape}, {kernel.shape}")
    x = input.data[None] if single else input.data
    n, c_in, h, w = x.shape
    c_out, k_in, kh, kw = kernel.shape
    if k_in != c_in:
        raise DimensionError(f"conv2d channel mismatch: input {input.shape} vs kernel {kernel.shape}")
    if kh > h + 2 * padding or kw > w + 2 * padding:
        raise DimensionError(
            f"conv2d kernel {kh}x{kw} larger than padded input {h + 2 * padding}x{w + 2 * padding}"
        )
    if stride < 1:
        raise ContractError(f"stride must be >= 1, got {stride}")

    h_out = (h + 2 * padding - kh) // stride + 1
    w_out = (w + 2 * padding - kw) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x

    cols = np.empty((n, c_in, kh, kw, h_out, w_out))
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i:i + stride * (h_out - 1) + 1:stride, j:j + stride * (w_out - 1) + 1:stride]
    cols = cols.reshape(n, c_in * kh * kw, h_out * w_out)
    weight = kernel.data.reshape(c_out, -1)
    out = (weight @ cols).reshape(n, c_out, h_out, w_out)

    def _backward(g):
        g = g[None] if single else g
        g_flat = g.reshape(n, c_out, h_out * w_out)
        grad_kernel = None
        if kernel.requires_grad:
            grad_kernel = np.tensordot(g_flat, cols, axes=([0, 2], [0, 2])).reshape(kernel.shape)
        grad_input = None
        if input.requires_grad:
            dcols = (weight.T @ g_flat).reshape(n, c_in, kh, kw, h_out, w_out)
            dxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    dxp[:, :, i:i + stride * (h_out - 1) + 1:stride, j:j + stride * (w_out - 1) + 1:stride] += dcols[:, :, i, j]
            dx = dxp[:, :, padding:padding + h, padding:padding + w] if padding else dxp
            grad_input = dx[0] if single else dx
        return grad_input, grad_kernel

    return make_result("conv2d", out[0] if single else out, (input, kernel), _backward)


# --- NORMALISATION ---
@dataclass
class RunningStats:
    mean: np.ndarray
    var: np.ndarray
    momentum: float = BN_MOMENTUM

    @classmethod
    def fresh(cls, channels: int, momentum: float = BN_MOMENTUM) -> "RunningStats":
        return cls(mean=np.zeros(channels), var=np.ones(channels), momentum=momentum)


def batchnorm2d(
    input: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_stats: RunningStats,
    mode: Literal["train", "eval"] = "train",
    eps: float = BN_EPS,
) -> Tensor:
    if input.ndim != 4:
        raise DimensionError(f"batchnorm2d expects [N,C,H,W], got {input.shape}")
    n, c, h, w = input.shape
    if gamma.shape != (c,) or beta.shape != (c,):
        raise DimensionError(f"batchnorm2d affine params {gamma.shape}/{beta.shape} do not match {c} channels")
    axes = (0, 2, 3)
    x = input.data
    g_b = gamma.data.reshape(1, c, 1, 1)

    if mode == "train":
        m = n * h * w
        if m < 2:
            raise DegenerateBatchError(f"batchnorm2d needs N*H*W >= 2 in train mode, got {m}")
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        # the running update is bookkeeping, not part of the differentiated forward
        running_stats.mean = (1 - running_stats.momentum) * running_stats.mean + running_stats.momentum * mean
        running_stats.var = (1 - running_stats.momentum) * running_stats.var + running_stats.momentum * var * m / (m - 1)
    elif mode == "eval":
        mean, var = running_stats.mean, running_stats.var
    else:
        raise ContractError(f"batchnorm2d mode must be 'train' or 'eval', got {mode!r}")

    inv_std = (1.0 / np.sqrt(var + eps)).reshape(1, c, 1, 1)
    xhat = (x - mean.reshape(1, c, 1, 1)) * inv_std
    out = g_b * xhat + beta.data.reshape(1, c, 1, 1)

    def _backward(g):
        grad_gamma = (g * xhat).sum(axis=axes)
        grad_beta = g.sum(axis=axes)
        dxhat = g * g_b
        if mode == "train":
            m = n * h * w
            grad_x = inv_std / m * (
                m * dxhat
                - dxhat.sum(axis=axes, keepdims=True)
                - xhat * (dxhat * xhat).sum(axis=axes, keepdims=True)
            )
        else:
            grad_x = dxhat * inv_std
        return grad_x, grad_gamma, grad_beta

    return make_result("batchnorm2d", out, (input, gamma, beta), _backward)


# --- ATTENTION PIECES ---
def softmax_rows(input: Tensor) -> Tensor:
    """Max-subtracted softmax over the last axis."""
    shifted = input.data - input.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def _backward(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return make_result("softmax_rows", y, (input,), _backward)


def concat(tensors: list[Tensor], axis: int) -> Tensor:
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def _backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return make_result("concat", np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), _backward)


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    """Channel concatenation of [C,H,W] or [N,C,H,W] blocks, ``a`` first."""
    if a.ndim != b.ndim or a.ndim not in (3, 4):
        raise DimensionError(f"concat_channels expects two 3-D or two 4-D blocks, got {a.shape} and {b.shape}")
    if a.ndim == 4 and a.shape[0] != b.shape[0]:
        raise DimensionError(f"concat_channels batch mismatch: {a.shape[0]} vs {b.shape[0]}")
    for name, axis in (("H", -2), ("W", -1)):
        if a.shape[axis] != b.shape[axis]:
            raise DimensionError(f"concat_channels {name} mismatch: {a.shape} vs {b.shape}")
    return concat([a, b], axis=a.ndim - 3)


# --- LOOKUPS / POOLING ---
def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    ids = np.asarray(ids, dtype=np.int64)

    def _backward(g):
        grad = np.zeros_like(table.data)
        np.add.at(grad, ids, g)
        return (grad,)

    return make_result("embedding", table.data[ids], (table,), _backward)


def _pool_matrix(size_in: int, size_out: int) -> np.ndarray:
    matrix = np.zeros((size_out, size_in))
    for o in range(size_out):
        start = (o * size_in) // size_out
        end = -((-(o + 1) * size_in) // size_out)
        matrix[o, start:end] = 1.0 / (end - start)
    return matrix


def adaptive_avg_pool2d(input: Tensor, output_size: tuple[int, int]) -> Tensor:
    """Average over bins [floor(o*I/O), ceil((o+1)*I/O)); bins overlap when upsampling."""
    if input.ndim != 4:
        raise DimensionError(f"adaptive_avg_pool2d expects [N,C,H,W], got {input.shape}")
    ph = _pool_matrix(input.shape[2], output_size[0])
    pw = _pool_matrix(input.shape[3], output_size[1])
    out = np.einsum("oh,nchw,pw->ncop", ph, input.data, pw, optimize=True)

    def _backward(g):
        return (np.einsum("ncop,oh,pw->nchw", g, ph, pw, optimize=True),)

    return make_result("adaptive_avg_pool2d", out, (input,), _backward)


def global_avg_pool(input: Tensor) -> Tensor:
    """[N,C,H,W] -> [N,C]."""
    if input.ndim != 4:
        raise DimensionError(f"global_avg_pool expects [N,C,H,W], got {input.shape}")
    hw = input.shape[2] * input.shape[3]

    def _backward(g):
        return (np.broadcast_to(g[:, :, None, None] / hw, input.shape).copy(),)

    return make_result("global_avg_pool", input.data.mean(axis=(2, 3)), (input,), _backward)


# --- LOSS ---
def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean softmax cross-entropy of [N,K] logits against integer labels."""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise DimensionError(f"cross_entropy expects [N,K] logits and [N] labels, got {logits.shape}, {labels.shape}")
    n = logits.shape[0]
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = -log_probs[np.arange(n), labels].mean()

    def _backward(g):
        grad = np.exp(log_probs)
        grad[np.arange(n), labels] -= 1.0
        return (grad * (g / n),)

    return make_result("cross_entropy", np.asarray(loss), (logits,), _backward)

