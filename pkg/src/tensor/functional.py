"""
Taped operations used by the detector: activations, normalization, convolution, resampling,
masked attention primitives and the two training losses.

Every function takes and returns ``Tensor`` objects; the backward closures are written
against the saved ``numpy`` arrays of the forward pass.
"""

from __future__ import annotations

from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import DimensionError
from src.tensor.tensor import ArrayLike, Tensor, as_tensor

# ---------------------------------------------------------------------------- activations


def relu(x: Tensor) -> Tensor:
    active = x.data > 0
    return Tensor.make(np.where(active, x.data, 0.0), (x,), lambda g: (g * active,), "relu")


def stable_sigmoid(z: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(x: Tensor) -> Tensor:
    out = stable_sigmoid(x.data)
    return Tensor.make(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Max-shifted softmax; outputs sum to one along ``axis``."""
    if x.ndim == 0 or x.shape[axis] == 0:
        raise DimensionError(f"softmax over an empty axis (shape {x.shape})")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return Tensor.make(out, (x,), backward, "softmax")


def masked_softmax(x: Tensor, mask: np.ndarray, axis: int = -1) -> Tensor:
    """
    Softmax restricted to ``mask`` entries along ``axis``.

    Masked-out entries get weight 0; a row with no valid entry is all zeros.
    """
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
    row_max = np.max(np.where(mask, x.data, -np.inf), axis=axis, keepdims=True)
    row_max = np.where(np.isfinite(row_max), row_max, 0.0)
    e = np.where(mask, np.exp(np.where(mask, x.data - row_max, 0.0)), 0.0)
    denom = e.sum(axis=axis, keepdims=True)
    out = np.divide(e, denom, out=np.zeros_like(e), where=denom > 0)

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return Tensor.make(out, (x,), backward, "masked_softmax")


# ---------------------------------------------------------------------------- pooling and resampling


def masked_max(x: Tensor, mask: np.ndarray, axis: int) -> Tensor:
    """
    Maximum over valid entries of ``axis``; gradient flows to the first maximizing entry.

    Slices without a valid entry produce 0.
    """
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
    axis = axis % x.ndim
    filled = np.where(mask, x.data, -np.inf)
    winner = np.expand_dims(np.argmax(filled, axis=axis), axis)
    best = np.take_along_axis(filled, winner, axis=axis)
    has_valid = np.isfinite(best)
    out = np.squeeze(np.where(has_valid, best, 0.0), axis=axis)
    shape = x.shape

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        full = np.zeros(shape, dtype=np.float64)
        np.put_along_axis(full, winner, np.expand_dims(g, axis) * has_valid, axis=axis)
        return (full,)

    return Tensor.make(out, (x,), backward, "masked_max")


def upsample_nearest(x: Tensor, factor: int) -> Tensor:
    """Nearest-neighbor upsampling of the last two axes by an integer factor."""
    if factor == 1:
        return x
    if factor < 1 or x.ndim < 2 or x.shape[-1] < 1 or x.shape[-2] < 1:
        raise DimensionError(f"cannot upsample shape {x.shape} by {factor}")
    out = x.data.repeat(factor, axis=-2).repeat(factor, axis=-1)
    height, width = x.shape[-2:]

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        blocks = g.reshape(g.shape[:-2] + (height, factor, width, factor))
        return (blocks.sum(axis=(-3, -1)),)

    return Tensor.make(out, (x,), backward, "upsample")


def upsample2x(x: Tensor) -> Tensor:
    """Each input cell is replicated into a 2x2 output block."""
    return upsample_nearest(x, 2)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise DimensionError("concat of an empty sequence")
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise DimensionError(f"concat: {e}") from e
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g: np.ndarray) -> Tuple[np.ndarray, ...]:
        return tuple(np.split(g, splits, axis=axis))

    return Tensor.make(out, tuple(tensors), backward, "concat")


def scatter_max(values: Tensor, cells: np.ndarray, n_cells: int) -> Tensor:
    """
    Write rows of ``values`` [N x C] into ``n_cells`` rows, resolving collisions by element-wise max.

    Cells that receive no row are zero. Gradient flows to the lowest-index row holding each maximum.
    """
    cells = np.asarray(cells, dtype=np.int64)
    n_rows, n_channels = values.shape
    if cells.shape != (n_rows,):
        raise DimensionError(f"scatter_max: {n_rows} rows but {cells.shape} cell indices")
    best = np.full((n_cells, n_channels), -np.inf)
    if n_rows:
        np.maximum.at(best, cells, values.data)
    out = np.where(np.isfinite(best), best, 0.0)

    winners = np.zeros((n_rows, n_channels), dtype=bool)
    claimed = np.zeros((n_cells, n_channels), dtype=bool)
    for row in range(n_rows):
        cell = cells[row]
        hit = (values.data[row] == best[cell]) & ~claimed[cell]
        winners[row] = hit
        claimed[cell] |= hit

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        return (np.where(winners, g[cells], 0.0),)

    return Tensor.make(out, (values,), backward, "scatter_max")


# ---------------------------------------------------------------------------- convolution


def conv_output_extent(size: int, kernel: int, stride: int, padding: int) -> int:
    """floor((size + 2p - k) / s) + 1"""
    return (size + 2 * padding - kernel) // stride + 1


def conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, stride: int = 1, padding: int = 0) -> Tensor:
    """
    2D cross-correlation over a batch ``x`` [B x C x H x W] with ``weight`` [O x C x k x k].

    Implemented with an im2col view of the padded input and a batched matmul.
    """
    if x.ndim != 4:
        raise DimensionError(f"conv2d expects B x C x H x W input, got {x.shape}")
    batch, channels, height, width = x.shape
    out_channels, in_channels, kernel, kernel_w = weight.shape
    if in_channels != channels or kernel != kernel_w:
        raise DimensionError(f"conv2d weight {weight.shape} does not fit input {x.shape}")
    out_h = conv_output_extent(height, kernel, stride, padding)
    out_w = conv_output_extent(width, kernel, stride, padding)
    if out_h <= 0 or out_w <= 0:
        raise DimensionError(f"conv2d output extent {out_h}x{out_w} is not positive for input {x.shape}")

    padded = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    padded = np.ascontiguousarray(padded)
    s_b, s_c, s_h, s_w = padded.strides
    patches = np.lib.stride_tricks.as_strided(
        padded,
        shape=(batch, channels, kernel, kernel, out_h, out_w),
        strides=(s_b, s_c, s_h, s_w, stride * s_h, stride * s_w),
        writeable=False,
    )
    cols = patches.reshape(batch, channels * kernel * kernel, out_h * out_w)
    w_mat = weight.data.reshape(out_channels, -1)
    out = w_mat @ cols
    if bias is not None:
        out = out + bias.data[None, :, None]
    out = out.reshape(batch, out_channels, out_h, out_w)
    padded_shape = padded.shape

    def backward(g: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        g_flat = g.reshape(batch, out_channels, out_h * out_w)
        grad_w = np.einsum("bol,bkl->ok", g_flat, cols).reshape(weight.shape)
        grad_cols = (w_mat.T @ g_flat).reshape(batch, channels, kernel, kernel, out_h, out_w)
        grad_padded = np.zeros(padded_shape, dtype=np.float64)
        for i in range(kernel):
            for j in range(kernel):
                grad_padded[:, :, i: i + stride * out_h: stride, j: j + stride * out_w: stride] += grad_cols[
                    :, :, i, j
                ]
        grad_x = grad_padded[:, :, padding: padding + height, padding: padding + width] if padding else grad_padded
        grads: List[Optional[np.ndarray]] = [grad_x, grad_w]
        if bias is not None:
            grads.append(g_flat.sum(axis=(0, 2)))
        return tuple(grads)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor.make(out, parents, backward, "conv2d")


def batch_norm2d(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """
    Per-channel normalization of a B x C x H x W batch.

    Training mode normalizes with batch statistics and updates the running buffers in place;
    eval mode uses the running buffers.
    """
    if x.ndim != 4 or x.shape[1] != gamma.shape[0]:
        raise DimensionError(f"batch_norm2d: input {x.shape} does not match {gamma.shape[0]} channels")
    axes = (0, 2, 3)
    count = x.shape[0] * x.shape[2] * x.shape[3]
    if training:
        mean = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        unbiased = var * count / (count - 1) if count > 1 else var
        running_var *= 1.0 - momentum
        running_var += momentum * unbiased
    else:
        mean = running_mean.copy()
        var = running_var.copy()

    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x.data - mean[None, :, None, None]) * inv_std[None, :, None, None]
    out = gamma.data[None, :, None, None] * x_hat + beta.data[None, :, None, None]

    def backward(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        grad_gamma = (g * x_hat).sum(axis=axes)
        grad_beta = g.sum(axis=axes)
        d_hat = g * gamma.data[None, :, None, None]
        if training:
            grad_x = (
                inv_std[None, :, None, None]
                / count
                * (
                    count * d_hat
                    - d_hat.sum(axis=axes, keepdims=True)
                    - x_hat * (d_hat * x_hat).sum(axis=axes, keepdims=True)
                )
            )
        else:
            grad_x = d_hat * inv_std[None, :, None, None]
        return grad_x, grad_gamma, grad_beta

    return Tensor.make(out, (x, gamma, beta), backward, "batch_norm2d")


# ---------------------------------------------------------------------------- losses


def bce_with_logits(logits: Tensor, targets: ArrayLike) -> Tensor:
    """
    Element-wise binary cross entropy on logits, in the overflow-free form
    max(x, 0) - x*y + log(1 + exp(-|x|)).
    """
    y = as_tensor(targets).data
    x = logits.data
    out = np.maximum(x, 0.0) - x * y + np.log1p(np.exp(-np.abs(x)))
    prob = stable_sigmoid(x)
    return Tensor.make(out, (logits,), lambda g: (g * (prob - y),), "bce_with_logits")


def smooth_l1(diff: Tensor, beta: float = 1.0) -> Tensor:
    """Element-wise smooth L1: 0.5*x^2/beta inside |x| < beta, |x| - 0.5*beta outside."""
    x = diff.data
    inside = np.abs(x) < beta
    out = np.where(inside, 0.5 * x * x / beta, np.abs(x) - 0.5 * beta)
    grad = np.where(inside, x / beta, np.sign(x))
    return Tensor.make(out, (diff,), lambda g: (g * grad,), "smooth_l1")
