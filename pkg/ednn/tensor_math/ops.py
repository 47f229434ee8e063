"""
Layer Primitives
conv2d (same padding, NHWC), dense, ReLU, reshape, tile summation and MSE loss
Every primitive returns a Tensor whose backward closure produces input gradients
"""
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ednn.shared.models.errors import ShapeError
from ednn.tensor_math.tensor import Tensor, canonical_sum

ArrayLike = Union[Tensor, np.ndarray]


def same_padding(size: int, kernel: int, stride: int) -> Tuple[int, int, int]:
    """Return (pad_before, pad_after, out_size) for 'same' padding.

    Output extent is ceil(size / stride); when padding is odd the extra row
    goes after the input.
    """
    out = -(-size // stride)
    total = max((out - 1) * stride + kernel - size, 0)
    return total // 2, total - total // 2, out


def conv2d(x: Tensor, kernels: Tensor, bias: Tensor, stride: int = 2) -> Tensor:
    """2d convolution of x[B,H,W,Cin] with kernels[k,k,Cin,K] plus bias[K]"""
    if x.data.ndim != 4 or kernels.data.ndim != 4:
        raise ShapeError("conv2d expects 4d input and kernels",
                         {"input": x.shape, "kernels": kernels.shape})
    batch, height, width, channels = x.shape
    k, k_w, k_in, n_out = kernels.shape
    if k != k_w:
        raise ShapeError("conv2d kernels must be square", {"kernels": kernels.shape})
    if k_in != channels:
        raise ShapeError("Input channels do not match kernel channels",
                         {"input_channels": channels, "kernel_channels": k_in})
    if bias.shape != (n_out,):
        raise ShapeError("Bias must have one entry per kernel",
                         {"bias": bias.shape, "kernels": n_out})
    if stride < 1:
        raise ShapeError("Stride must be positive", {"stride": stride})

    top, bottom, out_h = same_padding(height, k, stride)
    left, right, out_w = same_padding(width, k, stride)
    padded = np.pad(x.data, ((0, 0), (top, bottom), (left, right), (0, 0)))
    if padded.shape[1] < k or padded.shape[2] < k:
        raise ShapeError("Kernel larger than padded input",
                         {"kernel": k, "padded": padded.shape[1:3]})

    # [B, H', W', C, k, k] -> [B, out_h, out_w, k, k, C]
    windows = sliding_window_view(padded, (k, k), axis=(1, 2))[:, ::stride, ::stride]
    windows = windows[:, :out_h, :out_w].transpose(0, 1, 2, 4, 5, 3)
    cols = np.ascontiguousarray(windows).reshape(batch * out_h * out_w, k * k * channels)
    weight = kernels.data.reshape(k * k * channels, n_out)

    out = (cols @ weight + bias.data).reshape(batch, out_h, out_w, n_out)

    def backward(grad: np.ndarray):
        flat = grad.reshape(-1, n_out)
        d_kernels = (cols.T @ flat).reshape(kernels.shape)
        d_bias = flat.sum(axis=0)
        d_input = None
        if x.requires_grad:
            d_cols = (flat @ weight.T).reshape(batch, out_h, out_w, k, k, channels)
            d_padded = np.zeros_like(padded)
            span_h = stride * (out_h - 1) + 1
            span_w = stride * (out_w - 1) + 1
            for i in range(k):
                for j in range(k):
                    d_padded[:, i:i + span_h:stride, j:j + span_w:stride, :] += d_cols[:, :, :, i, j, :]
            d_input = d_padded[:, top:top + height, left:left + width, :]
        return d_input, d_kernels, d_bias

    return Tensor.from_op(out.astype(x.dtype, copy=False), (x, kernels, bias), backward)


def dense(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """Affine map out[b, j] = sum_i x[b, i] * W[i, j] + bias[j]"""
    if x.data.ndim != 2 or weights.data.ndim != 2:
        raise ShapeError("dense expects 2d input and weights",
                         {"input": x.shape, "weights": weights.shape})
    if x.shape[1] != weights.shape[0]:
        raise ShapeError("Inner dimensions do not agree",
                         {"input": x.shape, "weights": weights.shape})
    if bias.shape != (weights.shape[1],):
        raise ShapeError("Bias must match the output width",
                         {"bias": bias.shape, "weights": weights.shape})

    out = x.data @ weights.data + bias.data

    def backward(grad: np.ndarray):
        d_input = grad @ weights.data.T if x.requires_grad else None
        return d_input, x.data.T @ grad, grad.sum(axis=0)

    return Tensor.from_op(out, (x, weights, bias), backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out = np.where(mask, x.data, np.zeros((), dtype=x.dtype))

    def backward(grad: np.ndarray):
        return (grad * mask,)

    return Tensor.from_op(out, (x,), backward)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    source_shape = x.shape
    out = x.data.reshape(tuple(shape))

    def backward(grad: np.ndarray):
        return (grad.reshape(source_shape),)

    return Tensor.from_op(out, (x,), backward)


def tile_sum(contributions: Tensor) -> Tensor:
    """Summation reduction over the tile axis: [B, T, l] -> [B, l]"""
    if contributions.data.ndim != 3:
        raise ShapeError("tile_sum expects [batch, tiles, classes]",
                         {"shape": contributions.shape})
    source_shape = contributions.shape
    out = canonical_sum(contributions.data, axis=1)

    def backward(grad: np.ndarray):
        return (np.broadcast_to(grad[:, None, :], source_shape).copy(),)

    return Tensor.from_op(out, (contributions,), backward)


def mse_loss(pred: Tensor, labels: ArrayLike) -> Tensor:
    """Mean over all entries of (pred - labels)^2, as a 0-d tensor"""
    target = labels.data if isinstance(labels, Tensor) else np.asarray(labels)
    if pred.shape != target.shape:
        raise ShapeError("Prediction and label shapes differ",
                         {"pred": pred.shape, "labels": target.shape})
    diff = pred.data - target.astype(pred.dtype, copy=False)
    count = diff.size
    out = np.asarray(np.mean(diff * diff), dtype=pred.dtype)

    def backward(grad: np.ndarray):
        return (grad * (2.0 / count) * diff,)

    return Tensor.from_op(out, (pred,), backward)


def param(data: np.ndarray, name: Optional[str] = None) -> Tensor:
    """Leaf tensor that receives gradients"""
    return Tensor(data, requires_grad=True, name=name)
