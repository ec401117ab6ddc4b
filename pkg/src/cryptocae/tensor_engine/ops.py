"""Forward/backward kernels for the sequential layer stack.

Tensors are float64 numpy arrays laid out ``[batch, length, channels]``.
Every forward returns ``(output, cache)``; the matching backward takes the
upstream gradient and the cache.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError

_sliding = np.lib.stride_tricks.sliding_window_view


def _same_padding(length, kernel_size, stride):
    out_len = -(-length // stride)
    total = max((out_len - 1) * stride + kernel_size - length, 0)
    return total // 2, total - total // 2, out_len


def conv1d(x, weight, bias, stride=1, padding="same"):
    """Cross-correlation of ``x`` [B, L, C] with ``weight`` [K, C, F] plus ``bias`` [F]."""
    if x.ndim != 3:
        raise ShapeError(f"conv1d expects [batch, length, channels], got {x.shape}")
    k, c_in, _ = weight.shape
    if x.shape[2] != c_in:
        raise ShapeError(f"conv1d input has {x.shape[2]} channels, weights expect {c_in}")
    length = x.shape[1]
    if padding == "same":
        left, right, _ = _same_padding(length, k, stride)
    elif padding == "valid":
        if length < k:
            raise ShapeError(f"valid conv1d needs length >= {k}, got {length}")
        left = right = 0
    else:
        raise ValueError(f"unknown padding mode {padding!r}")
    xp = np.pad(x, ((0, 0), (left, right), (0, 0))) if left or right else x
    # cols: [B, out_len, C, K] -> [B, out_len, K, C] to match weight layout
    cols = _sliding(xp, k, axis=1)[:, ::stride].transpose(0, 1, 3, 2)
    out = np.tensordot(cols, weight, axes=([2, 3], [0, 1])) + bias
    return out, (x.shape, xp.shape, left, stride, cols, weight)


def conv1d_backward(dout, cache):
    x_shape, xp_shape, left, stride, cols, weight = cache
    k = weight.shape[0]
    dweight = np.tensordot(cols, dout, axes=([0, 1], [0, 1]))
    dbias = dout.sum(axis=(0, 1))
    # dcols: [B, out_len, K, C]
    dcols = np.tensordot(dout, weight, axes=([2], [2]))
    dxp = np.zeros(xp_shape)
    out_len = dout.shape[1]
    span = (out_len - 1) * stride + 1
    for j in range(k):
        dxp[:, j:j + span:stride, :] += dcols[:, :, j, :]
    dx = dxp[:, left:left + x_shape[1], :]
    return dx, dweight, dbias


def maxpool1d(x, pool_size):
    b, length, c = x.shape
    if length % pool_size:
        raise ShapeError(f"length {length} is not divisible by pool size {pool_size}")
    windows = x.reshape(b, length // pool_size, pool_size, c)
    # argmax returns the first maximal index, which fixes the tie-break
    idx = windows.argmax(axis=2)
    out = np.take_along_axis(windows, idx[:, :, None, :], axis=2)[:, :, 0, :]
    return out, (x.shape, idx, pool_size)


def maxpool1d_backward(dout, cache):
    shape, idx, pool_size = cache
    b, length, c = shape
    dwin = np.zeros((b, length // pool_size, pool_size, c))
    np.put_along_axis(dwin, idx[:, :, None, :], dout[:, :, None, :], axis=2)
    return dwin.reshape(shape)


def upsample1d(x, factor):
    if factor < 1:
        raise ShapeError("upsample factor must be >= 1")
    return np.repeat(x, factor, axis=1), factor


def upsample1d_backward(dout, factor):
    b, length, c = dout.shape
    return dout.reshape(b, length // factor, factor, c).sum(axis=2)


def batchnorm1d(x, gain, shift, running_mean, running_var, epsilon=1e-5, train=True):
    """Per-channel normalization over batch and length.

    In train mode the batch statistics are returned in the cache so the
    caller can fold them into the running estimates.
    """
    if train:
        n = x.shape[0] * x.shape[1]
        if n < 2:
            raise ShapeError("batch norm in train mode needs at least 2 positions per channel")
        mean = x.mean(axis=(0, 1))
        var = x.var(axis=(0, 1))
    else:
        mean, var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + epsilon)
    xhat = (x - mean) * inv_std
    out = gain * xhat + shift
    return out, (xhat, inv_std, gain, train, mean, var)


def batchnorm1d_backward(dout, cache):
    xhat, inv_std, gain, train, _, _ = cache
    dgain = (dout * xhat).sum(axis=(0, 1))
    dshift = dout.sum(axis=(0, 1))
    dxhat = dout * gain
    if not train:
        return dxhat * inv_std, dgain, dshift
    n = xhat.shape[0] * xhat.shape[1]
    dx = (inv_std / n) * (n * dxhat - dxhat.sum(axis=(0, 1))
                          - xhat * (dxhat * xhat).sum(axis=(0, 1)))
    return dx, dgain, dshift


def dense(x, weight, bias):
    """Affine map over the last axis: ``x @ weight + bias``."""
    if x.shape[-1] != weight.shape[0]:
        raise ShapeError(f"dense input width {x.shape[-1]} != weight rows {weight.shape[0]}")
    return x @ weight + bias, (x, weight)


def dense_backward(dout, cache):
    x, weight = cache
    return dout @ weight.T, x.T @ dout, dout.sum(axis=0)


def relu(x):
    mask = x > 0
    return np.where(mask, x, 0.0), mask


def relu_backward(dout, mask):
    return np.where(mask, dout, 0.0)


def mse_loss(prediction, target):
    """Mean squared error over all elements and its gradient w.r.t. ``prediction``."""
    prediction = np.asarray(prediction, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if prediction.shape != target.shape:
        raise ShapeError(f"mse_loss shapes differ: {prediction.shape} vs {target.shape}")
    diff = prediction - target
    n = diff.size
    return float(np.sum(diff * diff) / n), 2.0 * diff / n
