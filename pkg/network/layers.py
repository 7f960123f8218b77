"""
Layers
Forward and backward passes for the network's building blocks (C x H x W arrays)
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BN_EPS = 1e-5


def _windows(x, k):
    pad = (k - 1) // 2
    padded = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    # C x H x W x k x k
    return sliding_window_view(padded, (k, k), axis=(1, 2))


def conv_forward(x, w, b):
    """
    Same-padded stride-1 convolution

    Args:
        x: Input C x H x W
        w: Kernels O x C x k x k
        b: Biases O

    Returns:
        Output O x H x W
    """
    k = w.shape[2]
    out = np.tensordot(w, _windows(x, k), axes=([1, 2, 3], [0, 3, 4]))
    return out + b[:, None, None]


def conv_backward(dout, x, w):
    """
    Gradients of conv_forward

    Args:
        dout: Upstream gradient O x H x W
        x: Forward input C x H x W
        w: Kernels O x C x k x k

    Returns:
        Tuple (dx, dw, db)
    """
    k = w.shape[2]
    dw = np.tensordot(dout, _windows(x, k), axes=([1, 2], [1, 2]))
    db = dout.sum(axis=(1, 2))
    flipped = w[:, :, ::-1, ::-1]
    dx = np.tensordot(flipped, _windows(dout, k), axes=([0, 2, 3], [0, 3, 4]))
    return dx, dw, db


def relu_forward(z):
    return np.maximum(z, 0.0)


def relu_backward(dout, z):
    return dout * (z > 0.0)


def _blocks(x):
    c, h, w = x.shape
    return x.reshape(c, h // 2, 2, w // 2, 2).transpose(0, 1, 3, 2, 4).reshape(c, h // 2, w // 2, 4)


def _unblocks(blocks):
    c, h2, w2, _ = blocks.shape
    return blocks.reshape(c, h2, w2, 2, 2).transpose(0, 1, 3, 2, 4).reshape(c, h2 * 2, w2 * 2)


def maxpool_forward(x):
    """
    2x2 max-pool with stride 2

    Args:
        x: Input C x H x W (H, W even)

    Returns:
        Tuple (pooled C x H/2 x W/2, window-local argmax indices in 0..3)
    """
    blocks = _blocks(x)
    indices = blocks.argmax(axis=3)
    pooled = np.take_along_axis(blocks, indices[..., None], axis=3)[..., 0]
    return pooled, indices


def maxunpool_forward(y, indices):
    """
    Place each value at its recorded argmax cell, zeros elsewhere

    Args:
        y: Values C x h x w
        indices: Argmax indices C x h x w

    Returns:
        Output C x 2h x 2w
    """
    onehot = indices[..., None] == np.arange(4)
    return _unblocks(onehot * y[..., None])


def maxpool_backward(dout, indices):
    # routes each gradient to the cell that won the max
    return maxunpool_forward(dout, indices)


def maxunpool_backward(dout, indices):
    return np.take_along_axis(_blocks(dout), indices[..., None], axis=3)[..., 0]


def softmax(logits):
    """
    Softmax over the channel axis

    Args:
        logits: K x H x W

    Returns:
        Probabilities K x H x W
    """
    shifted = logits - logits.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


def batchnorm_forward(z, gamma, beta):
    """
    Per-channel normalization over the spatial positions of one image

    Args:
        z: Convolution output C x H x W
        gamma: Scales C
        beta: Shifts C

    Returns:
        Tuple (output, saved) where saved = (normalized z, 1 / std)
    """
    mean = z.mean(axis=(1, 2), keepdims=True)
    inv_std = 1.0 / np.sqrt(z.var(axis=(1, 2), keepdims=True) + BN_EPS)
    normalized = (z - mean) * inv_std
    return gamma[:, None, None] * normalized + beta[:, None, None], (normalized, inv_std)


def batchnorm_backward(dout, saved, gamma):
    """
    Gradients of batchnorm_forward

    Returns:
        Tuple (dz, dgamma, dbeta)
    """
    normalized, inv_std = saved
    n = normalized.shape[1] * normalized.shape[2]
    dgamma = (dout * normalized).sum(axis=(1, 2))
    dbeta = dout.sum(axis=(1, 2))

    dnorm = dout * gamma[:, None, None]
    dz = inv_std / n * (
        n * dnorm
        - dnorm.sum(axis=(1, 2), keepdims=True)
        - normalized * (dnorm * normalized).sum(axis=(1, 2), keepdims=True)
    )
    return dz, dgamma, dbeta
