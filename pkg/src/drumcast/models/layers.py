"""Building blocks shared by the forecasters, with their backward passes.

Forward functions accept a single sequence ``(n, d)`` or a batch
``(batch, n, d)``; matrix products act on the last axis.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..exceptions import ShapeMismatch

__all__ = [
    "LN_EPS",
    "embed",
    "positional_encoding",
    "softmax",
    "attention",
    "feedforward",
    "layer_norm",
    "layer_norm_backward",
    "softmax_backward",
    "sigmoid",
    "weight_grad",
]

LN_EPS = 1e-9


def embed(inputs, E):
    """Row-wise linear embedding ``inputs @ E``."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.shape[-1] != E.shape[0]:
        raise ShapeMismatch(f"inputs have {inputs.shape[-1]} features, E expects {E.shape[0]}")
    return inputs @ E


@lru_cache(maxsize=32)
def _pe(n, d_model):
    pos = np.arange(n, dtype=np.float64)[:, None]
    j = np.arange(0, d_model, 2, dtype=np.float64)
    angle = pos / np.power(10000.0, j / d_model)
    pe = np.empty((n, d_model))
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle[:, : d_model // 2])
    pe.setflags(write=False)
    return pe


def positional_encoding(n: int, d_model: int) -> np.ndarray:
    """Sinusoidal encoding: ``sin`` on even columns, ``cos`` on odd ones.

    The returned array is cached and read-only.
    """
    return _pe(int(n), int(d_model))


def softmax(x, axis=-1):
    z = x - np.max(x, axis=axis, keepdims=True)
    np.exp(z, out=z)
    z /= np.sum(z, axis=axis, keepdims=True)
    return z


def softmax_backward(p, dp):
    """Gradient through a row softmax given its output ``p``."""
    return p * (dp - np.sum(dp * p, axis=-1, keepdims=True))


def attention(Q, K, V, d_k=None):
    """Scaled dot-product attention; returns ``(output, weights)``."""
    Q = np.asarray(Q, dtype=np.float64)
    K = np.asarray(K, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    if Q.shape[-1] != K.shape[-1] or K.shape[-2] != V.shape[-2]:
        raise ShapeMismatch(f"incompatible Q{Q.shape}, K{K.shape}, V{V.shape}")
    d_k = Q.shape[-1] if d_k is None else d_k
    weights = softmax(Q @ np.swapaxes(K, -1, -2) / np.sqrt(d_k))
    return weights @ V, weights


def feedforward(A, W1, b1, W2, b2):
    """``relu(A @ W1 + b1) @ W2 + b2``."""
    A = np.asarray(A, dtype=np.float64)
    if A.shape[-1] != W1.shape[0] or W1.shape[1] != W2.shape[0] or b1.shape[-1] != W1.shape[1]:
        raise ShapeMismatch("feedforward weights do not chain")
    H = np.maximum(A @ W1 + b1, 0.0)
    return H @ W2 + b2


def layer_norm(x, gain, bias, eps=LN_EPS):
    """Normalize over the last axis; returns ``(out, (xhat, inv_std))``."""
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    return xhat * gain + bias, (xhat, inv)


def layer_norm_backward(dout, gain, cache):
    """Returns ``(dx, dgain, dbias)``; parameter grads are summed over leading axes."""
    xhat, inv = cache
    axes = tuple(range(dout.ndim - 1))
    dgain = np.sum(dout * xhat, axis=axes)
    dbias = np.sum(dout, axis=axes)
    dxhat = dout * gain
    dx = inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dgain, dbias


def sigmoid(x):
    # Split by sign so exp never overflows.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def weight_grad(a, b):
    """Sum of outer products over all leading axes: ``a[..., i] * b[..., j]``."""
    return a.reshape(-1, a.shape[-1]).T @ b.reshape(-1, b.shape[-1])
