"""Encoder-only transformer forecaster with a manual backward pass.

Each block is post-norm: ``h1 = LN(h + MHA(h))`` then ``h = LN(h1 + FFN(h1))``.
The representation at the last time position feeds a linear head that
emits every horizon step at once. Only the last position reaches the head,
so the final block evaluates its query, residual and feedforward path on
that position alone; keys and values still span the whole window.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import NonFiniteActivation, ShapeMismatch
from .config import ModelConfig
from .layers import layer_norm, layer_norm_backward, positional_encoding, softmax, softmax_backward, weight_grad

__all__ = [
    "init_transformer_params",
    "transformer_param_shapes",
    "transformer_forward",
    "transformer_backward",
    "forward_transformer",
    "attention_weights",
]


def transformer_param_shapes(config: ModelConfig) -> dict:
    D, F, H, Dff = config.d_model, config.n_features, config.horizon, config.d_ff
    shapes = {"E": (F, D)}
    for l in range(config.n_layers):
        p = f"l{l}."
        shapes.update(
            {
                p + "Wq": (D, D),
                p + "Wk": (D, D),
                p + "Wv": (D, D),
                p + "Wo": (D, D),
                p + "ln1_g": (D,),
                p + "ln1_b": (D,),
                p + "W1": (D, Dff),
                p + "b1": (Dff,),
                p + "W2": (Dff, D),
                p + "b2": (D,),
                p + "ln2_g": (D,),
                p + "ln2_b": (D,),
            }
        )
    shapes["W_o"] = (D, H)
    shapes["b_o"] = (H,)
    return shapes


def init_transformer_params(config: ModelConfig, rng=None) -> dict:
    """Weights ~ U(-sqrt(1/fan_in), +sqrt(1/fan_in)); biases 0; LayerNorm gains 1."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    params = {}
    for name, shape in transformer_param_shapes(config).items():
        short = name.rsplit(".", 1)[-1]
        if short.endswith("_g"):
            params[name] = np.ones(shape)
        elif len(shape) == 1:
            params[name] = np.zeros(shape)
        else:
            bound = np.sqrt(1.0 / shape[0])
            params[name] = rng.uniform(-bound, bound, size=shape)
    return params


def _split_heads(x, n_heads):
    B, T, D = x.shape
    return x.reshape(B, T, n_heads, D // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    B, nh, T, dk = x.shape
    return x.transpose(0, 2, 1, 3).reshape(B, T, nh * dk)


def _dropout(x, rate, rng):
    if rate <= 0 or rng is None:
        return x, None
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


def transformer_forward(params, config: ModelConfig, X, training_rng=None, keep_cache=False):
    """Batched forward pass. ``X`` is ``(batch, window_len, n_features)``.

    Returns predictions ``(batch, horizon)``, plus the activation cache when
    ``keep_cache`` is set. Dropout is active only when ``training_rng`` is
    given and ``config.dropout > 0``.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3 or X.shape[2] != config.n_features:
        raise ShapeMismatch(f"expected (batch, T, {config.n_features}) inputs, got {X.shape}")
    B, T, _ = X.shape
    nh, dk = config.n_heads, config.d_k
    scale = 1.0 / np.sqrt(dk)
    h = X @ params["E"] + positional_encoding(T, config.d_model)
    caches = []
    for l in range(config.n_layers):
        p = f"l{l}."
        last = l == config.n_layers - 1
        hq = h[:, -1:, :] if last else h
        q = _split_heads(hq @ params[p + "Wq"], nh)
        k = _split_heads(h @ params[p + "Wk"], nh)
        v = _split_heads(h @ params[p + "Wv"], nh)
        w = softmax(q @ k.transpose(0, 1, 3, 2) * scale)
        a = _merge_heads(w @ v)
        att, m1 = _dropout(a @ params[p + "Wo"], config.dropout, training_rng)
        h1, ln1 = layer_norm(hq + att, params[p + "ln1_g"], params[p + "ln1_b"])
        z = h1 @ params[p + "W1"] + params[p + "b1"]
        hid = np.maximum(z, 0.0)
        f, m2 = _dropout(hid @ params[p + "W2"] + params[p + "b2"], config.dropout, training_rng)
        h_out, ln2 = layer_norm(h1 + f, params[p + "ln2_g"], params[p + "ln2_b"])
        if not np.isfinite(h_out).all():
            raise NonFiniteActivation(f"non-finite activation in block {l}")
        if keep_cache:
            caches.append((h, hq, q, k, v, w, a, m1, ln1, h1, z, hid, m2, ln2))
        h = h_out
    rep = h[:, -1, :]
    yhat = rep @ params["W_o"] + params["b_o"]
    if not np.isfinite(yhat).all():
        raise NonFiniteActivation("non-finite prediction")
    if keep_cache:
        return yhat, (X, caches, rep)
    return yhat


def transformer_backward(params, config: ModelConfig, cache, dyhat):
    """Gradients of a scalar loss given ``dL/dyhat``."""
    X, caches, rep = cache
    nh = config.n_heads
    scale = 1.0 / np.sqrt(config.d_k)
    grads = {}
    grads["W_o"] = rep.T @ dyhat
    grads["b_o"] = dyhat.sum(axis=0)
    dh = (dyhat @ params["W_o"].T)[:, None, :]
    for l in reversed(range(config.n_layers)):
        p = f"l{l}."
        h, hq, q, k, v, w, a, m1, ln1, h1, z, hid, m2, ln2 = caches[l]
        dr2, grads[p + "ln2_g"], grads[p + "ln2_b"] = layer_norm_backward(dh, params[p + "ln2_g"], ln2)
        df = dr2 if m2 is None else dr2 * m2
        grads[p + "W2"] = weight_grad(hid, df)
        grads[p + "b2"] = df.sum(axis=(0, 1))
        dz = (df @ params[p + "W2"].T) * (z > 0)
        grads[p + "W1"] = weight_grad(h1, dz)
        grads[p + "b1"] = dz.sum(axis=(0, 1))
        dh1 = dr2 + dz @ params[p + "W1"].T
        dr1, grads[p + "ln1_g"], grads[p + "ln1_b"] = layer_norm_backward(dh1, params[p + "ln1_g"], ln1)
        datt = dr1 if m1 is None else dr1 * m1
        grads[p + "Wo"] = weight_grad(a, datt)
        da = _split_heads(datt @ params[p + "Wo"].T, nh)
        dw = da @ v.transpose(0, 1, 3, 2)
        dv = w.transpose(0, 1, 3, 2) @ da
        ds = softmax_backward(w, dw) * scale
        dq = _merge_heads(ds @ k)
        dk_ = _merge_heads(ds.transpose(0, 1, 3, 2) @ q)
        dv = _merge_heads(dv)
        grads[p + "Wq"] = weight_grad(hq, dq)
        grads[p + "Wk"] = weight_grad(h, dk_)
        grads[p + "Wv"] = weight_grad(h, dv)
        dh_in = dk_ @ params[p + "Wk"].T + dv @ params[p + "Wv"].T
        dhq = dr1 + dq @ params[p + "Wq"].T
        if hq.shape[1] == h.shape[1]:
            dh_in += dhq
        else:
            dh_in[:, -1:, :] += dhq
        dh = dh_in
    grads["E"] = weight_grad(X, dh)
    return grads


def forward_transformer(params, config: ModelConfig, inputs) -> np.ndarray:
    """Predict ``horizon`` values from one ``(window_len, n_features)`` window."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2:
        raise ShapeMismatch(f"expected a (T, {config.n_features}) window, got {inputs.shape}")
    return transformer_forward(params, config, inputs[None])[0]


def attention_weights(params, config: ModelConfig, X) -> list:
    """Per-block attention weights ``(batch, heads, queries, keys)`` of a forward pass.

    The last block attends from the final position only, so its query axis
    has length 1.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[None]
    _, (_, caches, _) = transformer_forward(params, config, X, keep_cache=True)
    return [c[5] for c in caches]
