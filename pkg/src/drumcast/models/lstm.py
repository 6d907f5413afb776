"""Single-layer LSTM forecaster with backpropagation through time.

Gates are packed as ``[input, forget, output, candidate]`` along the last
axis of ``Wx`` (``n_features x 4H``), ``Wh`` (``H x 4H``) and ``b``. The final
hidden state goes through the linear head ``W_o``, ``b_o``.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import NonFiniteActivation, ShapeMismatch
from .config import ModelConfig
from .layers import sigmoid, weight_grad

__all__ = [
    "init_lstm_params",
    "lstm_param_shapes",
    "lstm_forward",
    "lstm_backward",
    "forward_lstm",
]


def lstm_param_shapes(config: ModelConfig) -> dict:
    Hd = config.d_model
    return {
        "Wx": (config.n_features, 4 * Hd),
        "Wh": (Hd, 4 * Hd),
        "b": (4 * Hd,),
        "W_o": (Hd, config.horizon),
        "b_o": (config.horizon,),
    }


def init_lstm_params(config: ModelConfig, rng=None) -> dict:
    rng = np.random.default_rng(config.seed) if rng is None else rng
    params = {}
    for name, shape in lstm_param_shapes(config).items():
        if len(shape) == 1:
            params[name] = np.zeros(shape)
        else:
            bound = np.sqrt(1.0 / shape[0])
            params[name] = rng.uniform(-bound, bound, size=shape)
    return params


def lstm_forward(params, config: ModelConfig, X, training_rng=None, keep_cache=False):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3 or X.shape[2] != config.n_features:
        raise ShapeMismatch(f"expected (batch, T, {config.n_features}) inputs, got {X.shape}")
    B, T, _ = X.shape
    Hd = config.d_model
    Wh = params["Wh"]
    xz = X @ params["Wx"] + params["b"]
    h = np.zeros((B, Hd))
    c = np.zeros((B, Hd))
    steps = []
    for t in range(T):
        zt = xz[:, t, :] + h @ Wh
        gates = sigmoid(zt[:, : 3 * Hd])
        g = np.tanh(zt[:, 3 * Hd :])
        i, f, o = gates[:, :Hd], gates[:, Hd : 2 * Hd], gates[:, 2 * Hd :]
        c_prev, h_prev = c, h
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        if keep_cache:
            steps.append((h_prev, c_prev, i, f, o, g, tc))
    mask = None
    rep = h
    if training_rng is not None and config.dropout > 0:
        mask = (training_rng.random(h.shape) >= config.dropout) / (1.0 - config.dropout)
        rep = h * mask
    yhat = rep @ params["W_o"] + params["b_o"]
    if not np.isfinite(yhat).all():
        raise NonFiniteActivation("non-finite LSTM prediction")
    if keep_cache:
        return yhat, (X, steps, rep, mask)
    return yhat


def lstm_backward(params, config: ModelConfig, cache, dyhat):
    X, steps, rep, mask = cache
    Hd = config.d_model
    Wh = params["Wh"]
    grads = {"W_o": rep.T @ dyhat, "b_o": dyhat.sum(axis=0)}
    dh = dyhat @ params["W_o"].T
    if mask is not None:
        dh = dh * mask
    dc = np.zeros_like(dh)
    B, T, _ = X.shape
    dz = np.empty((B, T, 4 * Hd))
    for t in reversed(range(T)):
        h_prev, c_prev, i, f, o, g, tc = steps[t]
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dz[:, t, :Hd] = di * i * (1.0 - i)
        dz[:, t, Hd : 2 * Hd] = df * f * (1.0 - f)
        dz[:, t, 2 * Hd : 3 * Hd] = do * o * (1.0 - o)
        dz[:, t, 3 * Hd :] = dg * (1.0 - g * g)
        dh = dz[:, t, :] @ Wh.T
        dc = dc * f
    h_prevs = np.stack([s[0] for s in steps], axis=1)
    grads["Wx"] = weight_grad(X, dz)
    grads["Wh"] = weight_grad(h_prevs, dz)
    grads["b"] = dz.sum(axis=(0, 1))
    return grads


def forward_lstm(params, config: ModelConfig, inputs) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2:
        raise ShapeMismatch(f"expected a (T, {config.n_features}) window, got {inputs.shape}")
    return lstm_forward(params, config, inputs[None])[0]
