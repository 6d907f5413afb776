"""Windowing, loss gradients, Adam training with early stopping, prediction."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..exceptions import ConfigError, Diverged, InsufficientData, ModelError, NonFiniteGradient
from ..frame import SeriesFrame
from ..preprocessing import StandardizationParams
from .baseline import persistence_windows
from .config import ModelConfig, TrainConfig
from .lstm import init_lstm_params, lstm_backward, lstm_forward
from .optim import AdamState, adam_step
from .transformer import init_transformer_params, transformer_backward, transformer_forward

__all__ = [
    "init_params",
    "model_forward",
    "gradients",
    "make_windows",
    "predict_windows",
    "TrainLog",
    "train_arrays",
    "train",
    "ForecastResult",
    "predict_horizon",
    "param_count",
]

log = logging.getLogger(__name__)

_IMPL = {
    "transformer": (init_transformer_params, transformer_forward, transformer_backward),
    "lstm": (init_lstm_params, lstm_forward, lstm_backward),
}


def _impl(kind):
    try:
        return _IMPL[kind]
    except KeyError:
        raise ConfigError(f"model kind must be one of {sorted(_IMPL)}, got {kind!r}") from None


def init_params(kind: str, config: ModelConfig, rng=None) -> dict:
    return _impl(kind)[0](config, rng)


def param_count(params: dict) -> int:
    return int(sum(p.size for p in params.values()))


def model_forward(kind, params, config, X, training_rng=None, keep_cache=False):
    return _impl(kind)[1](params, config, X, training_rng=training_rng, keep_cache=keep_cache)


def gradients(params, config: ModelConfig, X, Y, kind: str = "transformer", training_rng=None):
    """Loss and exact gradients for a batch.

    The loss is the mean over batch and horizon of the squared error, so on
    a single sample ``dL/db_o = 2 * (yhat - y) / horizon``. Returns
    ``(loss, grads)`` with ``grads`` keyed like ``params``.
    """
    _, fwd, bwd = _impl(kind)
    Y = np.asarray(Y, dtype=np.float64).reshape(len(X), config.horizon)
    # Overflow surfaces as NonFinite* errors below, so numpy's warnings are noise.
    with np.errstate(over="ignore", invalid="ignore"):
        yhat, cache = fwd(params, config, X, training_rng=training_rng, keep_cache=True)
        resid = yhat - Y
        loss = float(np.mean(resid * resid))
        grads = bwd(params, config, cache, 2.0 * resid / resid.size)
    for k, g in grads.items():
        if not np.isfinite(g).all():
            raise NonFiniteGradient(f"non-finite gradient for '{k}'")
    return loss, grads


def make_windows(X, window_len: int, horizon: int, y=None):
    """Sliding windows over a time-major array.

    Returns ``(inputs, targets)`` where ``inputs[i] = X[i : i + window_len]``
    and ``targets[i] = y[i + window_len : i + window_len + horizon]``. Without
    ``y`` every full window is returned and ``targets`` is ``None``. Inputs
    are a read-only view.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < window_len:
        return np.empty((0, window_len, X.shape[1])), None if y is None else np.empty((0, horizon))
    windows = sliding_window_view(X, window_len, axis=0).transpose(0, 2, 1)
    if y is None:
        return windows, None
    y = np.asarray(y, dtype=np.float64).ravel()
    n = X.shape[0] - window_len - horizon + 1
    if n < 1:
        return windows[:0], np.empty((0, horizon))
    targets = sliding_window_view(y[window_len:], horizon)[:n]
    return windows[:n], targets


def predict_windows(kind, params, config, windows, batch_size=512) -> np.ndarray:
    out = np.empty((len(windows), config.horizon))
    for s in range(0, len(windows), batch_size):
        out[s : s + batch_size] = model_forward(kind, params, config, windows[s : s + batch_size])
    return out


@dataclass
class TrainLog:
    records: list = field(default_factory=list)
    best_step: int = 0
    best_val_mse: float = float("inf")
    stopped_early: bool = False
    steps: int = 0

    def to_dict(self):
        return {
            "records": self.records,
            "best_step": self.best_step,
            "best_val_mse": self.best_val_mse,
            "stopped_early": self.stopped_early,
            "steps": self.steps,
        }


def _eval_subset(n, limit):
    if n <= limit:
        return np.arange(n)
    return np.linspace(0, n - 1, limit).round().astype(np.int64)


def _mse(kind, params, config, windows, targets):
    pred = predict_windows(kind, params, config, windows)
    return float(np.mean((pred - targets) ** 2))


def train_arrays(
    kind: str,
    X_train,
    y_train,
    X_val,
    y_val,
    model_config: ModelConfig,
    train_config: TrainConfig | None = None,
):
    """Fit a forecaster on standardized, time-major arrays.

    ``X_*`` are ``(n_samples, n_features)`` and ``y_*`` the aligned target
    series. Minibatches are drawn from seeded per-epoch permutations, so a
    fixed ``model_config.seed`` gives bit-identical parameters. Returns the
    parameters with the best validation MSE and the :class:`TrainLog`.
    """
    tc = train_config or TrainConfig()
    W, H = model_config.window_len, model_config.horizon
    tr_in, tr_out = make_windows(X_train, W, H, y_train)
    va_in, va_out = make_windows(X_val, W, H, y_val)
    if len(tr_in) < 1:
        raise InsufficientData(f"no training windows (need > {W + H - 1} rows)")
    if len(va_in) < 1:
        raise InsufficientData(f"no validation windows (need > {W + H - 1} rows)")
    if tr_in.shape[2] != model_config.n_features:
        raise ConfigError(
            f"model expects {model_config.n_features} features, data has {tr_in.shape[2]}"
        )

    seed = model_config.seed
    params = init_params(kind, model_config, np.random.default_rng(np.random.SeedSequence([seed, 0])))
    batch_rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    drop_rng = np.random.default_rng(np.random.SeedSequence([seed, 2])) if model_config.dropout > 0 else None
    state = AdamState.zeros_like(params)

    va_idx = _eval_subset(len(va_in), tc.max_eval_windows)
    best = params
    best_train = float("inf")
    bad = 0
    trainlog = TrainLog()
    order = np.empty(0, dtype=np.int64)
    pos = 0
    step = 0
    batch_losses = []
    while step < tc.max_steps:
        if pos >= len(order):
            order = batch_rng.permutation(len(tr_in))
            pos = 0
        idx = np.sort(order[pos : pos + tc.batch_size])
        pos += tc.batch_size
        try:
            loss, grads = gradients(params, model_config, tr_in[idx], tr_out[idx], kind, drop_rng)
        except ModelError as exc:
            raise Diverged(f"training diverged at step {step}: {exc}") from exc
        if tc.clip_norm is not None:
            norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
            if norm > tc.clip_norm:
                grads = {k: g * (tc.clip_norm / norm) for k, g in grads.items()}
        batch_losses.append(loss)
        params, state = adam_step(params, grads, state, tc)
        step += 1

        if step % tc.eval_every and step != tc.max_steps:
            continue
        try:
            val = _mse(kind, params, model_config, va_in[va_idx], va_out[va_idx])
        except ModelError as exc:
            raise Diverged(f"training diverged at step {step}: {exc}") from exc
        if not np.isfinite(val):
            raise Diverged(f"validation loss is {val} at step {step}")
        trn = float(np.mean(batch_losses))
        batch_losses = []
        best_train = min(best_train, trn)
        improved = val < trainlog.best_val_mse
        if improved:
            trainlog.best_val_mse = val
            trainlog.best_step = step
            best = params
            bad = 0
        else:
            bad += 1
        trainlog.records.append(
            {"step": step, "train_mse": trn, "best_train_mse": best_train, "val_mse": val,
             "best_val_mse": trainlog.best_val_mse}
        )
        log.debug("step %d train %.5g val %.5g", step, trn, val)
        if bad > tc.patience:
            trainlog.stopped_early = True
            break
    trainlog.steps = step
    return best, trainlog


def train(
    frame_train: SeriesFrame,
    frame_val: SeriesFrame,
    kind: str,
    model_config: ModelConfig,
    train_config: TrainConfig | None = None,
    features: Sequence[str] | None = None,
    target: str = "drum_level",
):
    """Frame-level :func:`train_arrays`; frames must already be standardized.

    ``features`` defaults to every column, target included.
    """
    features = list(frame_train.names if features is None else features)
    return train_arrays(
        kind,
        frame_train.to_array(features),
        frame_train[target],
        frame_val.to_array(features),
        frame_val[target],
        model_config,
        train_config,
    )


@dataclass
class ForecastResult:
    """Direct multi-horizon forecasts in target units.

    Row ``i`` forecasts the ``horizon`` values that follow window ``i``.
    """

    predictions: np.ndarray
    targets: np.ndarray
    model: str = ""

    def __post_init__(self):
        self.predictions = np.asarray(self.predictions, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.predictions.shape != self.targets.shape:
            raise ConfigError("predictions and targets must have the same shape")

    @property
    def horizon(self) -> int:
        return self.predictions.shape[1]

    @property
    def horizons(self):
        return list(range(1, self.horizon + 1))

    def to_csv(self, path=None) -> str:
        from ..frame import format_float

        H = self.horizon
        header = ["window"] + [f"target_h{h}" for h in range(1, H + 1)] + [f"pred_h{h}" for h in range(1, H + 1)]
        lines = [",".join(header)]
        for i in range(len(self.predictions)):
            cells = [str(i)] + [format_float(v) for v in self.targets[i]] + [format_float(v) for v in self.predictions[i]]
            lines.append(",".join(cells))
        text = "\n".join(lines) + "\n"
        if path is not None:
            from pathlib import Path

            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_csv(cls, path, model=""):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        H = (data.shape[1] - 1) // 2
        return cls(data[:, 1 + H :], data[:, 1 : 1 + H], model)


def predict_horizon(
    params,
    config: ModelConfig,
    frame_test: SeriesFrame,
    standardization: StandardizationParams | None,
    kind: str = "transformer",
    features: Sequence[str] | None = None,
    target: str = "drum_level",
    model_name: str | None = None,
) -> ForecastResult:
    """Sliding-window direct forecasts over a test frame in physical units.

    ``frame_test`` is in raw units; it is standardized with
    ``standardization`` before the forward pass and predictions are mapped
    back to target units. ``kind="persistence"`` ignores ``params``.
    Yields ``len(frame_test) - window_len - horizon + 1`` rows.
    """
    W, H = config.window_len, config.horizon
    y_raw = frame_test[target]
    n = len(frame_test) - W - H + 1
    if n < 1:
        raise InsufficientData(f"test frame of {len(frame_test)} rows is too short for window {W} + horizon {H}")
    targets = sliding_window_view(y_raw[W:], H)[:n]
    name = model_name or kind
    if kind == "persistence":
        return ForecastResult(persistence_windows(y_raw, W, H), targets, name)
    features = list(frame_test.names if features is None else features)
    std = standardization.transform(frame_test.select(features)) if standardization else frame_test
    windows, _ = make_windows(std.to_array(features), W, H, y_raw)
    pred = predict_windows(kind, params, config, windows)
    if standardization is not None and target in standardization.means:
        pred = standardization.inverse_values(target, pred)
    return ForecastResult(pred, targets, name)
