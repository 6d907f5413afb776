"""Scikit-learn style wrappers around the numpy forecasters.

``X`` is a time-major ``(n_samples, n_features)`` array and ``y`` the aligned
target series. ``predict(X)`` returns one row per full window of ``X``, so
``n_samples - window_len + 1`` rows of ``horizon`` forecasts each.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ..exceptions import ConfigError, InsufficientData, ShapeMismatch
from .baseline import persistence_windows
from .config import ModelConfig, TrainConfig
from .training import make_windows, predict_windows, train_arrays

__all__ = [
    "TransformerForecaster",
    "LSTMForecaster",
    "PersistenceForecaster",
    "make_forecaster",
]

_TRAIN_KEYS = (
    "learning_rate",
    "batch_size",
    "max_steps",
    "patience",
    "eval_every",
    "clip_norm",
    "max_eval_windows",
)


def _as_2d(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ShapeMismatch(f"expected a (n_samples, n_features) array, got shape {X.shape}")
    return X


class _NeuralForecaster(RegressorMixin, BaseEstimator):
    _kind = ""

    def _model_config(self, n_features):
        return ModelConfig(
            window_len=self.window_len,
            n_features=n_features,
            d_model=self.d_model,
            n_heads=getattr(self, "n_heads", 1),
            d_ff=getattr(self, "d_ff", 1),
            n_layers=getattr(self, "n_layers", 1),
            horizon=self.horizon,
            dropout=self.dropout,
            seed=self.seed,
        )

    def _train_config(self):
        return TrainConfig(**{k: getattr(self, k) for k in _TRAIN_KEYS})

    def fit(self, X, y, eval_set=None):
        """Train with early stopping.

        Without ``eval_set`` the last ``validation_fraction`` of the rows is
        held out, keeping time order.
        """
        X = _as_2d(X)
        y = np.asarray(y, dtype=np.float64).ravel()
        if len(y) != len(X):
            raise ShapeMismatch("X and y must have the same number of rows")
        if eval_set is None:
            n_val = int(round(len(X) * self.validation_fraction))
            n_val = max(n_val, self.window_len + self.horizon)
            if len(X) - n_val < self.window_len + self.horizon:
                raise InsufficientData(f"{len(X)} rows are too few to hold out a validation split")
            X_tr, y_tr, X_va, y_va = X[:-n_val], y[:-n_val], X[-n_val:], y[-n_val:]
        else:
            X_tr, y_tr = X, y
            X_va = _as_2d(eval_set[0])
            y_va = np.asarray(eval_set[1], dtype=np.float64).ravel()
        self.config_ = self._model_config(X.shape[1])
        self.params_, self.log_ = train_arrays(
            self._kind, X_tr, y_tr, X_va, y_va, self.config_, self._train_config()
        )
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        X = _as_2d(X)
        if X.shape[1] != self.n_features_in_:
            raise ShapeMismatch(f"fitted on {self.n_features_in_} features, got {X.shape[1]}")
        windows, _ = make_windows(X, self.window_len, self.horizon)
        return predict_windows(self._kind, self.params_, self.config_, windows)

    def score(self, X, y, sample_weight=None):
        """R^2 of the one-step forecast against ``y`` after each window."""
        X = _as_2d(X)
        y = np.asarray(y, dtype=np.float64).ravel()
        pred = self.predict(X[:-1])[:, 0]
        truth = y[self.window_len :]
        ss_res = float(np.sum((truth - pred) ** 2))
        ss_tot = float(np.sum((truth - truth.mean()) ** 2))
        return 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0


class TransformerForecaster(_NeuralForecaster):
    """Encoder-only transformer with a direct multi-horizon head."""

    _kind = "transformer"

    def __init__(
        self,
        window_len=60,
        horizon=1,
        d_model=32,
        n_heads=2,
        d_ff=64,
        n_layers=2,
        dropout=0.0,
        learning_rate=1e-3,
        batch_size=64,
        max_steps=2000,
        patience=5,
        eval_every=100,
        clip_norm=None,
        max_eval_windows=2048,
        validation_fraction=0.15,
        seed=0,
    ):
        self.window_len = window_len
        self.horizon = horizon
        self.d_model = d_model
        self.n_heads = n_heads
        self.d_ff = d_ff
        self.n_layers = n_layers
        self.dropout = dropout
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_steps = max_steps
        self.patience = patience
        self.eval_every = eval_every
        self.clip_norm = clip_norm
        self.max_eval_windows = max_eval_windows
        self.validation_fraction = validation_fraction
        self.seed = seed


class LSTMForecaster(_NeuralForecaster):
    """Single-layer LSTM; ``d_model`` is the hidden size."""

    _kind = "lstm"

    def __init__(
        self,
        window_len=60,
        horizon=1,
        d_model=32,
        dropout=0.0,
        learning_rate=1e-3,
        batch_size=64,
        max_steps=2000,
        patience=5,
        eval_every=100,
        clip_norm=None,
        max_eval_windows=2048,
        validation_fraction=0.15,
        seed=0,
    ):
        self.window_len = window_len
        self.horizon = horizon
        self.d_model = d_model
        self.dropout = dropout
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_steps = max_steps
        self.patience = patience
        self.eval_every = eval_every
        self.clip_norm = clip_norm
        self.max_eval_windows = max_eval_windows
        self.validation_fraction = validation_fraction
        self.seed = seed


class PersistenceForecaster(RegressorMixin, BaseEstimator):
    """Repeats the last value of column ``target_col`` over the horizon."""

    def __init__(self, window_len=60, horizon=1, target_col=0):
        self.window_len = window_len
        self.horizon = horizon
        self.target_col = target_col

    def fit(self, X, y=None, eval_set=None):
        X = _as_2d(X)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        X = _as_2d(X)
        col = X[:, self.target_col]
        # one extra element so the final full window is included
        padded = np.append(col, np.nan)
        return persistence_windows(padded, self.window_len, 1).repeat(self.horizon, axis=1)


_KINDS = {
    "transformer": TransformerForecaster,
    "lstm": LSTMForecaster,
    "persistence": PersistenceForecaster,
}


def make_forecaster(kind: str, **params):
    """Build a forecaster by name, ignoring parameters it does not take.

    ``target_col`` only matters for persistence; the neural models learn
    the target from ``y``.
    """
    try:
        cls = _KINDS[kind]
    except KeyError:
        raise ConfigError(f"unknown forecaster kind {kind!r}; expected one of {sorted(_KINDS)}") from None
    accepted = cls._get_param_names()
    unknown = set(params) - set(accepted) - {"target_col", "seed", *_TRAIN_KEYS, "n_heads", "d_ff", "n_layers"}
    if unknown:
        raise ConfigError(f"unknown forecaster parameters: {sorted(unknown)}")
    return cls(**{k: v for k, v in params.items() if k in accepted})
