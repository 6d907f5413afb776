"""Numpy forecasters with hand-written gradients."""

from .baseline import persistence_predict, persistence_windows
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import MODEL_KINDS, ModelConfig, TrainConfig
from .estimators import LSTMForecaster, PersistenceForecaster, TransformerForecaster, make_forecaster
from .layers import attention, embed, feedforward, layer_norm, positional_encoding, softmax
from .lstm import forward_lstm, init_lstm_params
from .optim import AdamState, adam_step
from .training import (
    ForecastResult,
    TrainLog,
    gradients,
    init_params,
    make_windows,
    predict_horizon,
    train,
    train_arrays,
)
from .transformer import forward_transformer, init_transformer_params

__all__ = [
    "MODEL_KINDS",
    "ModelConfig",
    "TrainConfig",
    "Checkpoint",
    "save_checkpoint",
    "load_checkpoint",
    "TransformerForecaster",
    "LSTMForecaster",
    "PersistenceForecaster",
    "make_forecaster",
    "embed",
    "positional_encoding",
    "softmax",
    "attention",
    "feedforward",
    "layer_norm",
    "forward_transformer",
    "forward_lstm",
    "init_transformer_params",
    "init_lstm_params",
    "AdamState",
    "adam_step",
    "gradients",
    "init_params",
    "make_windows",
    "train",
    "train_arrays",
    "TrainLog",
    "ForecastResult",
    "predict_horizon",
    "persistence_predict",
    "persistence_windows",
]
