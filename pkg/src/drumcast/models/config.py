from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from ..exceptions import ConfigError

__all__ = ["ModelConfig", "TrainConfig", "MODEL_KINDS"]

MODEL_KINDS = ("transformer", "lstm", "persistence")


@dataclass(frozen=True)
class ModelConfig:
    """Shape of a forecaster. The LSTM uses ``d_model`` as its hidden size."""

    window_len: int = 60
    n_features: int = 1
    d_model: int = 32
    n_heads: int = 2
    d_ff: int = 64
    n_layers: int = 2
    horizon: int = 1
    dropout: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("window_len", "n_features", "d_model", "n_heads", "d_ff", "n_layers", "horizon"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.d_model % self.n_heads:
            raise ConfigError("d_model must be divisible by n_heads")
        if not 0 <= self.dropout < 1:
            raise ConfigError("dropout must lie in [0, 1)")

    @property
    def d_k(self) -> int:
        return self.d_model // self.n_heads

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass(frozen=True)
class TrainConfig:
    """Minibatch Adam on MSE with early stopping on validation MSE.

    Validation runs every ``eval_every`` steps; training stops once
    ``patience`` consecutive evaluations fail to improve on the best so far.
    """

    learning_rate: float = 1e-3
    batch_size: int = 64
    max_steps: int = 2000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int = 5
    eval_every: int = 100
    clip_norm: float | None = None
    max_eval_windows: int = 2048

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigError("Adam betas must lie in (0, 1)")
        if self.batch_size < 1 or self.max_steps < 1 or self.eval_every < 1:
            raise ConfigError("batch_size, max_steps and eval_every must be >= 1")
        if self.patience < 0:
            raise ConfigError("patience must be >= 0")
        if self.clip_norm is not None and not self.clip_norm > 0:
            raise ConfigError("clip_norm must be positive")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})
