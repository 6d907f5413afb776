"""Versioned JSON checkpoints.

Tensors are stored row-major as JSON numbers. Python writes the shortest
repr that parses back to the same double, so a reloaded checkpoint
reproduces predictions bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..exceptions import ConfigError
from ..preprocessing import StandardizationParams
from .config import ModelConfig, TrainConfig

__all__ = ["Checkpoint", "save_checkpoint", "load_checkpoint", "FORMAT", "VERSION"]

FORMAT = "drumcast-checkpoint"
VERSION = 1


@dataclass
class Checkpoint:
    kind: str
    config: ModelConfig
    params: dict
    features: list
    target: str
    standardization: StandardizationParams | None = None
    train_config: TrainConfig | None = None
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "format": FORMAT,
            "version": VERSION,
            "kind": self.kind,
            "seed": int(self.seed),
            "target": self.target,
            "features": list(self.features),
            "config": self.config.to_dict(),
            "train_config": self.train_config.to_dict() if self.train_config else None,
            "standardization": self.standardization.to_dict() if self.standardization else None,
            "params": {
                k: {"shape": list(v.shape), "data": np.asarray(v, dtype=np.float64).ravel().tolist()}
                for k, v in self.params.items()
            },
            "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != FORMAT:
            raise ConfigError("not a drumcast checkpoint")
        if d.get("version") != VERSION:
            raise ConfigError(f"unsupported checkpoint version {d.get('version')}")
        params = {
            k: np.asarray(v["data"], dtype=np.float64).reshape(v["shape"]) for k, v in d["params"].items()
        }
        return cls(
            kind=d["kind"],
            config=ModelConfig.from_dict(d["config"]),
            params=params,
            features=list(d["features"]),
            target=d["target"],
            standardization=StandardizationParams.from_dict(d["standardization"]) if d.get("standardization") else None,
            train_config=TrainConfig.from_dict(d["train_config"]) if d.get("train_config") else None,
            seed=int(d.get("seed", 0)),
            extra=d.get("extra", {}),
        )


def save_checkpoint(checkpoint: Checkpoint, path) -> str:
    text = json.dumps(checkpoint.to_dict(), separators=(",", ":")) + "\n"
    Path(path).write_text(text, encoding="utf-8")
    return text


def load_checkpoint(path) -> Checkpoint:
    return Checkpoint.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
