from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import TrainConfig

__all__ = ["AdamState", "adam_step"]


@dataclass(frozen=True)
class AdamState:
    m: dict
    v: dict
    t: int = 0

    @classmethod
    def zeros_like(cls, params):
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()}, 0)


def adam_step(params, grads, state: AdamState, config: TrainConfig):
    """One bias-corrected Adam update; returns new ``(params, state)``.

    Inputs are left untouched.
    """
    t = state.t + 1
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    new_params, new_m, new_v = {}, {}, {}
    for k, p in params.items():
        g = grads[k]
        m = b1 * state.m[k] + (1.0 - b1) * g
        v = b2 * state.v[k] + (1.0 - b2) * (g * g)
        new_params[k] = p - config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.eps)
        new_m[k] = m
        new_v[k] = v
    return new_params, AdamState(new_m, new_v, t)
