from __future__ import annotations

import numpy as np

from ..exceptions import ConfigError, EmptyHistory

__all__ = ["persistence_predict", "persistence_windows"]


def persistence_predict(y_history, horizon: int) -> np.ndarray:
    """Repeat the last observed value for every horizon step."""
    y = np.asarray(y_history, dtype=np.float64).ravel()
    if y.size == 0:
        raise EmptyHistory("persistence needs at least one observation")
    if horizon < 1:
        raise ConfigError("horizon must be >= 1")
    return np.full(horizon, y[-1])


def persistence_windows(y, window_len: int, horizon: int) -> np.ndarray:
    """Persistence forecasts for every window ``y[i : i + window_len]``."""
    y = np.asarray(y, dtype=np.float64).ravel()
    n = y.size - window_len - horizon + 1
    if n < 1:
        return np.empty((0, horizon))
    last = y[window_len - 1 : window_len - 1 + n]
    return np.repeat(last[:, None], horizon, axis=1)
