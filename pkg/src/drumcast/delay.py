"""Delay inference by peak lagged correlation, and lag augmentation."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import (
    ConfigError,
    DataError,
    DegenerateWindow,
    DrumcastError,
    LagExceedsLength,
    SeriesTooShort,
)
from .frame import SeriesFrame, as_frame

__all__ = [
    "DelayEntry",
    "DelayTable",
    "AugmentSpec",
    "cross_cov_at_lag",
    "lag_profile",
    "infer_delay",
    "build_delay_table",
    "augment_with_lags",
    "lag_column",
    "DelayAugmenter",
]


def cross_cov_at_lag(x, y, lag: int) -> float:
    """Pearson correlation of ``x[0 : n - lag]`` with ``y[lag : n]``.

    A positive lag means ``x`` leads ``y``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    if y.size != n:
        raise DataError("x and y must have the same length")
    if not 0 <= lag < n - 2:
        raise ConfigError(f"lag must satisfy 0 <= lag < n - 2 (n={n}), got {lag}")
    xw = x[: n - lag]
    yw = y[lag:]
    xc = xw - xw.mean()
    yc = yw - yw.mean()
    sx = np.sqrt(np.mean(xc * xc))
    sy = np.sqrt(np.mean(yc * yc))
    if sx == 0 or sy == 0:
        raise DegenerateWindow(f"zero variance window at lag {lag}")
    r = float(np.mean(xc * yc) / (sx * sy))
    return min(1.0, max(-1.0, r))


def lag_profile(x, y, max_lag: int) -> np.ndarray:
    """Correlation at every lag ``0..max_lag``; degenerate lags give 0.

    Window sums come from cumulative sums of the globally centered series,
    so each lag costs one dot product.
    """
    return _profile(x, y, max_lag)[0]


def _profile(x, y, max_lag):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    x = x - x.mean()
    y = y - y.mean()
    cx = np.concatenate(([0.0], np.cumsum(x)))
    cxx = np.concatenate(([0.0], np.cumsum(x * x)))
    cy = np.concatenate(([0.0], np.cumsum(y)))
    cyy = np.concatenate(([0.0], np.cumsum(y * y)))
    # A constant window leaves a rounding-level variance rather than exactly 0.
    tol_x = 1e-13 * max(cxx[n] / n, 1e-300)
    tol_y = 1e-13 * max(cyy[n] / n, 1e-300)
    prof = np.zeros(max_lag + 1)
    valid = np.zeros(max_lag + 1, dtype=bool)
    for k in range(max_lag + 1):
        m = n - k
        mx = cx[m] / m
        my = (cy[n] - cy[k]) / m
        vx = cxx[m] / m - mx * mx
        vy = (cyy[n] - cyy[k]) / m - my * my
        if vx <= tol_x or vy <= tol_y:
            continue
        sxy = float(np.dot(x[:m], y[k:]))
        prof[k] = (sxy / m - mx * my) / math.sqrt(vx * vy)
        valid[k] = True
    return np.clip(prof, -1.0, 1.0), valid


@dataclass
class DelayEntry:
    variable: str
    optimal_lag: int
    peak_value: float
    sign: int = 1
    profile: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self):
        return {
            "variable": self.variable,
            "optimal_lag": int(self.optimal_lag),
            "peak_value": float(self.peak_value),
            "sign": int(self.sign),
        }


def infer_delay(x, y, max_lag: int = 600, allow_negative: bool = False, variable: str = "x") -> DelayEntry:
    """Lag of ``x`` behind which ``y`` correlates best.

    Maximizes the signed correlation (ties go to the smallest lag). With
    ``allow_negative`` the absolute correlation is maximized instead and the
    sign of the peak is recorded. A pair with no usable lag at all raises
    :class:`DegenerateWindow`.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if max_lag < 1:
        raise ConfigError("max_lag must be >= 1")
    if x.size != y.size:
        raise DataError("x and y must have the same length")
    if x.size <= 2 * max_lag:
        raise SeriesTooShort(f"series of length {x.size} is too short for max_lag={max_lag}")
    prof, valid = _profile(x, y, max_lag)
    if not valid.any():
        raise DegenerateWindow(f"'{variable}' has zero variance at every lag")
    k = int(np.argmax(np.abs(prof) if allow_negative else prof))
    if prof[k] != 0.0:
        # Two-pass value at the chosen lag, free of cumulative-sum rounding.
        prof[k] = cross_cov_at_lag(x, y, k)
    peak = float(prof[k])
    sign = -1 if peak < 0 else 1
    return DelayEntry(variable, k, peak, sign, prof)


@dataclass
class DelayTable:
    target: str
    max_lag: int
    entries: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, variable) -> DelayEntry:
        return self.entries[variable]

    @property
    def lags(self) -> dict:
        return {v: e.optimal_lag for v, e in self.entries.items()}

    def to_dict(self):
        d = {
            "target": self.target,
            "max_lag": int(self.max_lag),
            "entries": [e.to_dict() for e in self.entries.values()],
        }
        if self.failures:
            d["failures"] = [{"variable": v, "error": m} for v, m in self.failures.items()]
        return d

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_json(cls, text_or_path):
        text = str(text_or_path)
        if not text.lstrip().startswith("{"):
            text = Path(text_or_path).read_text(encoding="utf-8")
        d = json.loads(text)
        entries = {
            e["variable"]: DelayEntry(
                e["variable"], int(e["optimal_lag"]), float(e["peak_value"]), int(e.get("sign", 1))
            )
            for e in d["entries"]
        }
        failures = {f["variable"]: f["error"] for f in d.get("failures", [])}
        return cls(d["target"], int(d["max_lag"]), entries, failures)

    def profiles_csv(self, path=None) -> str:
        """Profiles as CSV: ``lag`` then one column per variable."""
        names = [v for v, e in self.entries.items() if e.profile is not None]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lag", *names])
        for k in range(self.max_lag + 1):
            w.writerow([k, *(format(float(self.entries[v].profile[k]), ".17g") for v in names)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def build_delay_table(
    frame,
    target: str,
    variables: Sequence[str],
    max_lag: int = 600,
    allow_negative: bool = False,
    n_jobs: int = 1,
) -> DelayTable:
    """Infer the delay of every variable against ``target``.

    Per-variable failures are collected in ``failures``; the rest of the
    batch still runs.
    """
    frame = as_frame(frame)
    frame.require([target])
    y = frame[target]

    def run(v):
        try:
            return infer_delay(frame[v], y, max_lag, allow_negative, variable=v)
        except DrumcastError as exc:
            return exc

    variables = list(variables)
    if n_jobs > 1 and len(variables) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(run, variables))
    else:
        results = [run(v) for v in variables]
    table = DelayTable(target, max_lag)
    for v, r in zip(variables, results):
        if isinstance(r, Exception):
            table.failures[v] = f"{type(r).__name__}: {r}"
        else:
            table.entries[v] = r
    return table


@dataclass(frozen=True)
class AugmentSpec:
    """Which lagged copies to add.

    ``lags`` maps variable to a list of lags; ``None`` takes each variable's
    optimal lag from the delay table.
    """

    keep_original: bool = True
    lags: Mapping[str, Sequence[int]] | None = None


def lag_column(name: str, lag: int) -> str:
    return f"{name}__lag{int(lag)}"


def augment_with_lags(frame, table: DelayTable | None = None, spec: AugmentSpec | None = None) -> SeriesFrame:
    """Add ``<name>__lag<k>`` columns holding the value from ``k`` rows earlier.

    The first ``max(lags)`` rows are dropped so no column is undefined.
    Originals come first in input order, then lagged columns ordered by
    variable (input order) and ascending lag. With ``keep_original=False``
    the originals of the lagged variables are dropped; other columns stay.
    """
    frame = as_frame(frame)
    spec = spec or AugmentSpec()
    if spec.lags is not None:
        lags = {v: sorted({int(k) for k in ks}) for v, ks in spec.lags.items()}
    elif table is not None:
        lags = {v: [int(k)] for v, k in table.lags.items()}
    else:
        raise ConfigError("either a delay table or explicit lags is required")
    frame.require(list(lags))
    n = len(frame)
    all_lags = [k for ks in lags.values() for k in ks]
    for v, ks in lags.items():
        for k in ks:
            if k < 0:
                raise ConfigError(f"lag for '{v}' must be >= 0")
            if k >= n:
                raise LagExceedsLength(f"lag {k} for '{v}' is not shorter than the frame ({n})")
    drop = max(all_lags, default=0)

    columns = {}
    for name in frame.names:
        if spec.keep_original or name not in lags:
            columns[name] = frame[name][drop:]
    for name in frame.names:
        for k in lags.get(name, ()):
            col = lag_column(name, k)
            if col in columns:
                raise ConfigError(f"augmented column '{col}' collides with an existing column")
            columns[col] = frame[name][drop - k : n - k]
    return SeriesFrame(frame.timestamps[drop:], columns, frame.sample_period_s)


class DelayAugmenter(TransformerMixin, BaseEstimator):
    """Learn per-variable delays against ``target`` and append lagged copies.

    ``fit`` stores the :class:`DelayTable` in ``table_``; ``transform``
    returns the augmented :class:`SeriesFrame`.
    """

    def __init__(self, target="drum_level", variables=None, max_lag=600, allow_negative=False, keep_original=True):
        self.target = target
        self.variables = variables
        self.max_lag = max_lag
        self.allow_negative = allow_negative
        self.keep_original = keep_original

    def fit(self, X, y=None):
        frame = as_frame(X)
        variables = self.variables
        if variables is None:
            variables = [n for n in frame.names if n != self.target]
        self.table_ = build_delay_table(frame, self.target, variables, self.max_lag, self.allow_negative)
        return self

    def transform(self, X):
        return augment_with_lags(as_frame(X), self.table_, AugmentSpec(self.keep_original))
