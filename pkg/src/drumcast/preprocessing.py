"""Cleaning, smoothing, standardization and chronological splitting.

The frame-level functions (``interpolate_missing``, ``remove_outliers``,
``smooth``, ``standardize``, ``split``) are pure: they return new frames.
The array kernels underneath are also exposed as scikit-learn transformers
(:class:`GapInterpolator`, :class:`HampelFilter`, :class:`MovingAverage`,
:class:`ZScoreScaler`) that work column-wise on ``(n_samples, n_vars)``
arrays with time running down axis 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.base import BaseEstimator, OneToOneFeatureMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import (
    ConfigError,
    DataError,
    DegenerateVariance,
    EmptySplit,
    GapTooLong,
    WindowTooLarge,
)
from .frame import SeriesFrame

__all__ = [
    "StandardizationParams",
    "SplitSpec",
    "PreprocessConfig",
    "fill_gaps",
    "hampel",
    "moving_average",
    "interpolate_missing",
    "remove_outliers",
    "smooth",
    "standardize",
    "inverse_standardize",
    "split",
    "split_lengths",
    "preprocess",
    "GapInterpolator",
    "HampelFilter",
    "MovingAverage",
    "ZScoreScaler",
]

MAD_SCALE = 1.4826


# ---------------------------------------------------------------- kernels


def _runs(mask: np.ndarray):
    """Yield (start, stop) of each run of True values."""
    if not mask.any():
        return
    padded = np.concatenate(([False], mask, [False]))
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    yield from zip(edges[::2].tolist(), edges[1::2].tolist())


def fill_gaps(values, max_gap: int = 10) -> np.ndarray:
    """Fill NaN gaps of one series.

    Interior gaps are linearly interpolated; leading and trailing gaps take
    the nearest observed value. Any gap longer than ``max_gap`` raises
    :class:`GapTooLong`.
    """
    x = np.array(values, dtype=np.float64)
    gaps = np.isnan(x)
    if not gaps.any():
        return x
    for start, stop in _runs(gaps):
        if stop - start > max_gap:
            raise GapTooLong(f"gap of {stop - start} samples at index {start} exceeds max_gap={max_gap}")
    idx = np.arange(x.size)
    observed = ~gaps
    # np.interp holds the end values constant outside the observed range.
    x[gaps] = np.interp(idx[gaps], idx[observed], x[observed])
    return x


def _rolling(x: np.ndarray, window: int, func) -> np.ndarray:
    """Centered rolling statistic; edge windows are truncated to fit."""
    n = x.size
    half = window // 2
    out = np.empty(n)
    if n >= window:
        out[half:n - half] = func(sliding_window_view(x, window), axis=1)
        edge = range(half)
    else:
        edge = range(n)
    for i in edge:
        out[i] = func(x[: i + half + 1])
        j = n - 1 - i
        out[j] = func(x[j - half:])
    return out


def hampel(values, window: int = 11, n_sigmas: float = 3.0):
    """Hampel filter for one series.

    Returns ``(cleaned, flagged)`` where ``flagged`` marks points whose
    distance from the rolling median exceeds ``n_sigmas * 1.4826 * MAD``;
    those points are replaced by the median.
    """
    _check_odd(window, minimum=3, what="window")
    if not n_sigmas > 0:
        raise ConfigError("n_sigmas must be positive")
    x = np.asarray(values, dtype=np.float64)
    if window > x.size:
        raise WindowTooLarge(f"window {window} is longer than the series ({x.size})")
    med = _rolling(x, window, np.median)
    half = window // 2
    n = x.size
    mad = np.empty(n)
    if n >= window:
        w = sliding_window_view(x, window)
        mad[half:n - half] = np.median(np.abs(w - med[half:n - half, None]), axis=1)
    for i in range(half):
        mad[i] = np.median(np.abs(x[: i + half + 1] - med[i]))
        j = n - 1 - i
        mad[j] = np.median(np.abs(x[j - half:] - med[j]))
    flagged = np.abs(x - med) > n_sigmas * MAD_SCALE * mad
    cleaned = np.where(flagged, med, x)
    return cleaned, flagged


def moving_average(values, window: int = 5) -> np.ndarray:
    """Centered moving average; near the edges the window is truncated."""
    _check_odd(window, minimum=1, what="window")
    x = np.asarray(values, dtype=np.float64)
    if window == 1:
        return x.copy()
    return _rolling(x, window, np.mean)


def _check_odd(window, minimum, what):
    if int(window) != window or window < minimum or window % 2 == 0:
        raise ConfigError(f"{what} must be an odd integer >= {minimum}, got {window}")


# ---------------------------------------------------------------- frame ops


def interpolate_missing(frame: SeriesFrame, max_gap: int = 10) -> SeriesFrame:
    return frame.with_variables({n: fill_gaps(v, max_gap) for n, v in frame.variables.items()})


def remove_outliers(frame: SeriesFrame, window: int = 11, n_sigmas: float = 3.0) -> SeriesFrame:
    return frame.with_variables(
        {n: hampel(v, window, n_sigmas)[0] for n, v in frame.variables.items()}
    )


def smooth(frame: SeriesFrame, window: int = 5) -> SeriesFrame:
    return frame.with_variables({n: moving_average(v, window) for n, v in frame.variables.items()})


@dataclass(frozen=True)
class StandardizationParams:
    """Per-variable mean and population standard deviation."""

    means: dict
    scales: dict

    def __post_init__(self):
        for name, s in self.scales.items():
            if not s > 0:
                raise DegenerateVariance(f"scale for '{name}' must be positive")

    @property
    def names(self):
        return tuple(self.means)

    def transform_values(self, name, values):
        return (np.asarray(values, dtype=np.float64) - self.means[name]) / self.scales[name]

    def inverse_values(self, name, values):
        return np.asarray(values, dtype=np.float64) * self.scales[name] + self.means[name]

    def transform(self, frame: SeriesFrame) -> SeriesFrame:
        """Standardize the variables this object knows about; others pass through."""
        return frame.with_variables(
            {
                n: self.transform_values(n, v) if n in self.means else v
                for n, v in frame.variables.items()
            }
        )

    def inverse(self, frame: SeriesFrame) -> SeriesFrame:
        return frame.with_variables(
            {
                n: self.inverse_values(n, v) if n in self.means else v
                for n, v in frame.variables.items()
            }
        )

    def to_dict(self):
        return {
            "variables": [
                {"name": n, "mean": float(self.means[n]), "scale": float(self.scales[n])}
                for n in self.means
            ]
        }

    @classmethod
    def from_dict(cls, d):
        entries = d["variables"]
        return cls(
            {e["name"]: float(e["mean"]) for e in entries},
            {e["name"]: float(e["scale"]) for e in entries},
        )


def standardize(frame: SeriesFrame, fit_range=None, names=None):
    """Z-score each variable with statistics from ``fit_range`` only.

    ``fit_range`` is ``(start, stop)`` row indices or a slice; pass the
    training span so validation and test rows never inform the scaling.
    Returns ``(standardized_frame, params)``.
    """
    if fit_range is None:
        sl = slice(None)
    elif isinstance(fit_range, slice):
        sl = fit_range
    else:
        sl = slice(*fit_range)
    names = frame.names if names is None else tuple(names)
    frame.require(names)
    means, scales = {}, {}
    for n in names:
        x = frame.variables[n][sl]
        if x.size == 0:
            raise DataError("fit_range selects no rows")
        if np.isnan(x).any():
            raise DataError(f"variable '{n}' has gaps inside the fit range")
        mean = float(np.mean(x))
        scale = float(np.sqrt(np.mean((x - mean) ** 2)))
        if not scale > 1e-12 * max(1.0, abs(mean)):
            raise DegenerateVariance(f"variable '{n}' is constant over the fit range")
        means[n] = mean
        scales[n] = scale
    params = StandardizationParams(means, scales)
    return params.transform(frame), params


def inverse_standardize(frame: SeriesFrame, params: StandardizationParams) -> SeriesFrame:
    return params.inverse(frame)


@dataclass(frozen=True)
class SplitSpec:
    """Chronological train/validation/test fractions."""

    train_fraction: float = 0.7
    validation_fraction: float = 0.15
    test_fraction: float = 0.15

    def __post_init__(self):
        fr = (self.train_fraction, self.validation_fraction, self.test_fraction)
        if any(not f > 0 for f in fr):
            raise ConfigError("split fractions must be positive")
        if not math.isclose(sum(fr), 1.0, abs_tol=1e-9):
            raise ConfigError(f"split fractions must sum to 1, got {sum(fr)}")

    @classmethod
    def parse(cls, text: str) -> "SplitSpec":
        parts = [float(p) for p in text.split(",")]
        if len(parts) != 3:
            raise ConfigError("split needs three comma-separated fractions")
        return cls(*parts)


def split_lengths(n: int, spec: SplitSpec):
    """Partition sizes: validation and test are floored, train takes the remainder."""
    # The tiny offset keeps exact products such as 100 * 0.1 from flooring low.
    n_val = int(math.floor(n * spec.validation_fraction + 1e-9))
    n_test = int(math.floor(n * spec.test_fraction + 1e-9))
    return n - n_val - n_test, n_val, n_test


def split(frame: SeriesFrame, spec: SplitSpec | None = None, min_length: int = 1):
    """Contiguous train/validation/test frames.

    Raises :class:`EmptySplit` when a partition has fewer than
    ``min_length`` rows (pass the longest model window).
    """
    spec = spec or SplitSpec()
    lengths = split_lengths(len(frame), spec)
    for label, size in zip(("train", "validation", "test"), lengths):
        if size < max(1, min_length):
            raise EmptySplit(f"{label} split has {size} rows, need at least {max(1, min_length)}")
    a = lengths[0]
    b = a + lengths[1]
    return frame.slice(0, a), frame.slice(a, b), frame.slice(b, None)


@dataclass(frozen=True)
class PreprocessConfig:
    max_gap: int = 10
    outlier_window: int = 11
    n_sigmas: float = 3.0
    smooth_window: int = 5

    def __post_init__(self):
        if self.max_gap < 0:
            raise ConfigError("max_gap must be >= 0")
        _check_odd(self.outlier_window, 3, "outlier_window")
        _check_odd(self.smooth_window, 1, "smooth_window")
        if not self.n_sigmas > 0:
            raise ConfigError("n_sigmas must be positive")


def preprocess(frame: SeriesFrame, config: PreprocessConfig | None = None, fit_range=None):
    """Run interpolate -> outliers -> smooth, then standardize if ``fit_range`` is given.

    Returns the cleaned frame, or ``(frame, params)`` when standardizing.
    """
    config = config or PreprocessConfig()
    out = interpolate_missing(frame, config.max_gap)
    out = remove_outliers(out, config.outlier_window, config.n_sigmas)
    out = smooth(out, config.smooth_window)
    if fit_range is None:
        return out
    return standardize(out, fit_range)


# ---------------------------------------------------------------- estimators


class _ColumnwiseTransformer(OneToOneFeatureMixin, TransformerMixin, BaseEstimator):
    _allow_nan = False

    def fit(self, X, y=None):
        X = check_array(X, ensure_all_finite="allow-nan" if self._allow_nan else True)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, ensure_all_finite="allow-nan" if self._allow_nan else True)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return np.column_stack([self._column(X[:, j]) for j in range(X.shape[1])])


class GapInterpolator(_ColumnwiseTransformer):
    """Fill NaN gaps column-wise (see :func:`fill_gaps`)."""

    _allow_nan = True

    def __init__(self, max_gap=10):
        self.max_gap = max_gap

    def _column(self, x):
        return fill_gaps(x, self.max_gap)


class HampelFilter(_ColumnwiseTransformer):
    """Replace rolling-median outliers column-wise (see :func:`hampel`)."""

    def __init__(self, window=11, n_sigmas=3.0):
        self.window = window
        self.n_sigmas = n_sigmas

    def _column(self, x):
        return hampel(x, self.window, self.n_sigmas)[0]


class MovingAverage(_ColumnwiseTransformer):
    def __init__(self, window=5):
        self.window = window

    def _column(self, x):
        return moving_average(x, self.window)


class ZScoreScaler(OneToOneFeatureMixin, TransformerMixin, BaseEstimator):
    """Population z-score scaler that refuses constant columns.

    Unlike :class:`sklearn.preprocessing.StandardScaler` a zero-variance
    column is an error rather than silently left unscaled.
    """

    def fit(self, X, y=None):
        X = check_array(X)
        mean = X.mean(axis=0)
        scale = np.sqrt(((X - mean) ** 2).mean(axis=0))
        bad = np.flatnonzero(~(scale > 1e-12 * np.maximum(1.0, np.abs(mean))))
        if bad.size:
            raise DegenerateVariance(f"constant column(s) {bad.tolist()}")
        self.mean_ = mean
        self.scale_ = scale
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        return (check_array(X) - self.mean_) / self.scale_

    def inverse_transform(self, X):
        check_is_fitted(self, "mean_")
        return check_array(X) * self.scale_ + self.mean_
