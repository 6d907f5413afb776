import statistics

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from drumcast.exceptions import ConfigError, DegenerateVariance, EmptySplit, GapTooLong, WindowTooLarge
from drumcast.frame import SeriesFrame
from drumcast.preprocessing import (
    GapInterpolator,
    HampelFilter,
    MovingAverage,
    PreprocessConfig,
    SplitSpec,
    ZScoreScaler,
    fill_gaps,
    hampel,
    interpolate_missing,
    inverse_standardize,
    moving_average,
    preprocess,
    remove_outliers,
    smooth,
    split,
    split_lengths,
    standardize,
)

nan = np.nan


def hampel_oracle(x, window, n_sigmas):
    """Per-index loop over explicitly built (truncated) windows."""
    x = [float(v) for v in x]
    half = window // 2
    flags = []
    for i in range(len(x)):
        w = x[max(0, i - half) : min(len(x), i + half + 1)]
        med = statistics.median(w)
        mad = statistics.median([abs(v - med) for v in w])
        flags.append(abs(x[i] - med) > n_sigmas * 1.4826 * mad)
    return np.array(flags)


# ---------------------------------------------------------------- gaps


def test_midpoint_gap():
    np.testing.assert_array_equal(fill_gaps([1, nan, 3], max_gap=1), [1, 2, 3])


def test_leading_gap_holds_edge():
    np.testing.assert_array_equal(fill_gaps([nan, 5, 6]), [5, 5, 6])


def test_trailing_gap_holds_edge():
    np.testing.assert_array_equal(fill_gaps([4, 5, nan, nan]), [4, 5, 5, 5])


def test_gap_too_long():
    with pytest.raises(GapTooLong):
        fill_gaps([1, nan, nan, nan, 9], max_gap=2)


def test_gap_at_limit_is_filled():
    np.testing.assert_allclose(fill_gaps([1, nan, nan, 4], max_gap=2), [1, 2, 3, 4])


def test_interpolate_frame_is_pure():
    frame = SeriesFrame.from_arrays({"a": [1.0, nan, 3.0], "b": [1.0, 2.0, 3.0]})
    out = interpolate_missing(frame, 1)
    assert np.isnan(frame["a"][1])
    assert out["a"][1] == 2.0
    assert not out.has_gaps()


# ---------------------------------------------------------------- Hampel


def test_single_spike():
    cleaned, flagged = hampel([1, 1, 1, 100, 1, 1, 1], window=7, n_sigmas=3)
    np.testing.assert_array_equal(cleaned, [1] * 7)
    assert flagged.tolist() == [False, False, False, True, False, False, False]


@pytest.mark.parametrize("window", [3, 5, 11, 21])
def test_ramp_untouched(window):
    ramp = np.linspace(-3.0, 7.0, 60)
    cleaned, flagged = hampel(ramp, window, 3.0)
    assert not flagged.any()
    np.testing.assert_array_equal(cleaned, ramp)


def test_injected_spikes_match_oracle(rng):
    x = rng.standard_normal(400)
    spikes = np.sort(rng.choice(np.arange(10, 390), 5, replace=False))
    x[spikes] += 10.0 * np.where(rng.random(5) < 0.5, -1, 1)
    cleaned, flagged = hampel(x, 11, 3.0)
    assert set(spikes.tolist()) <= set(np.flatnonzero(flagged).tolist())
    oracle = hampel_oracle(x, 11, 3.0)
    np.testing.assert_array_equal(flagged, oracle)
    np.testing.assert_array_equal(cleaned[~flagged], x[~flagged])


def test_exactly_the_spikes_replaced():
    # deterministic background with no natural outliers
    t = np.arange(300)
    x = np.sin(t / 15.0)
    spikes = [40, 90, 150, 210, 260]
    x[spikes] += 10.0
    _, flagged = hampel(x, 11, 3.0)
    assert np.flatnonzero(flagged).tolist() == spikes


@given(arrays(np.float64, st.integers(3, 40), elements=st.floats(-100, 100)), st.sampled_from([3, 5, 7]))
def test_hampel_agrees_with_oracle(x, window):
    if window > x.size:
        return
    _, flagged = hampel(x, window, 3.0)
    np.testing.assert_array_equal(flagged, hampel_oracle(x, window, 3.0))


def test_hampel_window_checks():
    with pytest.raises(WindowTooLarge):
        hampel(np.arange(5.0), window=7)
    with pytest.raises(ConfigError):
        hampel(np.arange(20.0), window=4)
    with pytest.raises(ConfigError):
        hampel(np.arange(20.0), window=5, n_sigmas=0)


def test_remove_outliers_frame():
    frame = SeriesFrame.from_arrays({"a": [1.0, 1, 1, 100, 1, 1, 1]})
    assert remove_outliers(frame, 7, 3)["a"].tolist() == [1.0] * 7
    assert frame["a"][3] == 100.0


# ---------------------------------------------------------------- smoothing


def test_smooth_identity(rng):
    x = rng.standard_normal(30)
    np.testing.assert_array_equal(moving_average(x, 1), x)


def test_smooth_edges():
    np.testing.assert_allclose(moving_average([0, 3, 0], 3), [1.5, 1.0, 1.5], rtol=0, atol=1e-15)


def test_smooth_constant():
    np.testing.assert_allclose(moving_average(np.full(20, 4.2), 5), np.full(20, 4.2), rtol=1e-15)


def test_smooth_matches_loop(rng):
    x = rng.standard_normal(25)
    w, half = 7, 3
    expected = [np.mean(x[max(0, i - half) : i + half + 1]) for i in range(25)]
    np.testing.assert_allclose(moving_average(x, w), expected, rtol=1e-13)


def test_smooth_rejects_even_window():
    with pytest.raises(ConfigError):
        moving_average([1.0, 2.0], 2)


def test_smooth_frame():
    frame = SeriesFrame.from_arrays({"a": [0.0, 3.0, 0.0]})
    assert smooth(frame, 3)["a"].tolist() == [1.5, 1.0, 1.5]


# ---------------------------------------------------------------- standardize


def test_standardize_hand_values():
    frame = SeriesFrame.from_arrays({"a": [1.0, 2.0, 3.0]})
    out, params = standardize(frame)
    assert params.means["a"] == 2.0
    np.testing.assert_allclose(params.scales["a"], np.sqrt(2.0 / 3.0), rtol=1e-15)
    np.testing.assert_allclose(out["a"], [-1.224744871391589, 0.0, 1.224744871391589], rtol=1e-12)


def test_standardize_white_noise_is_near_identity(rng):
    x = rng.standard_normal(200_000)
    out, params = standardize(SeriesFrame.from_arrays({"x": x}))
    assert abs(params.means["x"]) < 0.01
    assert abs(params.scales["x"] - 1.0) < 0.01
    assert np.max(np.abs(out["x"] - x)) < 0.05


def test_standardize_constant():
    with pytest.raises(DegenerateVariance):
        standardize(SeriesFrame.from_arrays({"a": [2.0, 2.0, 2.0]}))


def test_standardize_uses_fit_range_only():
    frame = SeriesFrame.from_arrays({"a": [0.0, 2.0, 100.0, -50.0]})
    _, params = standardize(frame, fit_range=(0, 2))
    assert params.means["a"] == 1.0
    assert params.scales["a"] == 1.0


@given(arrays(np.float64, st.integers(2, 50), elements=st.floats(-1e6, 1e6)))
def test_standardize_round_trip(x):
    if np.ptp(x) <= 1e-6 * max(1.0, np.abs(x).max()):
        return
    frame = SeriesFrame.from_arrays({"x": x})
    out, params = standardize(frame)
    back = inverse_standardize(out, params)["x"]
    scale = max(1.0, np.abs(x).max())
    assert np.max(np.abs(back - x)) <= 1e-12 * scale


def test_standardization_params_serialize():
    _, params = standardize(SeriesFrame.from_arrays({"a": [1.0, 2.0, 4.0], "b": [0.0, 1.0, 0.0]}))
    from drumcast.preprocessing import StandardizationParams

    assert StandardizationParams.from_dict(params.to_dict()) == params


# ---------------------------------------------------------------- split


def test_split_100():
    assert split_lengths(100, SplitSpec(0.8, 0.1, 0.1)) == (80, 10, 10)


def test_split_too_short():
    frame = SeriesFrame.from_arrays({"a": np.arange(10.0)})
    with pytest.raises(EmptySplit):
        split(frame, SplitSpec(0.8, 0.1, 0.1), min_length=5)


def test_split_plant_length():
    assert split_lengths(1_048_574, SplitSpec(0.7, 0.15, 0.15)) == (734002, 157286, 157286)


@given(st.integers(3, 5000), st.floats(0.05, 0.9), st.floats(0.05, 0.5))
def test_split_concat_reproduces(n, a, b):
    if a + b >= 0.97:
        return
    spec = SplitSpec(a, b, 1 - a - b)
    lengths = split_lengths(n, spec)
    assert sum(lengths) == n
    if min(lengths) < 1:
        return
    frame = SeriesFrame.from_arrays({"x": np.arange(float(n))})
    parts = split(frame, spec)
    assert SeriesFrame.concat(parts).equals(frame)


def test_split_spec_validation():
    with pytest.raises(ConfigError):
        SplitSpec(0.5, 0.5, 0.5)
    with pytest.raises(ConfigError):
        SplitSpec(1.0, 0.0, 0.0)
    assert SplitSpec.parse("0.8,0.1,0.1") == SplitSpec(0.8, 0.1, 0.1)


# ---------------------------------------------------------------- pipeline order


def test_preprocess_idempotent_on_clean_data():
    t = np.arange(500.0)
    x = 0.01 * t + np.cos(t / 35.0)
    frame = SeriesFrame.from_arrays({"x": x, "y": np.sin(np.arange(500) / 20.0)})
    cfg = PreprocessConfig(max_gap=10, outlier_window=11, n_sigmas=3.0, smooth_window=1)
    once = preprocess(frame, cfg)
    twice = preprocess(once, cfg)
    for n in frame.names:
        np.testing.assert_allclose(twice[n], once[n], rtol=0, atol=1e-12)


def test_preprocess_and_standardize(rng):
    x = rng.standard_normal(300)
    x[[50, 51]] = nan
    frame = SeriesFrame.from_arrays({"x": x})
    out, params = preprocess(frame, PreprocessConfig(), fit_range=(0, 200))
    assert not out.has_gaps()
    assert np.isfinite(out["x"]).all()
    assert abs(np.mean(out["x"][:200])) < 1e-12


def test_preprocess_does_not_mutate(rng):
    x = rng.standard_normal(100)
    x[3] = nan
    frame = SeriesFrame.from_arrays({"x": x})
    before = frame["x"].copy()
    preprocess(frame)
    np.testing.assert_array_equal(frame["x"], before)


# ---------------------------------------------------------------- estimators


def test_sklearn_transformers(rng):
    from sklearn.base import clone
    from sklearn.pipeline import make_pipeline

    X = rng.standard_normal((200, 3))
    X[10, 1] = nan
    pipe = make_pipeline(GapInterpolator(5), HampelFilter(11, 3.0), MovingAverage(3), ZScoreScaler())
    Z = pipe.fit_transform(X)
    assert Z.shape == X.shape
    np.testing.assert_allclose(Z.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(Z.std(axis=0), 1.0, rtol=1e-12)
    assert clone(pipe).get_params()["hampelfilter__window"] == 11
    scaler = pipe[-1]
    np.testing.assert_allclose(scaler.inverse_transform(Z), pipe[:-1].transform(X), rtol=1e-12)


def test_zscore_rejects_constant():
    with pytest.raises(DegenerateVariance):
        ZScoreScaler().fit(np.ones((5, 2)))
