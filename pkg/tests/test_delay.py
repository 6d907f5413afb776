import json

import numpy as np
import pytest

from drumcast.delay import (
    AugmentSpec,
    DelayAugmenter,
    DelayTable,
    augment_with_lags,
    build_delay_table,
    cross_cov_at_lag,
    infer_delay,
    lag_column,
    lag_profile,
)
from drumcast.exceptions import ConfigError, DegenerateWindow, LagExceedsLength, SeriesTooShort
from drumcast.frame import SeriesFrame
from drumcast.synthetic import generate, preset


def brute_profile(x, y, max_lag):
    out = []
    for k in range(max_lag + 1):
        a, b = x[: len(x) - k], y[k:]
        if np.std(a) == 0 or np.std(b) == 0:
            out.append(0.0)
        else:
            out.append(np.corrcoef(a, b)[0, 1])
    return np.array(out)


def test_profile_matches_brute_force(rng):
    x = rng.standard_normal(500)
    y = np.roll(x, 13) + 0.5 * rng.standard_normal(500)
    np.testing.assert_allclose(lag_profile(x, y, 40), brute_profile(x, y, 40), atol=1e-10)


def test_pointwise_matches_corrcoef(rng):
    x, y = rng.standard_normal(300), rng.standard_normal(300)
    assert cross_cov_at_lag(x, y, 7) == pytest.approx(np.corrcoef(x[:293], y[7:])[0, 1], abs=1e-12)


def test_shifted_copy_lag_37(rng):
    x = rng.standard_normal(4000)
    y = np.zeros_like(x)
    y[37:] = x[:-37]
    entry = infer_delay(x, y, max_lag=100)
    assert entry.optimal_lag == 37
    assert entry.peak_value == pytest.approx(1.0, abs=1e-12)
    assert entry.sign == 1


def test_negative_coupling(rng):
    x = rng.standard_normal(3000)
    y = -np.roll(x, 12)
    assert infer_delay(x, y, 50).optimal_lag != 12
    entry = infer_delay(x, y, 50, allow_negative=True)
    assert (entry.optimal_lag, entry.sign) == (12, -1)


def test_step_parents_recovered():
    frame, truth = generate(preset("delay-benchmark", seed=4))
    for name, delay in truth.delays.items():
        assert infer_delay(frame[name], frame[truth.target], 600).optimal_lag == delay


def test_degenerate_and_short():
    with pytest.raises(DegenerateWindow):
        cross_cov_at_lag(np.ones(10), np.arange(10.0), 2)
    with pytest.raises(SeriesTooShort):
        infer_delay(np.arange(10.0), np.arange(10.0), 5)
    with pytest.raises(ConfigError):
        infer_delay(np.arange(10.0), np.arange(10.0), 0)


def test_constant_window_profile_is_zero():
    x = np.r_[np.ones(50), np.arange(50.0)]
    y = np.arange(100.0)
    prof = lag_profile(x, y, 60)
    assert prof[55] == 0.0


def test_table_round_trip_and_failures(rng):
    frame = SeriesFrame.from_arrays({"y": rng.standard_normal(200), "a": rng.standard_normal(200), "c": np.ones(200)})
    table = build_delay_table(frame, "y", ["a", "c"], max_lag=20)
    assert "c" in table.failures and "a" in table.entries
    back = DelayTable.from_json(table.to_json())
    assert back.lags == table.lags
    assert json.loads(back.to_json()) == json.loads(table.to_json())
    assert table.profiles_csv().splitlines()[0].startswith("lag")


def test_augment_indices():
    frame = SeriesFrame.from_arrays({"y": np.arange(10.0) * 10, "a": np.arange(10.0)}, start=100)
    out = augment_with_lags(frame, spec=AugmentSpec(lags={"a": [3, 1]}))
    assert out.names == ("y", "a", lag_column("a", 1), lag_column("a", 3))
    assert len(out) == 7
    assert out.timestamps[0] == 103
    for t in range(len(out)):
        assert out["a__lag3"][t] == out["a"][t] - 3
        assert out["a__lag1"][t] == out["a"][t] - 1


def test_augment_from_table_drop_original(rng):
    x = rng.standard_normal(600)
    frame = SeriesFrame.from_arrays({"y": np.roll(x, 5), "x": x, "z": rng.standard_normal(600)})
    table = build_delay_table(frame, "y", ["x"], max_lag=20)
    out = augment_with_lags(frame, table, AugmentSpec(keep_original=False))
    assert out.names == ("y", "z", "x__lag5")
    np.testing.assert_array_equal(out["x__lag5"], out["y"])


def test_augment_errors():
    frame = SeriesFrame.from_arrays({"a": np.arange(5.0)})
    with pytest.raises(LagExceedsLength):
        augment_with_lags(frame, spec=AugmentSpec(lags={"a": [5]}))
    with pytest.raises(ConfigError):
        augment_with_lags(frame)


def test_augmenter_estimator():
    frame, truth = generate(preset("fig5", seed=1, n_samples=5000))
    aug = DelayAugmenter(target=truth.target, max_lag=300).fit(frame)
    assert aug.table_.lags["feedwater_flow"] == 212
    out = aug.transform(frame)
    assert "feedwater_flow__lag212" in out.names
    assert len(out) == len(frame) - max(aug.table_.lags.values())
