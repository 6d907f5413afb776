import numpy as np
import pytest

from drumcast.causal import (
    CausalEntry,
    CausalReport,
    CausalTestSpec,
    GrangerScreener,
    granger_test,
    lagged_design,
    ols_fit,
    screen_all,
)
from drumcast.exceptions import ConfigError, EmptyCandidates, InsufficientData, UnknownVariable
from drumcast.frame import SeriesFrame
from drumcast.synthetic import var_benchmark


def _driven_pair(n=3000, seed=0, coupling=0.8):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    y = np.zeros(n)
    e = rng.standard_normal(n) * 0.3
    for t in range(1, n):
        y[t] = 0.4 * y[t - 1] + coupling * x[t - 1] + e[t]
    return SeriesFrame.from_arrays({"y": y, "x": x, "z": rng.standard_normal(n)})


def test_lagged_design_layout():
    X = lagged_design([np.arange(6.0)], 2)
    # rows predict t = 2..5 from (t-1, t-2)
    np.testing.assert_array_equal(X, [[1, 1, 0], [1, 2, 1], [1, 3, 2], [1, 4, 3]])


def test_ols_matches_lstsq(rng):
    X = np.column_stack([np.ones(200), rng.standard_normal((200, 4))])
    y = X @ [1.0, 2.0, -1.0, 0.5, 0.0] + 0.01 * rng.standard_normal(200)
    np.testing.assert_allclose(ols_fit(X, y), np.linalg.lstsq(X, y, rcond=None)[0], rtol=1e-10, atol=1e-12)


def test_ols_survives_collinear_columns(rng):
    a = rng.standard_normal(100)
    X = np.column_stack([np.ones(100), a, a])
    beta = ols_fit(X, 3 * a)
    np.testing.assert_allclose(X @ beta, 3 * a, atol=1e-6)


def test_true_cause_retained():
    entry = granger_test(_driven_pair(), CausalTestSpec("y", "x"))
    assert entry.retained
    assert entry.p_value < 1e-6
    assert entry.mae_with < entry.mae_without
    assert entry.n_pairs == 900 - 10


def test_noise_rejected():
    entry = granger_test(_driven_pair(), CausalTestSpec("y", "z", conditioning=("x",)))
    assert not entry.retained


def test_duplicate_candidate_adds_nothing():
    frame = _driven_pair()
    twin = SeriesFrame.from_arrays({"y": frame["y"], "x": frame["x"], "x2": frame["x"].copy()})
    entry = granger_test(twin, CausalTestSpec("y", "x2", conditioning=("x",)))
    assert entry.p_value == 1.0
    assert entry.mae_with == entry.mae_without
    assert not entry.retained


def test_linear_path_is_deterministic():
    frame = _driven_pair()
    assert granger_test(frame, CausalTestSpec("y", "x")) == granger_test(frame, CausalTestSpec("y", "x"))


def test_spec_validation():
    with pytest.raises(ConfigError):
        CausalTestSpec("y", "y")
    with pytest.raises(ConfigError):
        CausalTestSpec("y", "x", conditioning=("x",))
    with pytest.raises(ConfigError):
        CausalTestSpec("y", "x", predictor_kind="forest")
    assert CausalTestSpec("y", "x", predictor_kind="Linear-AR").predictor_kind == "linear-AR"


def test_too_short():
    frame = SeriesFrame.from_arrays({"y": np.arange(30.0), "x": np.sin(np.arange(30.0))})
    with pytest.raises(InsufficientData):
        granger_test(frame, CausalTestSpec("y", "x"))


def test_unknown_candidate():
    with pytest.raises(UnknownVariable):
        granger_test(_driven_pair(), CausalTestSpec("y", "nope"))


def test_screen_collects_failures():
    frame = _driven_pair()
    flat = SeriesFrame.from_arrays({**{n: frame[n] for n in frame.names}})
    report = screen_all(flat, "y", ["x", "missing", "z"], conditioning="fixed")
    assert report["missing"].failed
    assert report.retained == ["x"]
    assert [e.candidate for e in report][-1] == "missing"


def test_empty_candidates():
    with pytest.raises(EmptyCandidates):
        screen_all(_driven_pair(), "y", [])


def test_var_benchmark_recovers_parents():
    frame, parents = var_benchmark(seed=0)
    report = screen_all(frame, "y")
    assert set(parents) <= set(report.retained)
    assert len(set(report.retained) - set(parents)) <= 1


def test_parallel_matches_serial():
    frame, _ = var_benchmark(seed=1, n_samples=4000)
    a = screen_all(frame, "y", n_jobs=1)
    b = screen_all(frame, "y", n_jobs=4)
    assert a.to_json() == b.to_json()


def test_report_json_round_trip():
    frame, _ = var_benchmark(seed=2, n_samples=3000)
    report = screen_all(frame, "y")
    back = CausalReport.from_json(report.to_json())
    assert back.to_json() == report.to_json()
    assert CausalEntry.from_dict(report.entries[0].to_dict()) == report.entries[0]


def test_screener_transformer():
    frame, parents = var_benchmark(seed=3, n_samples=6000)
    sel = GrangerScreener(target="y").fit(frame)
    out = sel.transform(frame)
    assert out.names[0] == "y"
    assert set(parents) <= set(out.names)


def test_model_predictor_path_runs():
    frame = _driven_pair(n=1200)
    entry = granger_test(
        frame,
        CausalTestSpec("y", "x", history_len=5, predictor_kind="lstm"),
        model_params={"d_model": 4},
        train_params={"max_steps": 60, "eval_every": 20, "batch_size": 32, "learning_rate": 1e-2},
    )
    assert np.isfinite(entry.p_value)
    assert entry.n_pairs == len(frame) - int(len(frame) * 0.7) - 5
