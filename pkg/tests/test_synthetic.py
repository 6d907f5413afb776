import json

import numpy as np
import pytest

from drumcast.causal import screen_all
from drumcast.exceptions import InvalidSpec, UnstableSystem
from drumcast.synthetic import (
    GeneratorSpec,
    GroundTruth,
    ParentSpec,
    VarEdge,
    generate,
    generate_var_system,
    preset,
    var_benchmark,
)


def test_same_seed_bit_identical():
    a, _ = generate(preset("fig5", seed=7, n_samples=3000))
    b, _ = generate(preset("fig5", seed=7, n_samples=3000))
    assert a.equals(b)
    for n in a.names:
        assert a[n].tobytes() == b[n].tobytes()
    c, _ = generate(preset("fig5", seed=8, n_samples=3000))
    assert not a.equals(c)


def test_zero_everything_is_zero_target():
    frame, truth = generate(GeneratorSpec(n_samples=100, target_noise_sigma=0.0))
    assert frame.names == ("drum_level",)
    assert not frame["drum_level"].any()
    assert truth.parents == []


def test_structure_without_noise():
    spec = GeneratorSpec(
        n_samples=2000, seed=3, parents=(ParentSpec("a", 4, 2.0), ParentSpec("b", 9, -1.0, "sinusoid")),
        target_noise_sigma=0.0, ar_coef=0.3,
    )
    frame, truth = generate(spec)
    y, a, b = frame["drum_level"], frame["a"], frame["b"]
    t = np.arange(20, 2000)
    resid = y[t] - (0.3 * y[t - 1] + 2.0 * a[t - 4] - 1.0 * b[t - 9])
    assert np.max(np.abs(resid)) < 1e-10
    assert truth.delays == {"a": 4, "b": 9}


def test_relative_noise_level():
    spec = GeneratorSpec(n_samples=50000, seed=1, parents=(ParentSpec("a", 3),), target_noise_sigma=0.2)
    frame, _ = generate(spec)
    resid = frame["drum_level"][3:] - frame["a"][:-3]
    assert np.std(resid) / np.std(frame["a"]) == pytest.approx(0.2, rel=0.05)


def test_delays_recovered():
    from drumcast.delay import infer_delay

    frame, truth = generate(preset("delay-benchmark", seed=2))
    found = {p: infer_delay(frame[p], frame[truth.target], 600).optimal_lag for p in truth.delays}
    assert found == {"factor_a": 5, "factor_b": 50, "factor_c": 212}


def test_stationary_halves():
    frame, truth = generate(preset("fig5", seed=0, n_samples=100_000))
    y = frame[truth.target]
    h1, h2 = y[:50_000], y[50_000:]
    s = np.std(y)
    assert abs(h1.mean() - h2.mean()) <= 0.1 * s
    assert np.std(h1) == pytest.approx(np.std(h2), rel=0.1)


def test_spec_validation():
    with pytest.raises(InvalidSpec):
        GeneratorSpec(parents=(ParentSpec("a", 0),))
    with pytest.raises(InvalidSpec):
        GeneratorSpec(ar_coef=1.0)
    with pytest.raises(InvalidSpec):
        GeneratorSpec(n_samples=100, parents=(ParentSpec("a", 60),))
    with pytest.raises(InvalidSpec):
        GeneratorSpec(parents=(ParentSpec("a", 3, kind="chirp"),))
    with pytest.raises(InvalidSpec):
        preset("nope")


def test_ground_truth_json(tmp_path):
    _, truth = generate(preset("fig5", seed=0, n_samples=1000))
    path = tmp_path / "truth.json"
    truth.to_json(path)
    back = GroundTruth.from_json(path)
    assert back == truth
    assert set(json.loads(path.read_text())) == {"target", "parents", "distractors"}


def test_var_diagonal_retains_nothing():
    names = ["y", "a", "b", "c"]
    edges = [VarEdge(n, n, 1, 0.5) for n in names]
    frame, _ = generate_var_system(names, edges, 5000, seed=1)
    assert screen_all(frame, "y").retained == []


def test_var_recurrence():
    frame, _ = generate_var_system(["y", "x"], [("y", "x", 2, 0.5), ("x", "x", 1, 0.3)], 500, seed=0, noise_sigma=0.0)
    assert not frame["y"].any()


def test_var_unstable():
    with pytest.raises(UnstableSystem):
        generate_var_system(["a"], [VarEdge("a", "a", 1, 0.9999)], 100)
    with pytest.raises(InvalidSpec):
        generate_var_system(["a"], [VarEdge("a", "b", 1, 0.1)], 100)


def test_var_benchmark_shape():
    frame, parents = var_benchmark(seed=0, n_samples=1000)
    assert len(frame.names) == 11
    assert parents == ["p1", "p2", "p3"]
    assert len(frame) == 1000
