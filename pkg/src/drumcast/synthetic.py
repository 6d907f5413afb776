"""Seeded generators with known causal parents and delays.

:func:`generate` builds a boiler-like frame: plateau/step, AR and sinusoidal
factor series drive the target through fixed transport delays.
:func:`generate_var_system` simulates a linear VAR with an explicit lag
structure. Both return their ground truth so tests can assert against it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .exceptions import InvalidSpec, UnstableSystem
from .frame import SeriesFrame

__all__ = [
    "PARENT_KINDS",
    "ParentSpec",
    "GeneratorSpec",
    "GroundTruth",
    "generate",
    "VarEdge",
    "generate_var_system",
    "var_benchmark",
    "PRESETS",
    "preset",
]

PARENT_KINDS = ("step-pattern", "AR-noise", "sinusoid")
# 2017-01-02 11:00:01 UTC, start of the recorded plant data.
EPOCH = 1483354801


def _rng(seed, *path):
    return np.random.default_rng(np.random.SeedSequence([int(seed), *path]))


def step_pattern(rng, n, min_dur=30, max_dur=300):
    """Plateaus of random duration with N(0, 1) levels."""
    durations = []
    total = 0
    while total < n:
        d = int(rng.integers(min_dur, max_dur + 1))
        durations.append(d)
        total += d
    levels = rng.standard_normal(len(durations))
    return np.repeat(levels, durations)[:n]


def ar_noise(rng, n, phi=0.95):
    e = rng.standard_normal(n) * np.sqrt(1.0 - phi**2)
    e[0] = rng.standard_normal()
    return lfilter([1.0], [1.0, -phi], e)


def sinusoid(rng, n, min_period=200, max_period=800):
    period = rng.uniform(min_period, max_period)
    phase = rng.uniform(0, 2 * np.pi)
    t = np.arange(n)
    return np.sqrt(2.0) * np.sin(2 * np.pi * t / period + phase) + 0.1 * rng.standard_normal(n)


_KIND_FUNCS = {"step-pattern": step_pattern, "AR-noise": ar_noise, "sinusoid": sinusoid}


@dataclass(frozen=True)
class ParentSpec:
    name: str
    delay: int
    gain: float = 1.0
    kind: str = "step-pattern"


@dataclass(frozen=True)
class GeneratorSpec:
    """Target ``y_t = ar_coef * y_{t-1} + sum_j gain_j * parent_j(t - delay_j) + noise``.

    With ``noise_relative`` the noise standard deviation is
    ``target_noise_sigma`` times the standard deviation of the parent drive.
    """

    n_samples: int = 20000
    seed: int = 0
    parents: tuple = ()
    distractors: int = 0
    target_noise_sigma: float = 0.1
    ar_coef: float = 0.0
    noise_relative: bool = True
    target: str = "drum_level"
    start: int = EPOCH

    def __post_init__(self):
        parents = tuple(p if isinstance(p, ParentSpec) else ParentSpec(**p) for p in self.parents)
        object.__setattr__(self, "parents", parents)
        names = [p.name for p in parents]
        if len(set(names)) != len(names) or self.target in names:
            raise InvalidSpec("parent names must be unique and differ from the target")
        for p in parents:
            if p.delay < 1:
                raise InvalidSpec(f"parent '{p.name}' delay must be >= 1")
            if p.kind not in PARENT_KINDS:
                raise InvalidSpec(f"parent '{p.name}' kind must be one of {PARENT_KINDS}")
        if not -1 < self.ar_coef < 1:
            raise InvalidSpec("ar_coef must lie in (-1, 1)")
        if self.target_noise_sigma < 0 or self.distractors < 0:
            raise InvalidSpec("noise sigma and distractor count must be >= 0")
        if self.n_samples <= 2 * self.max_delay or self.n_samples < 1:
            raise InvalidSpec("n_samples must exceed twice the largest delay")

    @property
    def max_delay(self) -> int:
        return max((p.delay for p in self.parents), default=0)


@dataclass
class GroundTruth:
    target: str
    parents: list = field(default_factory=list)
    distractors: list = field(default_factory=list)

    @property
    def delays(self) -> dict:
        return {p["name"]: p["delay"] for p in self.parents}

    def to_dict(self):
        return {"target": self.target, "parents": self.parents, "distractors": self.distractors}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_json(cls, path):
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(d["target"], d["parents"], d["distractors"])


def generate(spec: GeneratorSpec):
    """Simulate ``spec``; returns ``(frame, ground_truth)``.

    Every series draws from its own seed stream derived from ``spec.seed``,
    so output is bit-identical for a given spec.
    """
    n = spec.n_samples
    burn = 10 * spec.max_delay
    total = n + burn

    parent_series = {}
    drive = np.zeros(total)
    for k, p in enumerate(spec.parents):
        x = _KIND_FUNCS[p.kind](_rng(spec.seed, 1, k), total)
        parent_series[p.name] = x
        drive[p.delay:] += p.gain * x[: total - p.delay]

    sigma = spec.target_noise_sigma
    if spec.noise_relative and spec.parents:
        sigma *= float(np.std(drive[burn:]))
    noise = sigma * _rng(spec.seed, 2).standard_normal(total) if sigma > 0 else np.zeros(total)
    y = lfilter([1.0], [1.0, -spec.ar_coef], drive + noise)

    columns = {spec.target: y[burn:]}
    for name, x in parent_series.items():
        columns[name] = x[burn:]
    distractors = []
    for k in range(spec.distractors):
        name = f"distractor_{k + 1}"
        columns[name] = ar_noise(_rng(spec.seed, 3, k), total, phi=0.9)[burn:]
        distractors.append(name)

    frame = SeriesFrame.from_arrays(columns, start=spec.start)
    truth = GroundTruth(
        spec.target,
        [{"name": p.name, "delay": p.delay, "gain": p.gain, "kind": p.kind} for p in spec.parents],
        distractors,
    )
    return frame, truth


# ---------------------------------------------------------------- VAR


@dataclass(frozen=True)
class VarEdge:
    """``coef * source_{t-lag}`` enters ``dest_t``; ``source == dest`` is autoregression."""

    dest: str
    source: str
    lag: int
    coef: float


def _companion_radius(mats):
    k = mats[0].shape[0]
    p = len(mats)
    comp = np.zeros((k * p, k * p))
    comp[:k, :] = np.hstack(mats)
    if p > 1:
        comp[k:, :-k] = np.eye(k * (p - 1))
    return float(np.max(np.abs(np.linalg.eigvals(comp))))


def generate_var_system(names, edges, n_samples, seed=0, noise_sigma=1.0, stability_margin=1e-3):
    """Simulate a linear VAR with the lag structure given by ``edges``.

    Raises :class:`UnstableSystem` unless the companion matrix has spectral
    radius below ``1 - stability_margin``. A burn-in of ten times the
    largest lag is simulated and discarded. Returns ``(frame, edges)``.
    """
    names = list(names)
    index = {n: i for i, n in enumerate(names)}
    edges = [e if isinstance(e, VarEdge) else VarEdge(*e) for e in edges]
    for e in edges:
        if e.dest not in index or e.source not in index:
            raise InvalidSpec(f"edge {e} references an unknown variable")
        if e.lag < 1:
            raise InvalidSpec("edge lags must be >= 1")
    if n_samples < 1:
        raise InvalidSpec("n_samples must be positive")
    k = len(names)
    p = max((e.lag for e in edges), default=1)
    mats = [np.zeros((k, k)) for _ in range(p)]
    for e in edges:
        mats[e.lag - 1][index[e.dest], index[e.source]] += e.coef
    radius = _companion_radius(mats)
    if radius >= 1.0 - stability_margin:
        raise UnstableSystem(f"companion spectral radius {radius:.6f} is not below 1")

    burn = 10 * p
    total = n_samples + burn
    eps = noise_sigma * _rng(seed, 4).standard_normal((total, k))
    x = np.zeros((total + p, k))
    lagged = np.hstack(mats).T  # (k*p, k): [x_{t-1}, ..., x_{t-p}] @ lagged
    for t in range(total):
        hist = x[t : t + p][::-1].reshape(-1)
        x[t + p] = hist @ lagged + eps[t]
    data = x[p + burn :]
    frame = SeriesFrame.from_arrays({n: data[:, i] for i, n in enumerate(names)}, start=EPOCH)
    return frame, edges


def var_benchmark(seed=0, n_samples=20000):
    """Target ``y`` with parents ``p1..p3`` and seven non-parents ``d1..d7``.

    ``d1`` is a child of ``p1`` and ``d2`` a child of ``y``; the other
    distractors are independent AR(1) processes.
    """
    names = ["y", "p1", "p2", "p3", "d1", "d2", "d3", "d4", "d5", "d6", "d7"]
    edges = [
        VarEdge("y", "y", 1, 0.5),
        VarEdge("y", "p1", 1, 0.3),
        VarEdge("y", "p2", 2, 0.25),
        VarEdge("y", "p3", 3, -0.3),
        VarEdge("p1", "p1", 1, 0.6),
        VarEdge("p2", "p2", 1, 0.6),
        VarEdge("p3", "p3", 1, 0.6),
        VarEdge("d1", "d1", 1, 0.5),
        VarEdge("d1", "p1", 1, 0.4),
        VarEdge("d2", "d2", 1, 0.5),
        VarEdge("d2", "y", 1, 0.4),
        VarEdge("d3", "d3", 1, 0.3),
        VarEdge("d4", "d4", 1, 0.4),
        VarEdge("d5", "d5", 1, 0.5),
        VarEdge("d6", "d6", 1, 0.6),
        VarEdge("d7", "d7", 1, 0.7),
    ]
    frame, edges = generate_var_system(names, edges, n_samples, seed)
    return frame, ["p1", "p2", "p3"]


# ---------------------------------------------------------------- presets


def _fig5(seed, n_samples=20000):
    return GeneratorSpec(
        n_samples=n_samples,
        seed=seed,
        parents=(
            ParentSpec("feedwater_flow", 212, 1.0, "step-pattern"),
            ParentSpec("main_steam_flow", 50, 0.6, "step-pattern"),
        ),
        distractors=2,
        target_noise_sigma=0.1,
        ar_coef=0.0,
    )


def _delay_benchmark(seed, n_samples=20000, noise=0.1):
    return GeneratorSpec(
        n_samples=n_samples,
        seed=seed,
        parents=(
            ParentSpec("factor_a", 5, 1.0, "step-pattern"),
            ParentSpec("factor_b", 50, 0.8, "step-pattern"),
            ParentSpec("factor_c", 212, 0.6, "step-pattern"),
        ),
        distractors=2,
        target_noise_sigma=noise,
        ar_coef=0.0,
    )


def _delayed_dynamics(seed, n_samples=50000):
    return GeneratorSpec(
        n_samples=n_samples,
        seed=seed,
        parents=(
            ParentSpec("feedwater_flow", 212, 1.0, "step-pattern"),
            ParentSpec("main_steam_flow", 70, 0.8, "step-pattern"),
            ParentSpec("feedwater_temp", 30, 0.5, "AR-noise"),
        ),
        distractors=2,
        target_noise_sigma=0.1,
        ar_coef=0.5,
    )


PRESETS = {
    "fig5": _fig5,
    "delay-benchmark": _delay_benchmark,
    "delayed-dynamics": _delayed_dynamics,
}


def preset(name: str, seed: int = 0, **overrides) -> GeneratorSpec:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise InvalidSpec(f"unknown preset '{name}'; choose from {sorted(PRESETS)}") from None
    return factory(seed, **overrides)
