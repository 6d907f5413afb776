"""End-to-end pipeline: preprocess, screen, delay, augment, train, evaluate.

Every stage is a function that reads its inputs from files and writes its
outputs to files. :func:`run_pipeline` chains them through the output
directory, and the CLI subcommands call the very same functions, so running
stages one by one reproduces a full run byte for byte.
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import jsonschema

from . import __version__
from .causal import CausalReport, screen_all
from .delay import AugmentSpec, DelayTable, augment_with_lags, build_delay_table
from .evaluation import DEFAULT_HORIZONS, EvalReport, compare, error_distribution, evaluate_horizons
from .exceptions import ConfigError, DataError, DrumcastError, StageError, UnknownConfigVariable
from .frame import SeriesFrame, load_csv, write_csv
from .models.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .models.config import ModelConfig, TrainConfig
from .models.training import ForecastResult, predict_horizon, train
from .plotting import plot_error_histogram, plot_overlay
from .preprocessing import PreprocessConfig, SplitSpec, preprocess, split, split_lengths, standardize

__all__ = [
    "CONFIG_SCHEMA",
    "STAGES",
    "derive_seed",
    "load_config",
    "validate_config",
    "PipelineConfig",
    "stage_preprocess",
    "stage_screen",
    "stage_delay",
    "stage_augment",
    "stage_train",
    "stage_predict",
    "stage_evaluate",
    "stage_report",
    "run_pipeline",
    "sha256_file",
]

log = logging.getLogger(__name__)

STAGES = ("preprocess", "screen", "delay", "augment", "train", "evaluate")

_MODEL_KEYS = ("window_len", "d_model", "n_heads", "d_ff", "n_layers", "horizon", "dropout")

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["input", "target"],
    "additionalProperties": False,
    "properties": {
        "input": {"type": "string", "minLength": 1},
        "target": {"type": "string", "minLength": 1},
        "candidates": {
            "oneOf": [{"const": "all"}, {"type": "array", "items": {"type": "string"}, "uniqueItems": True}]
        },
        "output_dir": {"type": "string", "minLength": 1},
        "seed": {"type": "integer"},
        "split": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "train": {"type": "number", "exclusiveMinimum": 0},
                "validation": {"type": "number", "exclusiveMinimum": 0},
                "test": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "preprocess": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "max_gap": {"type": "integer", "minimum": 0},
                "outlier_window": {"type": "integer", "minimum": 1},
                "n_sigmas": {"type": "number", "exclusiveMinimum": 0},
                "smooth_window": {"type": "integer", "minimum": 1},
            },
        },
        "screen": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "enabled": {"type": "boolean"},
                "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "history_len": {"type": "integer", "minimum": 1},
                "predictor_kind": {"enum": ["linear-AR", "lstm", "transformer"]},
                "conditioning": {"enum": ["mutual", "fixed"]},
                "conditioning_vars": {"type": "array", "items": {"type": "string"}},
                "n_jobs": {"type": "integer", "minimum": 1},
            },
        },
        "delay": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "max_lag": {"type": "integer", "minimum": 1},
                "allow_negative": {"type": "boolean"},
            },
        },
        "augment": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "enabled": {"type": "boolean"},
                "keep_original": {"type": "boolean"},
            },
        },
        "models": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["kind"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string", "pattern": "^[A-Za-z0-9_.+-]+$"},
                    "kind": {"enum": ["transformer", "lstm"]},
                    "window_len": {"type": "integer", "minimum": 1},
                    "d_model": {"type": "integer", "minimum": 1},
                    "n_heads": {"type": "integer", "minimum": 1},
                    "d_ff": {"type": "integer", "minimum": 1},
                    "n_layers": {"type": "integer", "minimum": 1},
                    "horizon": {"type": "integer", "minimum": 1},
                    "dropout": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                },
            },
        },
        "train": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "learning_rate": {"type": "number", "exclusiveMinimum": 0},
                "batch_size": {"type": "integer", "minimum": 1},
                "max_steps": {"type": "integer", "minimum": 1},
                "beta1": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "beta2": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "eps": {"type": "number", "exclusiveMinimum": 0},
                "patience": {"type": "integer", "minimum": 0},
                "eval_every": {"type": "integer", "minimum": 1},
                "clip_norm": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "max_eval_windows": {"type": "integer", "minimum": 1},
            },
        },
        "horizons": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
    },
}

_DEFAULTS = {
    "candidates": "all",
    "output_dir": "drumcast_out",
    "seed": 0,
    "split": {"train": 0.7, "validation": 0.15, "test": 0.15},
    "preprocess": {"max_gap": 10, "outlier_window": 11, "n_sigmas": 3.0, "smooth_window": 5},
    "screen": {
        "enabled": True,
        "alpha": 0.05,
        "history_len": 10,
        "predictor_kind": "linear-AR",
        "conditioning": "mutual",
        "conditioning_vars": [],
        "n_jobs": 1,
    },
    "delay": {"max_lag": 600, "allow_negative": False},
    "augment": {"enabled": True, "keep_original": True},
    "models": [{"kind": "transformer", "horizon": 60}],
    "train": {},
    "horizons": list(DEFAULT_HORIZONS),
}


def derive_seed(seed: int, stage: str, item: str = "") -> int:
    """Seed for one ``(stage, item)`` pair, derived from the run seed by name."""
    digest = hashlib.sha256(f"{int(seed)}/{stage}/{item}".encode()).digest()
    return int.from_bytes(digest[:4], "big") & 0x7FFFFFFF


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _merge(defaults, given):
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = {**out[k], **v}
        else:
            out[k] = copy.deepcopy(v)
    return out


def _read_header(path: Path):
    try:
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip()
            n_rows = sum(1 for line in fh if line.strip())
    except OSError as exc:
        raise ConfigError(f"cannot read input '{path}': {exc}") from exc
    names = [c.strip() for c in header.split(",")] if header else []
    if not names or names[0] != "timestamp":
        raise ConfigError(f"input '{path}' must start with a 'timestamp' column")
    return names[1:], n_rows


@dataclass(frozen=True)
class PipelineConfig:
    """A validated pipeline configuration with defaults filled in."""

    data: dict
    base_dir: Path

    @property
    def input_path(self) -> Path:
        p = Path(self.data["input"])
        return p if p.is_absolute() else self.base_dir / p

    @property
    def output_dir(self) -> Path:
        p = Path(self.data["output_dir"])
        return p if p.is_absolute() else self.base_dir / p

    @property
    def target(self) -> str:
        return self.data["target"]

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def split_spec(self) -> SplitSpec:
        s = self.data["split"]
        return SplitSpec(s["train"], s["validation"], s["test"])

    @property
    def preprocess_config(self) -> PreprocessConfig:
        return PreprocessConfig(**self.data["preprocess"])

    @property
    def train_config(self) -> TrainConfig:
        return TrainConfig(**self.data["train"])

    @property
    def horizons(self):
        return list(self.data["horizons"])

    @property
    def models(self):
        """``(name, kind, model-shape dict)`` for every configured model."""
        out = []
        for m in self.data["models"]:
            name = m.get("name", m["kind"])
            shape = {k: m[k] for k in _MODEL_KEYS if k in m}
            out.append((name, m["kind"], shape))
        return out

    def fingerprint(self) -> str:
        """Hash of the settings that affect results.

        The input path and output directory are left out: the input is
        covered by its content hash and the output location does not change
        any artifact.
        """
        d = {k: v for k, v in self.data.items() if k not in ("input", "output_dir")}
        return hashlib.sha256(_canonical(d).encode()).hexdigest()


def validate_config(data: dict, base_dir=".") -> PipelineConfig:
    """Schema and semantic checks; touches only the input's header."""
    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None
    cfg = PipelineConfig(_merge(_DEFAULTS, data), Path(base_dir))
    d = cfg.data

    split_spec = cfg.split_spec
    # dataclass validation of each block
    cfg.preprocess_config
    cfg.train_config
    names, n_rows = _read_header(cfg.input_path)
    if cfg.target not in names:
        raise UnknownConfigVariable(f"target '{cfg.target}' is not a column of {cfg.input_path}")
    if d["candidates"] != "all":
        missing = [c for c in d["candidates"] if c not in names]
        if missing:
            raise UnknownConfigVariable(f"candidates not in input: {missing}")
        if cfg.target in d["candidates"]:
            raise ConfigError("the target cannot also be a candidate")
    missing = [c for c in d["screen"]["conditioning_vars"] if c not in names]
    if missing:
        raise UnknownConfigVariable(f"conditioning variables not in input: {missing}")

    seen = set()
    windows = {ModelConfig(**shape).window_len for _, _, shape in cfg.models}
    if len(windows) > 1:
        raise ConfigError(f"all models must share one window_len so forecasts align; got {sorted(windows)}")
    for name, kind, shape in cfg.models:
        if name in seen or name == "persistence":
            raise ConfigError(f"model name '{name}' is duplicated or reserved")
        seen.add(name)
        mc = ModelConfig(**shape)
        if max(cfg.horizons) > mc.horizon:
            raise ConfigError(
                f"model '{name}' predicts {mc.horizon} steps but horizons go up to {max(cfg.horizons)}"
            )
    # augmentation can drop up to max_lag leading rows
    n_aug = n_rows - (d["delay"]["max_lag"] if d["augment"]["enabled"] else 0)
    n_test = split_lengths(max(n_aug, 0), split_spec)[2]
    need = max(ModelConfig(**s).window_len + ModelConfig(**s).horizon for _, _, s in cfg.models)
    if n_test < need:
        raise ConfigError(f"test split of at most {n_test} rows is shorter than window + horizon ({need})")
    return cfg


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config '{path}': {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return validate_config(data, path.parent)


# ---------------------------------------------------------------- stages


def stage_preprocess(input_path, output_path, config: PreprocessConfig | None = None) -> SeriesFrame:
    """Raw CSV to cleaned CSV: fill short gaps, Hampel filter, smooth."""
    frame = load_csv(input_path)
    clean = preprocess(frame, config or PreprocessConfig())
    write_csv(clean, output_path)
    return clean


def _train_rows(frame: SeriesFrame, spec: SplitSpec) -> SeriesFrame:
    return split(frame, spec)[0]


def stage_screen(
    clean_path,
    output_path,
    target: str,
    candidates="all",
    split_spec: SplitSpec | None = None,
    seed: int = 0,
    alpha: float = 0.05,
    history_len: int = 10,
    predictor_kind: str = "linear-AR",
    conditioning: str = "mutual",
    conditioning_vars: Sequence[str] = (),
    n_jobs: int = 1,
    enabled: bool = True,
) -> CausalReport:
    """Granger screening on the training rows of the cleaned frame.

    With ``enabled=False`` every candidate is passed through as retained
    with a p-value of 0, so later stages see the same file layout.
    """
    frame = load_csv(clean_path)
    if candidates == "all" or candidates is None:
        candidates = [n for n in frame.names if n != target]
    frame.require([target, *candidates])
    if not enabled:
        from .causal import CausalEntry

        entries = [CausalEntry(c, 0.0, math.nan, True, 0, math.nan, math.nan, "disabled") for c in candidates]
        report = CausalReport(target, alpha, entries)
    else:
        report = screen_all(
            _train_rows(frame, split_spec or SplitSpec()),
            target,
            candidates,
            conditioning=conditioning,
            conditioning_vars=conditioning_vars,
            history_len=history_len,
            predictor_kind=predictor_kind,
            alpha=alpha,
            seed=derive_seed(seed, "screen"),
            n_jobs=n_jobs,
        )
    report.to_json(output_path)
    return report


def stage_delay(
    clean_path,
    output_path,
    target: str,
    variables=None,
    report_path=None,
    max_lag: int = 600,
    allow_negative: bool = False,
    split_spec: SplitSpec | None = None,
    profiles_path=None,
) -> DelayTable:
    """Delay table for ``variables`` (or the retained set of a causal report)."""
    frame = load_csv(clean_path)
    if variables is None:
        if report_path is not None:
            variables = CausalReport.from_json(report_path, target).retained
        else:
            variables = [n for n in frame.names if n != target]
    frame.require([target, *variables])
    table = build_delay_table(_train_rows(frame, split_spec or SplitSpec()), target, variables, max_lag, allow_negative)
    table.to_json(output_path)
    if profiles_path is not None:
        table.profiles_csv(profiles_path)
    return table


def stage_augment(
    clean_path, delays_path, output_path, target: str, enabled: bool = True, keep_original: bool = True
) -> SeriesFrame:
    """Target plus retained variables, with lagged copies when ``enabled``.

    Variables whose delay could not be inferred stay in unlagged. A lag of
    zero adds no information and is skipped.
    """
    frame = load_csv(clean_path)
    table = DelayTable.from_json(delays_path)
    variables = [v for v in list(table.entries) + list(table.failures) if v != target]
    base = frame.select([target, *variables])
    lags = {v: [k] for v, k in table.lags.items() if k > 0}
    if enabled and lags:
        out = augment_with_lags(base, spec=AugmentSpec(keep_original, lags))
    else:
        out = base
    write_csv(out, output_path)
    return out


def stage_train(
    augmented_path,
    checkpoint_path,
    target: str,
    kind: str = "transformer",
    name: str | None = None,
    model_params: dict | None = None,
    train_config: TrainConfig | None = None,
    split_spec: SplitSpec | None = None,
    seed: int = 0,
    log_path=None,
) -> Checkpoint:
    """Standardize on the training rows, fit, and save the best checkpoint."""
    frame = load_csv(augmented_path)
    frame.require([target])
    spec = split_spec or SplitSpec()
    name = name or kind
    features = list(frame.names)
    model_seed = derive_seed(seed, "train", name)
    config = ModelConfig(n_features=len(features), seed=model_seed, **(model_params or {}))
    tr, va, _ = split(frame, spec, min_length=config.window_len + config.horizon)
    tr_std, std = standardize(tr)
    params, trainlog = train(tr_std, std.transform(va), kind, config, train_config, features, target)
    ckpt = Checkpoint(kind, config, params, features, target, std, train_config or TrainConfig(), model_seed,
                      {"name": name, "best_step": trainlog.best_step, "steps": trainlog.steps})
    save_checkpoint(ckpt, checkpoint_path)
    if log_path is not None:
        Path(log_path).write_text(json.dumps(trainlog.to_dict(), indent=2) + "\n", encoding="utf-8")
    return ckpt


def stage_predict(augmented_path, checkpoint_path, output_path, split_spec: SplitSpec | None = None) -> ForecastResult:
    """Sliding-window forecasts over the test rows, in target units."""
    frame = load_csv(augmented_path)
    ckpt = load_checkpoint(checkpoint_path)
    _, _, te = split(frame, split_spec or SplitSpec())
    name = ckpt.extra.get("name", ckpt.kind)
    result = predict_horizon(ckpt.params, ckpt.config, te, ckpt.standardization, ckpt.kind, ckpt.features, ckpt.target, name)
    result.to_csv(output_path)
    return result


def stage_evaluate(
    forecast_paths: Sequence,
    augmented_path,
    target: str,
    window_len: int,
    horizons=DEFAULT_HORIZONS,
    split_spec: SplitSpec | None = None,
    csv_path=None,
    json_path=None,
    model_names: Sequence[str] | None = None,
) -> EvalReport:
    """Score stored forecasts against the test rows; persistence is added."""
    frame = load_csv(augmented_path)
    _, _, te = split(frame, split_spec or SplitSpec())
    names = list(model_names) if model_names else [Path(p).stem for p in forecast_paths]
    forecasts = [ForecastResult.from_csv(p, n) for p, n in zip(forecast_paths, names)]
    report = evaluate_horizons(forecasts, te[target], window_len, horizons).check()
    if csv_path is not None:
        report.to_csv(csv_path)
    if json_path is not None:
        report.to_json(json_path)
    return report


def stage_report(report_json, forecast_paths: Sequence, output_dir, horizon: int | None = None, model_names=None):
    """Comparison tables, error histograms (CSV and SVG) and overlay plots."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = EvalReport.from_json(Path(report_json).read_text(encoding="utf-8"))
    names = list(model_names) if model_names else [Path(p).stem for p in forecast_paths]
    h = horizon or min(r.horizon for r in report.rows)
    written = []
    comparisons = {}
    for path, name in zip(forecast_paths, names):
        fc = ForecastResult.from_csv(path, name)
        if h > fc.horizon:
            raise ConfigError(f"model '{name}' has no horizon {h}")
        dist = error_distribution(fc.targets[:, h - 1], fc.predictions[:, h - 1])
        for suffix, fn in (
            (f"{name}_h{h}_errors.csv", lambda p: dist.to_csv(p)),
            (f"{name}_h{h}_errors.svg", lambda p: plot_error_histogram(dist, p, f"{name}, horizon {h}")),
            (f"{name}_h{h}_overlay.svg", lambda p: plot_overlay(fc.targets[:, h - 1], fc.predictions[:, h - 1], p, f"{name}, horizon {h}")),
        ):
            fn(out / suffix)
            written.append(out / suffix)
        if "persistence" in report.models and name != "persistence":
            comparisons[name] = {m: compare(report, name, "persistence", m) for m in ("mae", "mse")}
    cmp_path = out / "comparison.json"
    cmp_path.write_text(json.dumps(comparisons, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(cmp_path)
    return written


# ---------------------------------------------------------------- orchestration


class _Manifest:
    def __init__(self, cfg: PipelineConfig, input_sha: str):
        self.path = cfg.output_dir / "manifest.json"
        self.data = {
            "code_version": __version__,
            "seed": cfg.seed,
            "config_sha256": cfg.fingerprint(),
            "input_sha256": input_sha,
            "run_sha256": hashlib.sha256(f"{__version__}|{cfg.fingerprint()}|{input_sha}".encode()).hexdigest(),
            "stages": [],
        }

    def previous(self):
        try:
            old = json.loads(self.path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            return {}
        if old.get("run_sha256") != self.data["run_sha256"]:
            return {}
        return {s["name"]: s for s in old.get("stages", []) if s.get("status") == "completed"}

    def record(self, entry):
        self.data["stages"].append(entry)
        self.write()

    def write(self):
        self.path.write_text(json.dumps(self.data, indent=2) + "\n", encoding="utf-8")


def run_pipeline(config, resume: bool = False) -> dict:
    """Run all six stages; returns the manifest dictionary.

    ``config`` is a :class:`PipelineConfig`, a dict, or a path to a JSON
    file. With ``resume=True`` a stage whose inputs and outputs match the
    existing manifest is skipped. A failing stage is recorded in the
    manifest and re-raised as :class:`StageError` (or the original
    :class:`DataError`), leaving earlier artifacts in place.
    """
    if isinstance(config, PipelineConfig):
        cfg = config
    elif isinstance(config, dict):
        cfg = validate_config(config)
    else:
        cfg = load_config(config)
    d = cfg.data
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "checkpoints").mkdir(exist_ok=True)
    (out / "forecasts").mkdir(exist_ok=True)
    (out / "reports").mkdir(exist_ok=True)

    input_sha = sha256_file(cfg.input_path)
    manifest = _Manifest(cfg, input_sha)
    done = manifest.previous() if resume else {}
    spec = cfg.split_spec
    target = cfg.target
    models = cfg.models
    window = {name: ModelConfig(**shape).window_len for name, _, shape in models}
    sc = d["screen"]
    dl = d["delay"]
    ag = d["augment"]

    P = {
        "clean": out / "clean.csv",
        "causal": out / "causal_report.json",
        "delays": out / "delays.json",
        "profiles": out / "delay_profiles.csv",
        "augmented": out / "augmented.csv",
        "eval_csv": out / "reports" / "eval_report.csv",
        "eval_json": out / "reports" / "eval_report.json",
    }
    ckpts = {name: out / "checkpoints" / f"{name}.json" for name, _, _ in models}
    logs = {name: out / "checkpoints" / f"{name}.log.json" for name, _, _ in models}
    fcs = {name: out / "forecasts" / f"{name}.csv" for name, _, _ in models}

    def run_eval():
        for name, _, _ in models:
            stage_predict(P["augmented"], ckpts[name], fcs[name], spec)
        paths = [fcs[n] for n, _, _ in models]
        stage_evaluate(paths, P["augmented"], target, next(iter(window.values())), cfg.horizons, spec,
                       P["eval_csv"], P["eval_json"], list(fcs))
        return stage_report(P["eval_json"], paths, out / "reports", cfg.horizons[0], list(fcs))

    plan = [
        ("preprocess", [cfg.input_path], lambda: stage_preprocess(cfg.input_path, P["clean"], cfg.preprocess_config),
         [P["clean"]]),
        ("screen", [P["clean"]], lambda: stage_screen(
            P["clean"], P["causal"], target, d["candidates"], spec, cfg.seed, sc["alpha"], sc["history_len"],
            sc["predictor_kind"], sc["conditioning"], sc["conditioning_vars"], sc["n_jobs"], sc["enabled"]),
         [P["causal"]]),
        ("delay", [P["clean"], P["causal"]], lambda: stage_delay(
            P["clean"], P["delays"], target, None, P["causal"], dl["max_lag"], dl["allow_negative"], spec,
            P["profiles"]),
         [P["delays"], P["profiles"]]),
        ("augment", [P["clean"], P["delays"]], lambda: stage_augment(
            P["clean"], P["delays"], P["augmented"], target, ag["enabled"], ag["keep_original"]),
         [P["augmented"]]),
        ("train", [P["augmented"]], lambda: [
            stage_train(P["augmented"], ckpts[name], target, kind, name, shape, cfg.train_config, spec, cfg.seed,
                        logs[name])
            for name, kind, shape in models],
         [*ckpts.values(), *logs.values()]),
        ("evaluate", [P["augmented"], *ckpts.values()], run_eval, None),
    ]

    for name, inputs, action, outputs in plan:
        in_hashes = {_rel(p, out): sha256_file(p) for p in inputs}
        fingerprint = hashlib.sha256(
            f"{manifest.data['run_sha256']}|{name}|{_canonical(in_hashes)}".encode()
        ).hexdigest()
        prev = done.get(name)
        if prev and prev.get("fingerprint") == fingerprint and _outputs_intact(prev, out):
            log.info("stage %s: up to date, skipped", name)
            manifest.record(prev)
            continue
        log.info("stage %s: running", name)
        try:
            produced = action()
        except DrumcastError as exc:
            manifest.record({"name": name, "status": "failed", "error": f"{type(exc).__name__}: {exc}"})
            if isinstance(exc, (DataError, ConfigError)):
                raise type(exc)(f"stage '{name}' failed: {exc}") from exc
            raise StageError(name, f"{type(exc).__name__}: {exc}") from exc
        if outputs is None:
            outputs = [P["eval_csv"], P["eval_json"], *fcs.values(), *produced]
        manifest.record({
            "name": name,
            "status": "completed",
            "fingerprint": fingerprint,
            "outputs": {_rel(p, out): sha256_file(p) for p in outputs},
        })
    return manifest.data


def _rel(path, root) -> str:
    path = Path(path)
    try:
        return path.resolve().relative_to(Path(root).resolve()).as_posix()
    except ValueError:
        return "input"


def _outputs_intact(entry, root) -> bool:
    for rel, digest in entry.get("outputs", {}).items():
        p = Path(root) / rel
        if not p.exists() or sha256_file(p) != digest:
            return False
    return True
