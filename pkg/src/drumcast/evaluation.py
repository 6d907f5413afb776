"""Forecast metrics, error distributions and comparison tables.

Errors are ``prediction - target`` in physical units throughout.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .exceptions import ConfigError, EmptyInput, LengthMismatch, UnknownModel
from .frame import format_float
from .models.baseline import persistence_windows
from .models.training import ForecastResult

__all__ = [
    "DEFAULT_HORIZONS",
    "MAPE_FLOOR_FRACTION",
    "HIST_BINS",
    "compute_metrics",
    "mape_floor",
    "ErrorDistribution",
    "error_distribution",
    "MetricRow",
    "EvalReport",
    "evaluate_horizons",
    "compare",
    "single_step_table",
]

DEFAULT_HORIZONS = (1, 5, 10, 20, 30, 40, 60)
MAPE_FLOOR_FRACTION = 1e-3
HIST_BINS = 50
METRICS = ("mae", "mse", "mape", "err_mean", "err_sigma")


def _pair(targets, predictions):
    t = np.asarray(targets, dtype=np.float64).ravel()
    p = np.asarray(predictions, dtype=np.float64).ravel()
    if t.size != p.size:
        raise LengthMismatch(f"{t.size} targets vs {p.size} predictions")
    if t.size == 0:
        raise EmptyInput("no forecast pairs to score")
    return t, p


def mape_floor(targets) -> float:
    """Smallest denominator MAPE will divide by: a thousandth of the target's σ."""
    return MAPE_FLOOR_FRACTION * float(np.std(np.asarray(targets, dtype=np.float64)))


def compute_metrics(targets, predictions, floor: float | None = None):
    """``(mae, mse, mape)``; MAPE is in percent.

    Denominators are ``max(|target|, floor)`` with ``floor`` defaulting to
    :func:`mape_floor` of the targets. When every target is zero and the
    series is constant the floor is zero too, and MAPE is reported as 0 for
    exact forecasts and ``inf`` otherwise.
    """
    t, p = _pair(targets, predictions)
    e = p - t
    ae = np.abs(e)
    mae = float(np.mean(ae))
    mse = float(np.mean(e * e))
    floor = mape_floor(t) if floor is None else float(floor)
    denom = np.maximum(np.abs(t), floor)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(ae == 0, 0.0, ae / denom)
    mape = float(np.mean(100.0 * ratio))
    return mae, mse, mape


@dataclass(frozen=True)
class ErrorDistribution:
    """Signed-error summary plus a fixed-bin histogram over ``mean ± 4σ``."""

    mean: float
    sigma: float
    band: tuple
    edges: np.ndarray
    counts: np.ndarray
    n: int

    def to_csv(self, path=None) -> str:
        lines = ["bin_left,bin_right,count"]
        for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts):
            lines.append(f"{format_float(lo)},{format_float(hi)},{int(c)}")
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    def to_dict(self):
        return {"mean": self.mean, "sigma": self.sigma, "band": list(self.band), "n": self.n}


def error_distribution(targets, predictions, bins: int = HIST_BINS) -> ErrorDistribution:
    t, p = _pair(targets, predictions)
    e = p - t
    mean = float(np.mean(e))
    sigma = float(np.std(e))
    band = (mean - 2.0 * sigma, mean + 2.0 * sigma)
    half = 4.0 * sigma if sigma > 0 else 0.5
    edges = np.linspace(mean - half, mean + half, bins + 1)
    counts, _ = np.histogram(e, bins=edges)
    return ErrorDistribution(mean, sigma, band, edges, counts, int(e.size))


@dataclass(frozen=True)
class MetricRow:
    model: str
    horizon: int
    mae: float
    mse: float
    mape: float
    err_mean: float
    err_sigma: float
    n: int

    def to_dict(self):
        return asdict(self)


COLUMNS = tuple(MetricRow.__dataclass_fields__)


@dataclass
class EvalReport:
    """Rows ordered by model (as given) then horizon."""

    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    @property
    def models(self):
        seen = []
        for r in self.rows:
            if r.model not in seen:
                seen.append(r.model)
        return seen

    def row(self, model: str, horizon: int) -> MetricRow:
        for r in self.rows:
            if r.model == model and r.horizon == horizon:
                return r
        if model not in self.models:
            raise UnknownModel(f"model '{model}' not in report; have {self.models}")
        raise KeyError(f"no row for {model} at horizon {horizon}")

    def for_model(self, model: str):
        rows = [r for r in self.rows if r.model == model]
        if not rows:
            raise UnknownModel(f"model '{model}' not in report; have {self.models}")
        return rows

    def check(self):
        """Assert ``mae <= sqrt(mse)`` and non-negativity on every row."""
        for r in self.rows:
            if r.n <= 0 or min(r.mae, r.mse, r.mape, r.err_sigma) < 0:
                raise AssertionError(f"invalid metrics in row {r}")
            if r.mae > math.sqrt(r.mse) * (1 + 1e-12):
                raise AssertionError(f"mae > sqrt(mse) in row {r}")
        return self

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow([r.model, r.horizon, *(format_float(getattr(r, m)) for m in METRICS), r.n])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    def to_json(self, path=None) -> str:
        text = json.dumps(
            {"rows": [r.to_dict() for r in self.rows], "failures": self.failures}, indent=2, sort_keys=True
        ) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_json(cls, text: str):
        d = json.loads(text)
        return cls([MetricRow(**r) for r in d["rows"]], list(d.get("failures", [])))

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [
                MetricRow(r["model"], int(r["horizon"]), *(float(r[m]) for m in METRICS), int(r["n"]))
                for r in csv.DictReader(fh)
            ]
        return cls(rows)


def _row(model, h, targets, predictions):
    mae, mse, mape = compute_metrics(targets, predictions)
    dist = error_distribution(targets, predictions)
    return MetricRow(model, int(h), mae, mse, mape, dist.mean, dist.sigma, dist.n)


def evaluate_horizons(
    forecasts: Sequence[ForecastResult],
    y_test=None,
    window_len: int | None = None,
    horizons: Iterable[int] = DEFAULT_HORIZONS,
    baseline_name: str = "persistence",
) -> EvalReport:
    """Score every forecast at every requested horizon.

    A persistence row set is always included. When ``y_test`` and
    ``window_len`` are given it is rebuilt from the raw test target over the
    same windows as the forecasts; otherwise a forecast named
    ``baseline_name`` must already be present. Horizons a model does not
    cover become entries in ``failures`` instead of aborting the report.
    """
    horizons = [int(h) for h in horizons]
    if not horizons or min(horizons) < 1:
        raise ConfigError("horizons must be positive integers")
    forecasts = list(forecasts)
    names = [f.model for f in forecasts]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate model names: {names}")
    if baseline_name not in names:
        if y_test is None or window_len is None:
            raise ConfigError("y_test and window_len are needed to build the persistence baseline")
        H = max([max(horizons)] + [f.horizon for f in forecasts])
        y = np.asarray(y_test, dtype=np.float64).ravel()
        n = y.size - window_len - H + 1
        if n < 1:
            raise ConfigError(f"test series of {y.size} rows is too short for window {window_len} + horizon {H}")
        targets = np.lib.stride_tricks.sliding_window_view(y[window_len:], H)[:n]
        forecasts.insert(0, ForecastResult(persistence_windows(y, window_len, H), targets, baseline_name))

    report = EvalReport()
    for f in forecasts:
        for h in horizons:
            if h > f.horizon:
                report.failures.append(
                    {"model": f.model, "horizon": h, "error": f"model predicts only {f.horizon} steps"}
                )
                continue
            try:
                report.rows.append(_row(f.model, h, f.targets[:, h - 1], f.predictions[:, h - 1]))
            except (EmptyInput, LengthMismatch) as exc:
                report.failures.append({"model": f.model, "horizon": h, "error": str(exc)})
    return report


def compare(report: EvalReport, model_a: str, model_b: str, metric: str = "mse"):
    """Per-horizon ``a - b`` differences; negative means ``a`` wins.

    ``relative`` is the difference as a fraction of ``b``'s value.
    """
    if metric not in METRICS:
        raise ConfigError(f"metric must be one of {METRICS}")
    rows_a = {r.horizon: r for r in report.for_model(model_a)}
    rows_b = {r.horizon: r for r in report.for_model(model_b)}
    out = []
    for h in sorted(set(rows_a) & set(rows_b)):
        va = getattr(rows_a[h], metric)
        vb = getattr(rows_b[h], metric)
        diff = va - vb
        rel = diff / vb if vb != 0 else (0.0 if diff == 0 else math.copysign(math.inf, diff))
        out.append({"horizon": h, "metric": metric, model_a: va, model_b: vb,
                    "difference": diff, "relative": rel, "winner": model_a if diff < 0 else (model_b if diff > 0 else "tie")})
    return out


def single_step_table(report: EvalReport, models: Sequence[str] | None = None, horizon: int = 1):
    """One row per model at ``horizon``: model, MAE, MSE, MAPE.

    Variant names such as ``"lstm (+delay)"`` pass straight through, giving the
    layout of a with/without-delay comparison table.
    """
    models = report.models if models is None else list(models)
    return [
        {"model": m, "mae": r.mae, "mse": r.mse, "mape": r.mape}
        for m in models
        for r in [report.row(m, horizon)]
    ]
