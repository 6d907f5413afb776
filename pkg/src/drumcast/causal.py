"""Granger-style causal screening with a Wilcoxon test on paired errors.

For a candidate ``x`` the screen fits two one-step predictors of the target
``y`` on the first part of the data: a restricted one that sees the
histories of ``y`` and the conditioning set ``Z``, and an unrestricted one
that additionally sees ``x``'s history. On the held-out remainder the
per-step absolute errors of the two are compared with a one-sided signed-rank
test; ``x`` is retained when the unrestricted errors are significantly
smaller.
"""

from __future__ import annotations

import json
import logging
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import ConfigError, DrumcastError, EmptyCandidates, InsufficientData
from .frame import SeriesFrame, as_frame
from .wilcoxon import wilcoxon_signed_rank

__all__ = [
    "PREDICTOR_KINDS",
    "CausalTestSpec",
    "CausalEntry",
    "CausalReport",
    "lagged_design",
    "ols_fit",
    "granger_test",
    "screen_all",
    "GrangerScreener",
]

log = logging.getLogger(__name__)

PREDICTOR_KINDS = ("linear-AR", "lstm", "transformer")
RIDGE_JITTER = 1e-8
_COND_LIMIT = 1e12


@dataclass(frozen=True)
class CausalTestSpec:
    target: str
    candidate: str
    conditioning: tuple = ()
    history_len: int = 10
    predictor_kind: str = "linear-AR"
    alpha: float = 0.05
    seed: int = 0
    fit_fraction: float = 0.7

    def __post_init__(self):
        object.__setattr__(self, "conditioning", tuple(self.conditioning))
        kind = _normalize_kind(self.predictor_kind)
        object.__setattr__(self, "predictor_kind", kind)
        if self.candidate == self.target:
            raise ConfigError("candidate must differ from the target")
        if self.candidate in self.conditioning or self.target in self.conditioning:
            raise ConfigError("conditioning set must exclude the target and the candidate")
        if self.history_len < 1:
            raise ConfigError("history_len must be >= 1")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if not 0 < self.fit_fraction < 1:
            raise ConfigError("fit_fraction must lie in (0, 1)")


def _normalize_kind(kind: str) -> str:
    k = str(kind).strip()
    low = k.lower()
    if low in ("linear-ar", "linear_ar", "linear", "ols"):
        return "linear-AR"
    if low in ("lstm", "transformer"):
        return low
    raise ConfigError(f"predictor_kind must be one of {PREDICTOR_KINDS}, got {kind!r}")


@dataclass
class CausalEntry:
    candidate: str
    p_value: float
    statistic: float
    retained: bool
    n_pairs: int
    mae_with: float
    mae_without: float
    method: str = ""
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def to_dict(self):
        d = asdict(self)
        if d["error"] is None:
            d.pop("error")
        for key in ("p_value", "statistic", "mae_with", "mae_without"):
            if isinstance(d[key], float) and not math.isfinite(d[key]):
                d[key] = None
        return d

    @classmethod
    def from_dict(cls, d):
        def num(v):
            return math.nan if v is None else float(v)

        return cls(
            candidate=d["candidate"],
            p_value=num(d["p_value"]),
            statistic=num(d["statistic"]),
            retained=bool(d["retained"]),
            n_pairs=int(d["n_pairs"]),
            mae_with=num(d["mae_with"]),
            mae_without=num(d["mae_without"]),
            method=d.get("method", ""),
            error=d.get("error"),
        )

    @classmethod
    def failure(cls, candidate, exc):
        return cls(candidate, math.nan, math.nan, False, 0, math.nan, math.nan, "failed",
                   f"{type(exc).__name__}: {exc}")


@dataclass
class CausalReport:
    """Screening results ordered by ascending p-value (failures last)."""

    target: str
    alpha: float
    entries: list = field(default_factory=list)

    def __post_init__(self):
        self.entries = sorted(self.entries, key=_entry_order)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, candidate: str) -> CausalEntry:
        for e in self.entries:
            if e.candidate == candidate:
                return e
        raise KeyError(candidate)

    @property
    def retained(self) -> list:
        return [e.candidate for e in self.entries if e.retained]

    @property
    def failures(self) -> list:
        return [e for e in self.entries if e.failed]

    def to_json(self, path=None) -> str:
        text = json.dumps([e.to_dict() for e in self.entries], indent=2) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_json(cls, text_or_path, target="", alpha=0.05):
        text = str(text_or_path)
        if not text.lstrip().startswith("["):
            text = Path(text_or_path).read_text(encoding="utf-8")
        return cls(target, alpha, [CausalEntry.from_dict(d) for d in json.loads(text)])


def _entry_order(e: CausalEntry):
    p = e.p_value if math.isfinite(e.p_value) else math.inf
    return (e.failed, p, e.candidate)


# ---------------------------------------------------------------- linear path


def lagged_design(columns: Sequence[np.ndarray], history_len: int, intercept=True) -> np.ndarray:
    """Regressors for predicting row ``t`` from rows ``t - history_len .. t - 1``.

    Row ``i`` of the result corresponds to ``t = history_len + i``; each
    input column contributes ``history_len`` lag columns, most recent first.
    """
    blocks = []
    for col in columns:
        w = sliding_window_view(np.asarray(col, dtype=np.float64)[:-1], history_len)
        blocks.append(w[:, ::-1])
    n_rows = len(columns[0]) - history_len if columns else 0
    if intercept:
        blocks.insert(0, np.ones((n_rows, 1)))
    return np.hstack(blocks) if blocks else np.empty((n_rows, 0))


def ols_fit(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares coefficients from the normal equations.

    A rank-deficient or badly conditioned design gets a ridge jitter of
    ``1e-8 * mean(diag(X'X))`` on the diagonal.
    """
    G = X.T @ X
    rhs = X.T @ y
    try:
        c = cho_factor(G, lower=True, check_finite=False)
        diag = np.abs(np.diag(c[0]))
        if diag.min() <= 0 or (diag.max() / diag.min()) ** 2 > _COND_LIMIT:
            raise LinAlgError("ill-conditioned")
        return cho_solve(c, rhs, check_finite=False)
    except LinAlgError:
        log.warning("singular design (%d columns); applying ridge jitter %.0e", X.shape[1], RIDGE_JITTER)
        jitter = RIDGE_JITTER * max(float(np.mean(np.diag(G))), np.finfo(float).tiny)
        G = G + jitter * np.eye(G.shape[0])
        return cho_solve(cho_factor(G, lower=True, check_finite=False), rhs, check_finite=False)


def _in_span(base: np.ndarray, extra: np.ndarray, tol=1e-10) -> bool:
    """True when every column of ``extra`` is (numerically) a combination of ``base``'s."""
    coef = ols_fit(base, extra)
    resid = extra - base @ coef
    return np.linalg.norm(resid) <= tol * max(np.linalg.norm(extra), 1e-300)


def _linear_errors(fit: SeriesFrame, ev: SeriesFrame, spec: CausalTestSpec):
    tau = spec.history_len
    base_names = [spec.target, *spec.conditioning]
    y_fit = fit[spec.target][tau:]
    y_ev = ev[spec.target][tau:]

    Xr_fit = lagged_design([fit[n] for n in base_names], tau)
    Xr_ev = lagged_design([ev[n] for n in base_names], tau)
    Xc_fit = lagged_design([fit[spec.candidate]], tau, intercept=False)
    Xc_ev = lagged_design([ev[spec.candidate]], tau, intercept=False)

    beta_r = ols_fit(Xr_fit, y_fit)
    err_without = np.abs(y_ev - Xr_ev @ beta_r)
    if _in_span(Xr_fit, Xc_fit):
        # The candidate adds no column space, so both predictors coincide.
        return err_without.copy(), err_without
    Xu_fit = np.hstack([Xr_fit, Xc_fit])
    Xu_ev = np.hstack([Xr_ev, Xc_ev])
    beta_u = ols_fit(Xu_fit, y_fit)
    err_with = np.abs(y_ev - Xu_ev @ beta_u)
    return err_with, err_without


# ---------------------------------------------------------------- model path


def _model_errors(fit, ev, spec, model_params, train_params):
    from .models.estimators import make_forecaster

    base = [spec.target, *spec.conditioning]
    errors = []
    for names in (base + [spec.candidate], base):
        means = {n: float(np.mean(fit[n])) for n in names}
        scales = {n: float(np.std(fit[n])) or 1.0 for n in names}

        def design(frame):
            return np.column_stack([(frame[n] - means[n]) / scales[n] for n in names])

        X_fit = design(fit)
        n_val = max(spec.history_len + 2, len(fit) // 7)
        model = make_forecaster(
            spec.predictor_kind,
            window_len=spec.history_len,
            horizon=1,
            target_col=0,
            seed=spec.seed,
            **(model_params or {}),
            **(train_params or {}),
        )
        model.fit(X_fit[:-n_val], X_fit[:-n_val, 0], eval_set=(X_fit[-n_val:], X_fit[-n_val:, 0]))
        X_ev = design(ev)
        pred = model.predict(X_ev[:-1])[:, 0]
        errors.append(np.abs(X_ev[spec.history_len:, 0] - pred))
    return errors[0], errors[1]


# ---------------------------------------------------------------- tests


def granger_test(frame, spec: CausalTestSpec, model_params=None, train_params=None) -> CausalEntry:
    """Test whether ``spec.candidate`` helps predict ``spec.target``.

    The frame is split chronologically: the first ``fit_fraction`` of rows
    fit both predictors and the rest supplies the paired errors. With
    ``predictor_kind="linear-AR"`` the predictors are OLS regressions on
    lagged values (with intercept) and the result is deterministic.
    """
    frame = as_frame(frame)
    frame.require([spec.target, spec.candidate, *spec.conditioning])
    n_fit = int(math.floor(len(frame) * spec.fit_fraction))
    fit = frame.slice(0, n_fit)
    ev = frame.slice(n_fit, None)
    tau = spec.history_len
    if len(ev) - tau < 5 or n_fit - tau <= (2 + len(spec.conditioning)) * tau + 1:
        raise InsufficientData(
            f"{len(frame)} rows are too few for history_len={tau} and "
            f"{len(spec.conditioning)} conditioning variables"
        )
    if spec.predictor_kind == "linear-AR":
        err_with, err_without = _linear_errors(fit, ev, spec)
    else:
        err_with, err_without = _model_errors(fit, ev, spec, model_params, train_params)

    res = wilcoxon_signed_rank(err_with, err_without, alternative="a_less")
    return CausalEntry(
        candidate=spec.candidate,
        p_value=res.p_value,
        statistic=res.statistic,
        retained=bool(res.p_value < spec.alpha),
        n_pairs=int(err_with.size),
        mae_with=float(np.mean(err_with)),
        mae_without=float(np.mean(err_without)),
        method=res.method,
    )


def candidate_seed(seed: int, candidate: str) -> int:
    return (int(seed) + zlib.crc32(candidate.encode("utf-8"))) % (2**32)


def screen_all(
    frame,
    target: str,
    candidates: Sequence[str] | None = None,
    conditioning: str = "mutual",
    conditioning_vars: Sequence[str] = (),
    history_len: int = 10,
    predictor_kind: str = "linear-AR",
    alpha: float = 0.05,
    seed: int = 0,
    n_jobs: int = 1,
    model_params=None,
    train_params=None,
) -> CausalReport:
    """Run :func:`granger_test` for every candidate.

    ``conditioning="mutual"`` conditions each test on all the other
    candidates; ``"fixed"`` uses ``conditioning_vars`` for every test.
    ``candidates=None`` means every variable except the target. A failing
    candidate becomes a failure entry; the batch always completes.
    """
    frame = as_frame(frame)
    if candidates is None:
        candidates = [n for n in frame.names if n != target]
    candidates = list(candidates)
    if not candidates:
        raise EmptyCandidates("no candidates to screen")
    if conditioning not in ("mutual", "fixed"):
        raise ConfigError("conditioning must be 'mutual' or 'fixed'")
    frame.require([target])

    def run(c):
        try:
            if conditioning == "mutual":
                z = tuple(o for o in candidates if o != c)
            else:
                z = tuple(o for o in conditioning_vars if o not in (c, target))
            spec = CausalTestSpec(
                target, c, z, history_len, predictor_kind, alpha, candidate_seed(seed, c)
            )
            return granger_test(frame, spec, model_params, train_params)
        except DrumcastError as exc:
            return CausalEntry.failure(c, exc)

    if n_jobs > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            entries = list(pool.map(run, candidates))
    else:
        entries = [run(c) for c in candidates]
    return CausalReport(target, alpha, entries)


class GrangerScreener(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`screen_all`.

    ``fit`` stores the report in ``report_`` and the retained candidates in
    ``selected_``; ``transform`` keeps the target and the selected columns.
    """

    def __init__(
        self,
        target="drum_level",
        candidates=None,
        history_len=10,
        alpha=0.05,
        predictor_kind="linear-AR",
        conditioning="mutual",
        conditioning_vars=(),
        seed=0,
        n_jobs=1,
    ):
        self.target = target
        self.candidates = candidates
        self.history_len = history_len
        self.alpha = alpha
        self.predictor_kind = predictor_kind
        self.conditioning = conditioning
        self.conditioning_vars = conditioning_vars
        self.seed = seed
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        frame = as_frame(X)
        self.report_ = screen_all(
            frame,
            self.target,
            self.candidates,
            conditioning=self.conditioning,
            conditioning_vars=self.conditioning_vars,
            history_len=self.history_len,
            predictor_kind=self.predictor_kind,
            alpha=self.alpha,
            seed=self.seed,
            n_jobs=self.n_jobs,
        )
        self.selected_ = [n for n in frame.names if n in set(self.report_.retained)]
        return self

    def transform(self, X):
        frame = as_frame(X)
        return frame.select([self.target, *self.selected_])
