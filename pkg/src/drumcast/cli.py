"""Command-line interface.

Exit codes: 0 success, 2 configuration or usage error, 3 data error,
4 stage failure. Set ``DRUMCAST_LOG_LEVEL`` (e.g. ``DEBUG``) for logging.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import __version__
from .evaluation import DEFAULT_HORIZONS
from .exceptions import ConfigError, DataError, DrumcastError
from .frame import write_csv
from .models.config import TrainConfig
from .pipeline import (
    run_pipeline,
    stage_augment,
    stage_delay,
    stage_evaluate,
    stage_predict,
    stage_preprocess,
    stage_report,
    stage_screen,
    stage_train,
)
from .preprocessing import PreprocessConfig, SplitSpec
from .synthetic import PRESETS, generate, preset

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_STAGE = 0, 2, 3, 4

log = logging.getLogger("drumcast")

_PATH_ERRORS = (FileNotFoundError, PermissionError, IsADirectoryError, NotADirectoryError)


def _ints(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _names(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _split(text):
    try:
        return SplitSpec.parse(text)
    except (ConfigError, ValueError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_split(p):
    p.add_argument("--split", type=_split, default=SplitSpec(), metavar="TRAIN,VAL,TEST",
                   help="chronological split fractions (default 0.7,0.15,0.15)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="drumcast", description="Drum-level forecasting pipeline.")
    parser.add_argument("--version", action="version", version=f"drumcast {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run every stage from a JSON config")
    p.add_argument("--config", required=True, help="pipeline config (JSON)")
    p.add_argument("--resume", action="store_true", help="skip stages whose inputs are unchanged")

    p = sub.add_parser("preprocess", help="fill gaps, remove outliers, smooth")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--max-gap", type=int, default=10)
    p.add_argument("--outlier-window", type=int, default=11)
    p.add_argument("--n-sigmas", type=float, default=3.0)
    p.add_argument("--smooth-window", type=int, default=5)

    p = sub.add_parser("screen", help="Granger screening of candidate variables")
    p.add_argument("--input", required=True, help="cleaned CSV")
    p.add_argument("--target", required=True)
    p.add_argument("--candidates", type=_names, default="all", help="comma-separated names or 'all'")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--history-len", type=int, default=10)
    p.add_argument("--predictor", default="linear-AR", choices=["linear-AR", "lstm", "transformer"])
    p.add_argument("--conditioning", default="mutual", choices=["mutual", "fixed"])
    p.add_argument("--conditioning-vars", type=_names, default=[])
    p.add_argument("--n-jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0, help="run seed; per-stage seeds are derived from it")
    p.add_argument("--disabled", action="store_true", help="retain every candidate without testing")
    _add_split(p)
    p.add_argument("--output", required=True)

    p = sub.add_parser("delay", help="infer per-variable delays against the target")
    p.add_argument("--input", required=True, help="cleaned CSV")
    p.add_argument("--target", required=True)
    p.add_argument("--variables", type=_names, default=None)
    p.add_argument("--report", default=None, help="causal report whose retained set is used")
    p.add_argument("--max-lag", type=int, default=600)
    p.add_argument("--allow-negative", action="store_true")
    p.add_argument("--profiles", default=None, help="also write lag profiles as CSV")
    _add_split(p)
    p.add_argument("--output", default="delays.json")

    p = sub.add_parser("augment", help="add lag-shifted copies of delayed variables")
    p.add_argument("--input", required=True, help="cleaned CSV")
    p.add_argument("--delays", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--no-lags", action="store_true", help="keep the selected variables without lag columns")
    p.add_argument("--drop-original", action="store_true")
    p.add_argument("--output", required=True)

    p = sub.add_parser("train", help="train one forecaster and save a checkpoint")
    p.add_argument("--input", required=True, help="augmented CSV")
    p.add_argument("--target", required=True)
    p.add_argument("--kind", default="transformer", choices=["transformer", "lstm"])
    p.add_argument("--name", default=None, help="model name (defaults to the kind)")
    p.add_argument("--window-len", type=int, default=60)
    p.add_argument("--horizon", type=int, default=60)
    p.add_argument("--d-model", type=int, default=32)
    p.add_argument("--n-heads", type=int, default=2)
    p.add_argument("--d-ff", type=int, default=64)
    p.add_argument("--n-layers", type=int, default=2)
    p.add_argument("--dropout", type=float, default=0.0)
    d = TrainConfig()
    p.add_argument("--learning-rate", type=float, default=d.learning_rate)
    p.add_argument("--batch-size", type=int, default=d.batch_size)
    p.add_argument("--max-steps", type=int, default=d.max_steps)
    p.add_argument("--patience", type=int, default=d.patience)
    p.add_argument("--eval-every", type=int, default=d.eval_every)
    p.add_argument("--seed", type=int, default=0, help="run seed; the model seed is derived from it and the name")
    p.add_argument("--log", default=None, help="write the training log as JSON")
    _add_split(p)
    p.add_argument("--output", required=True, help="checkpoint path")

    p = sub.add_parser("predict", help="forecast the test split with a checkpoint")
    p.add_argument("--input", required=True, help="augmented CSV")
    p.add_argument("--checkpoint", required=True)
    _add_split(p)
    p.add_argument("--output", required=True)

    p = sub.add_parser("evaluate", help="score forecasts per horizon, persistence included")
    p.add_argument("--forecasts", type=_names, required=True, help="comma-separated forecast CSVs")
    p.add_argument("--names", type=_names, default=None, help="model names (default: file stems)")
    p.add_argument("--input", required=True, help="augmented CSV the forecasts came from")
    p.add_argument("--target", required=True)
    p.add_argument("--window-len", type=int, default=60)
    p.add_argument("--horizons", type=_ints, default=list(DEFAULT_HORIZONS))
    _add_split(p)
    p.add_argument("--output", required=True, help="report CSV")
    p.add_argument("--json", default=None, help="also write the report as JSON")

    p = sub.add_parser("report", help="histograms, plots and comparison tables from stored results")
    p.add_argument("--eval", required=True, help="evaluation report JSON")
    p.add_argument("--forecasts", type=_names, required=True)
    p.add_argument("--names", type=_names, default=None)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--output-dir", required=True)

    p = sub.add_parser("synth", help="generate a synthetic frame")
    p.add_argument("--preset", default="fig5", choices=sorted(PRESETS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-samples", type=int, default=None)
    p.add_argument("--output", default=None, help="CSV path (default: stdout)")
    p.add_argument("--truth", default=None, help="write the ground truth JSON here")
    return parser


def _dispatch(args):
    c = args.command
    if c == "run":
        manifest = run_pipeline(args.config, resume=args.resume)
        print(json.dumps({"stages": [s["name"] for s in manifest["stages"]]}))
    elif c == "preprocess":
        cfg = PreprocessConfig(args.max_gap, args.outlier_window, args.n_sigmas, args.smooth_window)
        stage_preprocess(args.input, args.output, cfg)
    elif c == "screen":
        report = stage_screen(
            args.input, args.output, args.target,
            "all" if args.candidates in ("all", ["all"]) else args.candidates, args.split, args.seed, args.alpha,
            args.history_len, args.predictor, args.conditioning, args.conditioning_vars, args.n_jobs,
            not args.disabled,
        )
        print(json.dumps({"retained": report.retained}))
    elif c == "delay":
        table = stage_delay(args.input, args.output, args.target, args.variables, args.report, args.max_lag,
                            args.allow_negative, args.split, args.profiles)
        print(json.dumps({"lags": table.lags}))
    elif c == "augment":
        stage_augment(args.input, args.delays, args.output, args.target, not args.no_lags, not args.drop_original)
    elif c == "train":
        shape = {
            "window_len": args.window_len, "horizon": args.horizon, "d_model": args.d_model,
            "n_heads": args.n_heads, "d_ff": args.d_ff, "n_layers": args.n_layers, "dropout": args.dropout,
        }
        if args.kind == "lstm":
            shape = {k: shape[k] for k in ("window_len", "horizon", "d_model", "dropout")}
        tc = TrainConfig(learning_rate=args.learning_rate, batch_size=args.batch_size, max_steps=args.max_steps,
                         patience=args.patience, eval_every=args.eval_every)
        stage_train(args.input, args.output, args.target, args.kind, args.name, shape, tc, args.split, args.seed,
                    args.log)
    elif c == "predict":
        stage_predict(args.input, args.checkpoint, args.output, args.split)
    elif c == "evaluate":
        stage_evaluate(args.forecasts, args.input, args.target, args.window_len, args.horizons, args.split,
                       args.output, args.json, args.names)
    elif c == "report":
        stage_report(args.eval, args.forecasts, args.output_dir, args.horizon, args.names)
    elif c == "synth":
        overrides = {} if args.n_samples is None else {"n_samples": args.n_samples}
        frame, truth = generate(preset(args.preset, args.seed, **overrides))
        text = write_csv(frame, args.output)
        if args.output is None:
            sys.stdout.write(text)
        if args.truth:
            truth.to_json(args.truth)


def main(argv=None) -> int:
    level = os.environ.get("DRUMCAST_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        _dispatch(args)
    except ConfigError as exc:
        print(f"drumcast: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"drumcast: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DrumcastError as exc:
        print(f"drumcast: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except OSError as exc:
        print(f"drumcast: {exc}", file=sys.stderr)
        return EXIT_CONFIG if isinstance(exc, _PATH_ERRORS) else EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
