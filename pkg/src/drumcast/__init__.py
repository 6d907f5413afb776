"""Drum-level forecasting: causal screening, delay alignment and numpy forecasters."""

__version__ = "0.1.0"

from .causal import CausalReport, CausalTestSpec, GrangerScreener, granger_test, screen_all  # noqa: E402
from .delay import (  # noqa: E402
    AugmentSpec,
    DelayAugmenter,
    DelayTable,
    augment_with_lags,
    build_delay_table,
    infer_delay,
)
from .evaluation import EvalReport, compare, compute_metrics, error_distribution, evaluate_horizons  # noqa: E402
from .frame import SeriesFrame, load_csv, write_csv  # noqa: E402
from .models import (  # noqa: E402
    LSTMForecaster,
    ModelConfig,
    PersistenceForecaster,
    TrainConfig,
    TransformerForecaster,
)
from .preprocessing import (  # noqa: E402
    GapInterpolator,
    HampelFilter,
    MovingAverage,
    PreprocessConfig,
    SplitSpec,
    ZScoreScaler,
    preprocess,
    split,
    standardize,
)
from .wilcoxon import wilcoxon_signed_rank  # noqa: E402

__all__ = [
    "__version__",
    "SeriesFrame",
    "load_csv",
    "write_csv",
    "PreprocessConfig",
    "SplitSpec",
    "preprocess",
    "split",
    "standardize",
    "GapInterpolator",
    "HampelFilter",
    "MovingAverage",
    "ZScoreScaler",
    "wilcoxon_signed_rank",
    "CausalTestSpec",
    "CausalReport",
    "granger_test",
    "screen_all",
    "GrangerScreener",
    "infer_delay",
    "build_delay_table",
    "DelayTable",
    "AugmentSpec",
    "augment_with_lags",
    "DelayAugmenter",
    "ModelConfig",
    "TrainConfig",
    "TransformerForecaster",
    "LSTMForecaster",
    "PersistenceForecaster",
    "compute_metrics",
    "error_distribution",
    "evaluate_horizons",
    "compare",
    "EvalReport",
]
