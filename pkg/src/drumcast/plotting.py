"""Deterministic SVG figures: forecast overlay and error histogram.

Matplotlib's SVG backend embeds a date and random element ids by default;
both are pinned here so identical inputs give identical bytes.
"""

from __future__ import annotations

import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_overlay", "plot_error_histogram"]

_RC = {"svg.hashsalt": "drumcast", "svg.fonttype": "none", "path.simplify": False}


def _save(fig, path):
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def plot_overlay(targets, predictions, path=None, title="", max_points=2000, units="mm"):
    """Predicted vs actual target over the first ``max_points`` samples."""
    t = np.asarray(targets, dtype=np.float64)[:max_points]
    p = np.asarray(predictions, dtype=np.float64)[:max_points]
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(8, 3.5))
        ax.plot(t, label="actual", linewidth=1.0, color="black")
        ax.plot(p, label="predicted", linewidth=1.0, color="tab:red")
        ax.set_xlabel("sample")
        ax.set_ylabel(f"drum level ({units})" if units else "value")
        if title:
            ax.set_title(title)
        ax.legend(loc="upper right")
        fig.tight_layout()
        return _save(fig, path)


def plot_error_histogram(dist, path=None, title="", units="mm"):
    """Bar histogram of an :class:`~drumcast.evaluation.ErrorDistribution` with ±2σ lines."""
    edges = np.asarray(dist.edges)
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 3.5))
        ax.bar(edges[:-1], dist.counts, width=np.diff(edges), align="edge", color="tab:blue", edgecolor="white")
        for x, style in ((dist.band[0], "--"), (dist.mean, "-"), (dist.band[1], "--")):
            ax.axvline(x, color="tab:red", linestyle=style, linewidth=1.0)
        ax.set_xlabel(f"error ({units})" if units else "error")
        ax.set_ylabel("count")
        ax.set_title(title or f"mean {dist.mean:.3g}, ±2σ [{dist.band[0]:.3g}, {dist.band[1]:.3g}]")
        fig.tight_layout()
        return _save(fig, path)
