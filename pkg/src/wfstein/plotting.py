"""Line charts for report files (SVG, deterministic bytes)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "wfstein"


def line_plot(path, series: dict, xlabel: str, ylabel: str, title: str, logx: bool = False):
    """``series`` maps a label to (xs, ys)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label in sorted(series):
        xs, ys = series[label]
        ax.plot(xs, ys, marker="o", label=str(label))
    if logx:
        ax.set_xscale("log", base=2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if len(series) > 1:
        ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
