"""Deterministic SVG line plots of tabulated results."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

#: fixed salt so that SVG element ids do not change between runs
SVG_SALT = "spapprox"


def write_svg(path: str | Path, x: Sequence[float], series: dict[str, Sequence[float]],
              xlabel: str, ylabel: str = "value", log_y: bool = False) -> Path:
    """Write a polyline plot; identical inputs give identical bytes."""
    path = Path(path)
    with plt.rc_context({"svg.hashsalt": SVG_SALT, "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for name in sorted(series):
            ax.plot(list(x), list(series[name]), marker=".", label=name)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if log_y and all(v > 0 for values in series.values() for v in values):
            ax.set_yscale("log")
        if len(series) > 1:
            ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path
