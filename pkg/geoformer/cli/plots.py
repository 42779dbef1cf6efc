"""
Report plots: SVG files through matplotlib and compact text charts for the console.
"""

from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np

BLOCKS = " ▁▂▃▄▅▆▇█"


def setup_matplotlib():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams.update({"svg.hashsalt": "geoformer", "savefig.bbox": "tight"})
    return plt


def save_line_svg(
    values: Sequence[float],
    path: Union[str, Path],
    title: str,
    xlabel: str,
    ylabel: str,
    marker_at: Optional[int] = None,
) -> Path:
    """Line plot of a series; `marker_at` draws a dashed vertical line."""
    plt = setup_matplotlib()
    fig, ax = plt.subplots(figsize=(7, 3))
    ax.plot(np.arange(len(values)), values, linewidth=1.2)
    if marker_at is not None:
        ax.axvline(marker_at, linestyle="--", color="grey", linewidth=0.8)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def save_histogram_svg(
    counts: Sequence[int],
    edges: Sequence[float],
    path: Union[str, Path],
    title: str,
    xlabel: str,
) -> Path:
    plt = setup_matplotlib()
    fig, ax = plt.subplots(figsize=(5, 3))
    edges = np.asarray(edges, dtype=float)
    ax.bar(edges[:-1], counts, width=np.diff(edges), align="edge", edgecolor="black")
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("users")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def sparkline(values: Sequence[float]) -> str:
    """One character per value, scaled to the series maximum."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return ""
    top = arr.max()
    if top <= 0:
        return BLOCKS[0] * arr.size
    levels = np.round(arr / top * (len(BLOCKS) - 1)).astype(int)
    return "".join(BLOCKS[i] for i in levels)


def bar_rows(labels: Sequence[str], values: Sequence[float], width: int = 40) -> List[str]:
    """Horizontal text bars, one row per label."""
    arr = np.asarray(values, dtype=float)
    top = arr.max() if arr.size and arr.max() > 0 else 1.0
    pad = max((len(label) for label in labels), default=0)
    return [
        f"{label:>{pad}} | {'#' * int(round(v / top * width))} {v:g}"
        for label, v in zip(labels, arr)
    ]
