"""Static SVG plots for experiment reports.

One line chart per (masking pattern, metric): the mask parameter on the x
axis, the seed-averaged metric on the y axis, one line per training variant.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "tsdforecast"

import matplotlib.pyplot as plt

METRIC_LABELS = {
    "min_ade": "minADE (m)",
    "min_fde": "minFDE (m)",
    "miss_rate": "miss rate",
}

PATTERN_LABELS = {
    "random": "random mask rate",
    "continuous": "observed steps",
}


def plot_metric_sweep(table: dict, pattern: str, metric: str, out_path) -> Path:
    """Render one sweep figure.

    ``table`` maps variant -> list of (parameter, value) pairs, already
    averaged over seeds and sorted by parameter.
    """
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for variant in sorted(table):
        pairs = table[variant]
        xs = [p for p, _ in pairs]
        ys = [v for _, v in pairs]
        ax.plot(xs, ys, marker="o", label=variant)
    ax.set_xlabel(PATTERN_LABELS.get(pattern, pattern))
    ax.set_ylabel(METRIC_LABELS.get(metric, metric))
    if pattern == "continuous":
        ax.invert_xaxis()  # fewer observed steps = harder, read left to right
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out_path


def plot_loss_curve(steps, totals, out_path) -> Path:
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(steps, totals)
    ax.set_xlabel("step")
    ax.set_ylabel("total loss")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out_path
