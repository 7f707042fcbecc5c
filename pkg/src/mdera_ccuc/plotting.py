"""SVG figures for the CLI reports; output is byte-stable across runs."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_RC = {"svg.hashsalt": "mdera-ccuc", "svg.fonttype": "path", "path.simplify": False}


def _save(fig, path) -> None:
    with matplotlib.rc_context(_RC):
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def plot_loading(loadings: dict[str, np.ndarray], line: int, path, title: str = "") -> None:
    """Loading level of one line over the day, one curve per label."""
    fig, ax = plt.subplots(figsize=(8, 3.5))
    for label, lv in loadings.items():
        hours = np.arange(lv.shape[0]) / 12.0
        ax.plot(hours, lv[:, line], lw=1.0, label=label)
    ax.axhline(1.0, color="k", lw=0.8, ls="--")
    ax.set_xlabel("hour")
    ax.set_ylabel(f"loading of line {line}")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def plot_benders(history: list[dict], path) -> None:
    """Lower and upper bounds per Benders iteration."""
    it = [h["iter"] for h in history]
    lb = [h["lb"] for h in history]
    ub = [h["ub"] if np.isfinite(h["ub"]) else np.nan for h in history]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(it, lb, "o-", label="lower bound")
    ax.plot(it, ub, "s-", label="upper bound")
    ax.set_xlabel("iteration")
    ax.set_ylabel("cost ($)")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def plot_df_scatter(values: np.ndarray, path, title: str = "") -> None:
    """First two DF coordinates of every record (the third is implied)."""
    values = np.asarray(values)
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    if values.shape[1] >= 2:
        ax.scatter(values[:, 0], values[:, 1], s=4, alpha=0.5)
    ax.plot([0, 1, 0, 0], [0, 0, 1, 0], color="k", lw=0.8)
    ax.set_xlabel("DF 1")
    ax.set_ylabel("DF 2")
    ax.set_title(title)
    ax.set_aspect("equal")
    fig.tight_layout()
    _save(fig, path)


def plot_cost_bars(labels: list[str], columns: dict[str, list[float]], path, ylabel: str = "cost ($)") -> None:
    """Grouped bars, one group per label and one bar per column."""
    fig, ax = plt.subplots(figsize=(7, 3.5))
    n = len(columns)
    width = 0.8 / max(n, 1)
    pos = np.arange(len(labels))
    for i, (name, vals) in enumerate(columns.items()):
        ax.bar(pos + i * width - 0.4 + width / 2, vals, width, label=name)
    ax.set_xticks(pos)
    ax.set_xticklabels(labels)
    ax.set_ylabel(ylabel)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    _save(fig, path)
