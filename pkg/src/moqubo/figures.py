"""Render benchmark figures to files next to the delimited output.

Everything here draws from run reports or summary rows onto the Agg
backend; no interactive windows are ever opened.
"""

from __future__ import annotations

import itertools
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 150

_METHOD_COLORS = {
    "uniform": "tab:blue",
    "dichotomic": "tab:green",
    "avg-manhattan": "tab:orange",
    "avg-euclidean": "tab:red",
}


def _color_for(method: str, fallback_cycle=itertools.cycle(plt.cm.tab10.colors)):
    return _METHOD_COLORS.get(method) or next(fallback_cycle)


def plot_fronts(reports, path) -> Path:
    """Overlay the final fronts of all runs, coloured by method.

    Bi-objective reports go on a single scatter; for 3 or 4 objectives each
    objective pair gets its own panel.
    """
    path = Path(path)
    m = len(reports[0].cost_max)
    by_method: dict[str, list[np.ndarray]] = {}
    for r in reports:
        by_method.setdefault(r.method, []).append(
            np.array(r.front_costs, dtype=float).reshape(-1, m)
        )
    pairs = list(itertools.combinations(range(m), 2))
    ncols = min(len(pairs), 3)
    nrows = -(-len(pairs) // ncols)
    fig, axes = plt.subplots(
        nrows, ncols, figsize=(4.2 * ncols, 3.6 * nrows), squeeze=False
    )
    for ax in axes.flat[len(pairs) :]:
        ax.set_visible(False)
    for (j, k), ax in zip(pairs, axes.flat):
        for method, fronts in by_method.items():
            pts = np.vstack(fronts)
            ax.scatter(
                pts[:, j],
                pts[:, k],
                s=10,
                alpha=0.6,
                color=_color_for(method),
                label=method,
            )
        ax.set_xlabel(f"c{j + 1}")
        ax.set_ylabel(f"c{k + 1}")
        ax.grid(alpha=0.3)
    handles, labels = axes.flat[0].get_legend_handles_labels()
    fig.legend(handles, labels, loc="upper center", ncol=len(by_method), frameon=False)
    fig.tight_layout(rect=(0, 0, 1, 0.93))
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def plot_attainment(surfaces: dict[str, np.ndarray], path, title: str = "") -> Path:
    """Step plot of best/median/worst attainment surfaces."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    styles = {"best": "-", "median": "--", "worst": ":"}
    for label, pts in surfaces.items():
        if len(pts) == 0:
            continue
        ax.step(
            pts[:, 0],
            pts[:, 1],
            where="post",
            linestyle=styles.get(label, "-"),
            label=label,
        )
        ax.plot(pts[:, 0], pts[:, 1], marker=".", linestyle="", markersize=4)
    ax.set_xlabel("c1")
    ax.set_ylabel("c2")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def plot_hv_summary(summary, path) -> Path:
    """Bar chart of mean hypervolume per method with std error bars."""
    path = Path(path)
    rows = summary.rows
    fig, ax = plt.subplots(figsize=(1.6 * len(rows) + 2.0, 4.0))
    xs = np.arange(len(rows))
    means = [row.mean_hv for row in rows]
    stds = [0.0 if np.isnan(row.std_hv) else row.std_hv for row in rows]
    colors = [_color_for(row.method) for row in rows]
    ax.bar(xs, means, yerr=stds, capsize=4, color=colors, alpha=0.85)
    ax.set_xticks(xs)
    ax.set_xticklabels([row.method for row in rows], rotation=15)
    ax.set_ylabel("mean hypervolume")
    ax.set_title(summary.instance)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path
