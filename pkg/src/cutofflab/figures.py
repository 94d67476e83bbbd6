"""Matplotlib renderings of the report figures.

Each function takes the already-computed plot data (the same series the
CSV artifacts carry) and writes a PNG next to them. Rendering is kept
dependency-free of the estimators so the figures always agree with the
delimited output.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = [
    "save_figure1",
    "save_group_compare_figure",
    "save_rd_plot_figure",
]


def save_figure1(series, path: str | Path) -> None:
    """Two-panel value-function plot: positive vs negative expectations."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 4), sharey=True)
    for ax, variant, label in (
        (axes[0], series.pos_expect, "positive expectations"),
        (axes[1], series.neg_expect, "negative expectations"),
    ):
        ax.plot(series.x, series.baseline, color="0.3", label="no expectations")
        ax.plot(series.x, variant, color="C3", linestyle="--", label=label)
        ax.axhline(0, color="0.8", lw=0.8)
        ax.axvline(0, color="0.8", lw=0.8)
        ax.set_xlabel("outcome relative to reference point")
        ax.legend(loc="upper left", fontsize=8)
    axes[0].set_ylabel("value")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_group_compare_figure(rows: list[dict], outcome_label: str, path: str | Path) -> None:
    """Per-rank-bin outcome means for both regimes (cutoff marked)."""
    usable = [r for r in rows if not r["flagged"]]
    centers = [(r["lo"] + r["hi"]) / 2 for r in usable]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(centers, [r["mean_before"] for r in usable], "o-", label="before rule change")
    ax.plot(centers, [r["mean_after"] for r in usable], "s--", label="after rule change")
    ax.axvline(30.5, color="0.5", lw=0.8, linestyle=":")
    ax.set_xlabel("pre-event rank group")
    ax.set_ylabel(outcome_label)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_rd_plot_figure(
    rows: list[dict], cutoff: float, title: str, path: str | Path
) -> None:
    """Two stacked RD panels: cubic side fits on top, window constants below."""
    ranks = [r["rank"] for r in rows]
    means = [r["bin_mean"] for r in rows]
    err_lo = [r["bin_mean"] - r["ci_lo"] for r in rows]
    err_hi = [r["ci_hi"] - r["bin_mean"] for r in rows]

    fig, axes = plt.subplots(2, 1, figsize=(7, 7), sharex=True)
    for ax in axes:
        ax.errorbar(
            ranks, means, yerr=[err_lo, err_hi],
            fmt="o", ms=3, color="C0", ecolor="0.7", elinewidth=0.8,
        )
        ax.axvline(cutoff, color="0.4", lw=0.9, linestyle="--")
        ax.set_ylabel(title)

    for side in (lambda r: r < cutoff, lambda r: r > cutoff):
        xs = [r["rank"] for r in rows if side(r["rank"])]
        axes[0].plot(
            xs, [r["poly_fit"] for r in rows if side(r["rank"])], color="C3", lw=1.5
        )
        in_win = [
            r for r in rows if side(r["rank"]) and not math.isnan(r["const_fit"])
        ]
        if in_win:
            axes[1].plot(
                [r["rank"] for r in in_win],
                [r["const_fit"] for r in in_win],
                color="C3",
                lw=2.0,
            )
    axes[0].set_title("cubic fit per side")
    axes[1].set_title("window constants per side")
    axes[1].set_xlabel("pre-event rank")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
