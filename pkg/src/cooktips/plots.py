"""Figures for evaluation reports, written next to report.json."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_STYLE = {
    "font.size": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.frameon": False,
    "svg.hashsalt": "cooktips",
}


def plot_curve(report, path):
    """Cumulative success rate and normalized points against trial index, per level."""
    with plt.rc_context(_STYLE):
        fig, (ax_pts, ax_suc) = plt.subplots(1, 2, figsize=(9, 3.5), sharex=True)
        for level, curve in sorted(report.per_level_curve.items()):
            trials = sorted(curve)
            ax_pts.plot(trials, [curve[k].normalized_points for k in trials], marker="o", label=f"level {level}")
            ax_suc.plot(trials, [curve[k].success_rate for k in trials], marker="o", label=f"level {level}")
        for ax, title in ((ax_pts, "normalized points"), (ax_suc, "success rate")):
            ax.set_title(title)
            ax.set_xlabel("trial")
            ax.set_ylim(-0.05, 1.05)
        ax_suc.legend(loc="lower right")
        fig.tight_layout()
        fig.savefig(path, dpi=120, metadata={"Software": None})
        plt.close(fig)
    return Path(path)


def plot_levels(report, path):
    with plt.rc_context(_STYLE):
        levels = sorted(report.per_level)
        pts = [report.per_level[lv].normalized_points for lv in levels]
        suc = [report.per_level[lv].success_rate for lv in levels]
        xs = range(len(levels))
        width = 0.38
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.bar([x - width / 2 for x in xs], pts, width, label="normalized points")
        ax.bar([x + width / 2 for x in xs], suc, width, label="success rate")
        ax.set_xticks(list(xs), [f"level {lv}" for lv in levels])
        ax.set_ylim(0, 1.05)
        ax.legend(loc="lower right")
        fig.tight_layout()
        fig.savefig(path, dpi=120, metadata={"Software": None})
        plt.close(fig)
    return Path(path)


def plot_report(report, path):
    if len(report.per_trial_curve) > 1:
        return plot_curve(report, path)
    return plot_levels(report, path)
