"""Comparison tables and the per-model bar chart."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd

from .evaluate import comparison_table, summarize_report

REAL_VS_PREDICTED = ("sat_rgb", "uav_rgb", "pred_uav_rgb")
AUGMENTED = ("sat_rgbnir", "sat_rgbnir+pred_uav_rgb")


def comparison_tables(per_fold: pd.DataFrame, model: str | None = None) -> dict[str, pd.DataFrame]:
    """Real-vs-predicted and NIR-augmentation tables for one model family."""
    summary = summarize_report(per_fold)
    if model is not None:
        summary = summary[summary["model"] == model]
    out = {}
    for name, sets in (("real_vs_predicted", REAL_VS_PREDICTED), ("augmented", AUGMENTED)):
        sub = summary[summary["modality_set"].isin(sets)]
        if len(sub):
            table = comparison_table(sub)
            out[name] = table[[c for c in sets if c in table.columns]]
    return out


def model_comparison_chart(per_fold: pd.DataFrame, path: Path) -> Path:
    """Bars of mean fold metric per model and modality set, error bars = standard error."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    summary = summarize_report(per_fold)
    tasks = sorted(summary["task"].unique())
    fig, axes = plt.subplots(1, len(tasks), figsize=(6 * len(tasks), 4), squeeze=False)
    for ax, task in zip(axes[0], tasks):
        sub = summary[summary["task"] == task]
        agg = sub.groupby(["model", "modality_set"])["mean"].agg(["mean", "std", "count"]).reset_index()
        models = sorted(agg["model"].unique())
        sets = sorted(agg["modality_set"].unique())
        width = 0.8 / max(len(sets), 1)
        for k, s in enumerate(sets):
            rows = agg[agg["modality_set"] == s].set_index("model").reindex(models)
            err = (rows["std"].fillna(0) / np.sqrt(rows["count"].clip(lower=1))).to_numpy()
            ax.bar(np.arange(len(models)) + k * width, rows["mean"].to_numpy(), width, yerr=err, label=s)
        ax.set_xticks(np.arange(len(models)) + 0.4 - width / 2)
        ax.set_xticklabels(models)
        ax.set_title(task)
        ax.set_ylabel(sub["metric"].iloc[0] if len(sub) else "")
        ax.legend(fontsize=7)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path
