"""Report figures written next to the CLI's delimited/JSON output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    # keep files byte-stable between runs
    "svg.hashsalt": "lytnet",
    "path.simplify": False,
}

SHORT = {"red": "Red", "green": "Green", "countdown_green": "CDG",
         "countdown_blank": "CDB", "none": "None"}


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata={"Software": None} if path.suffix == ".png" else {"Date": None})
    plt.close(fig)
    return path


def plot_confusion(report, path):
    """Heat map of the confusion matrix (rows = truth, columns = prediction)."""
    labels = [SHORT.get(c, c) for c in report.classes]
    cm = np.asarray(report.confusion)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.6, 3.2))
        ax.imshow(cm, cmap="Blues")
        ax.set_xticks(range(len(labels)), labels)
        ax.set_yticks(range(len(labels)), labels)
        ax.set_xlabel("predicted")
        ax.set_ylabel("true")
        hi = cm.max() if cm.size else 0
        for (i, j), v in np.ndenumerate(cm):
            ax.text(j, i, str(v), ha="center", va="center",
                    color="white" if hi and v > hi / 2 else "black")
        ax.set_title(f"accuracy {report.accuracy:.3f}")
        return _save(fig, path)


def plot_class_scores(report, path):
    """Grouped precision/recall/F1 bars; undefined values are drawn as gaps."""
    labels = [SHORT.get(c, c) for c in report.classes]
    x = np.arange(len(labels))
    series = (("precision", report.precision), ("recall", report.recall), ("F1", report.f1))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 2.8))
        width = 0.26
        for i, (name, vals) in enumerate(series):
            ys = [np.nan if v is None else v for v in vals]
            ax.bar(x + (i - 1) * width, ys, width, label=name)
        ax.set_xticks(x, labels)
        ax.set_ylim(0, 1.05)
        ax.legend(ncol=3, loc="lower center", frameon=False)
        return _save(fig, path)


def plot_layer_costs(cost, path):
    """Per-row MACs (bars) with parameter counts on a twin axis."""
    rows = [l.row for l in cost.layers]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.5, 2.8))
        ax.bar(rows, [l.macs / 1e6 for l in cost.layers], color="0.6")
        ax.set_xlabel("row")
        ax.set_ylabel("MMACs")
        ax.set_xticks(rows)
        ax2 = ax.twinx()
        ax2.plot(rows, [l.params / 1e3 for l in cost.layers], "o-", color="C3", ms=3)
        ax2.set_ylabel("params (k)", color="C3")
        ax.set_title(f"{cost.total_macs / 1e6:.1f} MMACs, {cost.total_params / 1e6:.2f} M params")
        return _save(fig, path)
