"""Matplotlib figures rendered to files alongside the text reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

plt.rcParams.update({
    "figure.figsize": (7.0, 4.2),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
})

_STATUS_COLORS = {"verified": "#2a9d4e", "falsified": "#c43b3b", "unknown": "#b08c2e"}


def _save(fig, path) -> str:
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return str(path)


def containment_figure(rows, path) -> str:
    """Grouped bars: share of each partition inside each region set."""
    columns = ("train_positive", "test_positive", "test_negative", "test_ambiguous")
    fig, ax = plt.subplots()
    x = np.arange(len(rows))
    width = 0.2
    for j, col in enumerate(columns):
        vals = [getattr(r, col) if getattr(r, col) is not None else 0.0 for r in rows]
        ax.bar(x + (j - 1.5) * width, vals, width, label=col.replace("_", " "))
    ax.set_xticks(x)
    ax.set_xticklabels([r.region for r in rows], rotation=20, ha="right")
    ax.set_ylabel("inside the set (%)")
    ax.set_ylim(0, 105)
    ax.legend(fontsize=8)
    return _save(fig, path)


def training_figure(metrics, path) -> str:
    """Loss and train accuracy per epoch on twin axes."""
    epochs = [m.epoch for m in metrics]
    fig, ax = plt.subplots()
    ax.plot(epochs, [m.loss for m in metrics], color="#335f9e", label="loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss", color="#335f9e")
    ax2 = ax.twinx()
    ax2.plot(epochs, [100 * m.train_accuracy for m in metrics],
             color="#2a9d4e", label="train accuracy")
    ax2.set_ylabel("train accuracy (%)", color="#2a9d4e")
    ax2.grid(False)
    return _save(fig, path)


def margins_figure(entries, path) -> str:
    """Certified margins per region set, colored by verification status."""
    fig, ax = plt.subplots()
    x = np.arange(len(entries))
    colors = [_STATUS_COLORS.get(e.status, "#777777") for e in entries]
    ax.bar(x, [e.margin for e in entries], color=colors)
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xticks(x)
    ax.set_xticklabels([e.region for e in entries], rotation=20, ha="right")
    ax.set_ylabel("certified margin (logit gap lower bound)")
    ax.set_yscale("symlog")
    handles = [plt.Rectangle((0, 0), 1, 1, color=c) for c in _STATUS_COLORS.values()]
    ax.legend(handles, list(_STATUS_COLORS), fontsize=8)
    return _save(fig, path)


def radii_figure(radii, path) -> str:
    """Histogram of certified l-inf radii (log-scaled when spread is wide)."""
    radii = np.asarray(list(radii), dtype=np.float64)
    fig, ax = plt.subplots()
    positive = radii[radii > 0]
    if positive.size and positive.max() / positive.min() > 50:
        bins = np.logspace(np.log10(positive.min()), np.log10(positive.max()), 20)
        ax.hist(positive, bins=bins, color="#335f9e")
        ax.set_xscale("log")
        if (radii == 0).any():
            ax.set_title(f"{int((radii == 0).sum())} points had no certified radius")
    elif radii.size:
        ax.hist(radii, bins=20, color="#335f9e")
    ax.set_xlabel("certified radius")
    ax.set_ylabel("points")
    return _save(fig, path)
