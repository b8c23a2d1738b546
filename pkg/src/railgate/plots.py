"""Figure rendering for the evaluation reports.

Writes ROC curves and score histograms as PNG files next to the delimited
score dump, so an evaluation run leaves a self-contained directory.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["save_roc_curve", "save_score_histogram"]


def _roc_points(pos: np.ndarray, neg: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """TPR/FPR as the threshold sweeps every observed score."""
    thresholds = np.unique(np.concatenate([pos, neg]))[::-1]
    tpr = [(pos >= t).mean() for t in thresholds]
    fpr = [(neg >= t).mean() for t in thresholds]
    return np.concatenate([[0.0], fpr, [1.0]]), np.concatenate([[0.0], tpr, [1.0]])


def save_roc_curve(
    pos_scores: np.ndarray,
    neg_scores: np.ndarray,
    path: str | os.PathLike,
    title: str = "ROC",
) -> None:
    pos = np.asarray(pos_scores, dtype=float)
    neg = np.asarray(neg_scores, dtype=float)
    fpr, tpr = _roc_points(pos, neg)
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.plot(fpr, tpr, lw=1.5)
    ax.plot([0, 1], [0, 1], ls="--", lw=0.8, color="grey")
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title(title)
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_score_histogram(
    pos_scores: np.ndarray,
    neg_scores: np.ndarray,
    path: str | os.PathLike,
    title: str = "score distribution",
    pos_label: str = "positive",
    neg_label: str = "negative",
) -> None:
    pos = np.asarray(pos_scores, dtype=float)
    neg = np.asarray(neg_scores, dtype=float)
    lo = min(pos.min(), neg.min())
    hi = max(pos.max(), neg.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    bins = np.linspace(lo, hi, 40)
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.hist(neg, bins=bins, alpha=0.6, label=neg_label)
    ax.hist(pos, bins=bins, alpha=0.6, label=pos_label)
    ax.set_xlabel("score")
    ax.set_ylabel("count")
    ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
