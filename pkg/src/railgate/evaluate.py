"""Detector quality evaluation: AUROC and operating-point rates.

AUROC uses the Mann-Whitney pair formulation (ties count half), so the
numbers are exact rather than grid-approximated. ``pos_scores`` is always
the side expected to score higher: in-distribution samples for the OOD
detectors, perturbed samples for the adversarial detector.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = ["auroc", "tpr_at", "fpr_at", "EvalReport"]


def auroc(pos_scores: Sequence[float] | np.ndarray, neg_scores: Sequence[float] | np.ndarray) -> float:
    """(# pos>neg pairs + 0.5 * # ties) / (|pos| * |neg|)."""
    pos = np.asarray(pos_scores, dtype=float)
    neg = np.asarray(neg_scores, dtype=float)
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("auroc needs non-empty score sets")
    gt = (pos[:, None] > neg[None, :]).sum()
    eq = (pos[:, None] == neg[None, :]).sum()
    return float((gt + 0.5 * eq) / (len(pos) * len(neg)))


def tpr_at(pos_scores: np.ndarray, threshold: float) -> float:
    """Fraction of positives at or above the threshold (closed, >=)."""
    pos = np.asarray(pos_scores, dtype=float)
    return float((pos >= threshold).mean())


def fpr_at(neg_scores: np.ndarray, threshold: float) -> float:
    """Fraction of negatives at or above the threshold."""
    neg = np.asarray(neg_scores, dtype=float)
    return float((neg >= threshold).mean())


@dataclass(frozen=True)
class EvalReport:
    """Quality summary for one detector at one calibrated threshold."""

    detector: str
    auroc: float
    threshold: float
    tpr_at_threshold: float
    fpr_at_threshold: float
    n_pos: int
    n_neg: int

    def __post_init__(self) -> None:
        for name in ("auroc", "tpr_at_threshold", "fpr_at_threshold"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    def to_dict(self) -> dict:
        return {
            "detector": self.detector,
            "auroc": self.auroc,
            "threshold": self.threshold,
            "tpr_at_threshold": self.tpr_at_threshold,
            "fpr_at_threshold": self.fpr_at_threshold,
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
        }


def write_reports(path: str | os.PathLike, reports: Sequence[EvalReport]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([r.to_dict() for r in reports], fh, indent=2)
        fh.write("\n")
