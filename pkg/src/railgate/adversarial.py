"""Adversarial input detection and FGSM attack generation.

The detector is a binary logistic model over the raw feature space, trained
on clean examples against their FGSM counterparts. At serve time it scores
the probability that an input was perturbed; flagged requests get a fixed
generic rejection while the detector's evidence (score, threshold, top
feature contributions) goes to the structured log only.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    GENERIC_REJECTION_MESSAGE,
    GuardName,
    GuardReport,
    ModelFormatError,
    Verdict,
    softmax,
)
from .models import (
    BuiltinModel,
    LogisticModel,
    fit_logistic,
    loss_gradient,
    _model_from_dict,
    _model_to_dict,
)

__all__ = [
    "AdvDetector",
    "fgsm",
    "build_adv_training_set",
    "fit_adv_detector",
    "detect",
    "save_detector",
    "load_detector",
]

DEFAULT_TAU = 0.6


@dataclass(frozen=True)
class AdvDetector:
    """Binary logistic detector plus its decision threshold tau in (0, 1)."""

    model: LogisticModel
    tau: float = DEFAULT_TAU

    def __post_init__(self) -> None:
        if not 0.0 < self.tau < 1.0:
            raise ModelFormatError("tau_adv must lie strictly inside (0, 1)")
        if self.model.num_classes != 2:
            raise ModelFormatError("the adversarial detector must be binary")

    @property
    def input_dim(self) -> int:
        return self.model.input_dim

    def score(self, x: Sequence[float] | np.ndarray) -> float:
        """Probability that x is adversarial (class 1)."""
        return float(softmax(self.model.logits(np.asarray(x, dtype=float)))[1])


def fgsm(
    model: BuiltinModel,
    x: Sequence[float] | np.ndarray,
    y: int,
    epsilon: float,
    clip: Optional[tuple[float, float]] = None,
) -> np.ndarray:
    """Fast gradient sign step: x + eps * sign(dL/dx), optionally clipped.

    sign(0) = 0, so zero-gradient coordinates (and eps=0) leave the input
    untouched; the infinity-norm of the perturbation never exceeds eps.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    x = np.asarray(x, dtype=float)
    adv = x + epsilon * np.sign(loss_gradient(model, x, y))
    if clip is not None:
        lo, hi = clip
        adv = np.clip(adv, lo, hi)
    return adv


def build_adv_training_set(
    model: BuiltinModel,
    X: np.ndarray,
    y: np.ndarray,
    epsilon: float,
    seed: int = 0,
    clip: Optional[tuple[float, float]] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Pair every clean example with its FGSM counterpart.

    Returns a shuffled, balanced detector training set: labels 0 for clean
    rows, 1 for perturbed ones. Deterministic given the seed.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if len(X) == 0:
        raise ValueError("clean dataset must be non-empty")
    if epsilon == 0:
        warnings.warn(
            "epsilon=0 makes the clean and perturbed classes identical point sets",
            stacklevel=2,
        )
    perturbed = np.vstack([fgsm(model, X[i], int(y[i]), epsilon, clip) for i in range(len(X))])
    X_det = np.vstack([X, perturbed])
    y_det = np.concatenate([np.zeros(len(X), dtype=int), np.ones(len(X), dtype=int)])
    order = np.random.default_rng(seed).permutation(len(y_det))
    return X_det[order], y_det[order]


def fit_adv_detector(
    model: BuiltinModel,
    X: np.ndarray,
    y: np.ndarray,
    epsilon: float,
    tau: float = DEFAULT_TAU,
    seed: int = 0,
    learning_rate: float = 0.5,
    epochs: int = 400,
    clip: Optional[tuple[float, float]] = None,
) -> AdvDetector:
    """Build the FGSM training set and fit the binary detector on it."""
    X_det, y_det = build_adv_training_set(model, X, y, epsilon, seed=seed, clip=clip)
    detector_model = fit_logistic(
        X_det, y_det, learning_rate=learning_rate, epochs=epochs, seed=seed, num_classes=2
    )
    return AdvDetector(model=detector_model, tau=tau)


def detect(detector: AdvDetector, x: Sequence[float] | np.ndarray) -> GuardReport:
    """Score an input and flag it iff score >= tau (closed threshold).

    The external message is always the fixed generic rejection text; the
    score, tau and the top-3 features by |w_i * x_i| contribution appear in
    internal_detail only (and the report keeps them out of the serialized
    trace via expose_score=False).
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (detector.input_dim,):
        raise ValueError(
            f"detector expects {detector.input_dim} features, got shape {x.shape}"
        )
    score = detector.score(x)
    # Discriminant weights of the binary softmax parametrization.
    w = detector.model.weights[1] - detector.model.weights[0]
    contrib = w * x
    top = np.argsort(-np.abs(contrib))[:3]
    top_txt = ", ".join(f"f{int(i)}={contrib[i]:+.4f}" for i in top)
    flagged = score >= detector.tau
    detail = (
        f"adversarial score {score:.6f} vs tau {detector.tau:.6f} "
        f"({'flag' if flagged else 'pass'}); top contributions: {top_txt}"
    )
    return GuardReport(
        guard_name=GuardName.ADVERSARIAL,
        verdict=Verdict.FLAG if flagged else Verdict.PASS,
        score=score,
        threshold=detector.tau,
        internal_detail=detail,
        external_message=GENERIC_REJECTION_MESSAGE if flagged else "adversarial check passed",
        expose_score=False,
    )


def save_detector(detector: AdvDetector, path: str | os.PathLike) -> None:
    """Detector file = the model document plus {"tau_adv": tau}."""
    doc = _model_to_dict(detector.model)
    doc["tau_adv"] = detector.tau
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_detector(path: str | os.PathLike) -> AdvDetector:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ModelFormatError(f"cannot read detector file {path}: {exc}") from exc
    except ValueError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or "tau_adv" not in doc:
        raise ModelFormatError(f"{path}: detector file must carry tau_adv")
    model = _model_from_dict(doc, str(path))
    if not isinstance(model, LogisticModel):
        raise ModelFormatError(f"{path}: detector must be a logistic model")
    return AdvDetector(model=model, tau=float(doc["tau_adv"]))
