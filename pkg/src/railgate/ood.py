"""Out-of-distribution scoring, threshold calibration and windowed drift.

Three post-inference detectors (maximum softmax probability, max-logit,
energy) all produce scores oriented "larger = more in-distribution", so a
single quantile calibration routine serves them all. Pre-inference drift is
a population-level check: a sliding window of recent inputs is histogrammed
against per-feature reference histograms from training time and compared
with the Hellinger distance.
"""

from __future__ import annotations

import json
import math
import os
import threading
from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import CalibrationError, GuardName, GuardReport, ModelFormatError, Verdict, softmax

__all__ = [
    "DETECTOR_NAMES",
    "msp_score",
    "max_logit_score",
    "energy_score",
    "calibrate",
    "hellinger",
    "OodThresholds",
    "ood_verdict",
    "ReferenceStats",
    "fit_reference_stats",
    "DriftWindow",
    "drift_check",
]

DETECTOR_NAMES = ("msp", "max_logit", "energy")

DEFAULT_BINS = 10
DEFAULT_WINDOW = 200
DEFAULT_TARGET_TPR = 0.95
DEFAULT_DRIFT_THRESHOLD = 0.25


def msp_score(probabilities: Sequence[float] | np.ndarray) -> float:
    """Maximum softmax probability; lies in [1/K, 1]."""
    return float(np.max(np.asarray(probabilities, dtype=float)))


def max_logit_score(logits: Sequence[float] | np.ndarray) -> float:
    """Largest raw logit."""
    return float(np.max(np.asarray(logits, dtype=float)))


def energy_score(logits: Sequence[float] | np.ndarray, temperature: float = 1.0) -> float:
    """Negated energy, T*log sum_i exp(l_i/T), with max-subtraction.

    Negating the conventional energy keeps the orientation uniform with the
    other detectors: larger means more in-distribution.
    """
    z = np.asarray(logits, dtype=float) / temperature
    m = float(np.max(z))
    return float(temperature * (m + math.log(np.sum(np.exp(z - m)))))


def calibrate(scores: Sequence[float] | np.ndarray, target_tpr: float) -> float:
    """Pick a threshold as the lower empirical quantile of ID scores.

    threshold = sorted_scores[floor((1 - target_tpr) * N)], which guarantees
    at least target_tpr of the calibration sample scores >= threshold.

    Raises:
        CalibrationError: with fewer than 20 samples.
    """
    s = np.sort(np.asarray(scores, dtype=float))
    if len(s) < 20:
        raise CalibrationError(f"calibration needs >= 20 samples, got {len(s)}")
    if not 0.0 < target_tpr < 1.0:
        raise CalibrationError("target_tpr must lie in (0, 1)")
    return float(s[int(math.floor((1.0 - target_tpr) * len(s)))])


def hellinger(p: Sequence[float] | np.ndarray, q: Sequence[float] | np.ndarray) -> float:
    """Hellinger distance between two discrete distributions, in [0, 1]."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError("histograms must be 1-d with equal bin counts")
    for name, h in (("p", p), ("q", q)):
        if np.any(h < 0) or abs(h.sum() - 1.0) > 1e-6:
            raise ValueError(f"histogram {name} must be non-negative and sum to 1")
    return float(np.sqrt(0.5 * np.sum((np.sqrt(p) - np.sqrt(q)) ** 2)))


@dataclass(frozen=True)
class OodThresholds:
    """Per-detector score floors plus the vote-combination policy."""

    msp_min: Optional[float] = None
    max_logit_min: Optional[float] = None
    energy_min: Optional[float] = None
    policy: str = "any"  # any | majority | all
    enabled: tuple[str, ...] = DETECTOR_NAMES

    def __post_init__(self) -> None:
        if self.policy not in ("any", "majority", "all"):
            raise ValueError(f"unknown policy {self.policy!r}")
        unknown = set(self.enabled) - set(DETECTOR_NAMES)
        if unknown:
            raise ValueError(f"unknown detectors {sorted(unknown)}")
        if not self.enabled:
            raise ValueError("at least one detector must be enabled")
        for name in self.enabled:
            if self.threshold_for(name) is None:
                raise ValueError(f"enabled detector {name!r} has no threshold")

    def threshold_for(self, name: str) -> Optional[float]:
        return {
            "msp": self.msp_min,
            "max_logit": self.max_logit_min,
            "energy": self.energy_min,
        }[name]

    def to_dict(self) -> dict:
        return {
            "msp_min": self.msp_min,
            "max_logit_min": self.max_logit_min,
            "energy_min": self.energy_min,
            "policy": self.policy,
            "enabled": list(self.enabled),
        }

    @staticmethod
    def from_dict(d: dict) -> "OodThresholds":
        return OodThresholds(
            msp_min=d.get("msp_min"),
            max_logit_min=d.get("max_logit_min"),
            energy_min=d.get("energy_min"),
            policy=d.get("policy", "any"),
            enabled=tuple(d.get("enabled", DETECTOR_NAMES)),
        )


def _combine(votes: int, enabled: int, policy: str) -> bool:
    if policy == "any":
        return votes >= 1
    if policy == "all":
        return votes == enabled
    # majority; ties flag (1-of-2 flags) as the fail-safe choice
    return 2 * votes >= enabled


def ood_verdict(
    logits: Sequence[float] | np.ndarray,
    probabilities: Sequence[float] | np.ndarray,
    thresholds: OodThresholds,
    temperature: float = 1.0,
) -> GuardReport:
    """Score every enabled detector and combine their votes.

    A detector votes "flag" iff its score falls strictly below its
    threshold. The report's score/threshold fields carry the first flagging
    detector (or the first enabled one on a pass); all scores go into
    internal_detail.
    """
    scores = {
        "msp": msp_score(probabilities),
        "max_logit": max_logit_score(logits),
        "energy": energy_score(logits, temperature),
    }
    votes: dict[str, bool] = {}
    for name in thresholds.enabled:
        thr = thresholds.threshold_for(name)
        assert thr is not None
        votes[name] = scores[name] < thr
    flagged = _combine(sum(votes.values()), len(votes), thresholds.policy)

    detail = ", ".join(
        f"{name}={scores[name]:.6f} (min {thresholds.threshold_for(name):.6f}, "
        f"{'flag' if votes[name] else 'ok'})"
        for name in thresholds.enabled
    )
    first_flagging = next((n for n in thresholds.enabled if votes[n]), None)
    headline = first_flagging if first_flagging is not None else thresholds.enabled[0]
    verdict = Verdict.FLAG if flagged else Verdict.PASS
    message = (
        f"input flagged out-of-distribution (policy={thresholds.policy})"
        if flagged
        else f"ood check passed (policy={thresholds.policy})"
    )
    return GuardReport(
        guard_name=GuardName.OOD,
        verdict=verdict,
        score=scores[headline],
        threshold=thresholds.threshold_for(headline),
        internal_detail=f"votes under policy={thresholds.policy}: {detail}",
        external_message=message,
    )


@dataclass(frozen=True)
class ReferenceStats:
    """Persisted training-time statistics for one guarded model.

    Holds per-feature reference histograms (equal-width bins over the
    training min/max), the calibration score samples, the fitted OOD
    thresholds, the drift configuration, and the SHAP background rows.
    """

    bin_edges: np.ndarray  # (d, B+1)
    histograms: np.ndarray  # (d, B), rows sum to 1
    calibration_scores: dict[str, np.ndarray]
    thresholds: OodThresholds
    drift_threshold: float = DEFAULT_DRIFT_THRESHOLD
    window_size: int = DEFAULT_WINDOW
    temperature: float = 1.0
    background: Optional[np.ndarray] = None  # (m, d) rows for SHAP

    def __post_init__(self) -> None:
        edges = np.asarray(self.bin_edges, dtype=float)
        hists = np.asarray(self.histograms, dtype=float)
        if edges.ndim != 2 or hists.ndim != 2 or edges.shape[0] != hists.shape[0]:
            raise ModelFormatError("bin_edges and histograms must align per feature")
        if hists.shape[1] < 2 or edges.shape[1] != hists.shape[1] + 1:
            raise ModelFormatError("need B >= 2 bins and B+1 edges per feature")
        if np.any(np.abs(hists.sum(axis=1) - 1.0) > 1e-9):
            raise ModelFormatError("each reference histogram must sum to 1")
        if not 0.0 <= self.drift_threshold <= 1.0:
            raise ModelFormatError("drift_threshold must lie in [0, 1]")
        if self.window_size < 1:
            raise ModelFormatError("window_size must be positive")
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "histograms", hists)
        if self.background is not None:
            object.__setattr__(self, "background", np.asarray(self.background, dtype=float))

    @property
    def input_dim(self) -> int:
        return self.bin_edges.shape[0]

    @property
    def num_bins(self) -> int:
        return self.histograms.shape[1]

    def to_dict(self) -> dict:
        out = {
            "bin_edges": self.bin_edges.tolist(),
            "histograms": self.histograms.tolist(),
            "calibration_scores": {k: np.asarray(v).tolist() for k, v in self.calibration_scores.items()},
            "thresholds": self.thresholds.to_dict(),
            "drift_threshold": self.drift_threshold,
            "window_size": self.window_size,
            "temperature": self.temperature,
        }
        if self.background is not None:
            out["background"] = self.background.tolist()
        return out

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")

    @staticmethod
    def from_dict(doc: dict) -> "ReferenceStats":
        try:
            return ReferenceStats(
                bin_edges=np.asarray(doc["bin_edges"], dtype=float),
                histograms=np.asarray(doc["histograms"], dtype=float),
                calibration_scores={
                    k: np.asarray(v, dtype=float) for k, v in doc["calibration_scores"].items()
                },
                thresholds=OodThresholds.from_dict(doc["thresholds"]),
                drift_threshold=float(doc.get("drift_threshold", DEFAULT_DRIFT_THRESHOLD)),
                window_size=int(doc.get("window_size", DEFAULT_WINDOW)),
                temperature=float(doc.get("temperature", 1.0)),
                background=(
                    np.asarray(doc["background"], dtype=float) if "background" in doc else None
                ),
            )
        except ModelFormatError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"malformed reference stats document ({exc})") from exc

    @staticmethod
    def load(path: str | os.PathLike) -> "ReferenceStats":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ModelFormatError(f"cannot read reference stats {path}: {exc}") from exc
        except ValueError as exc:
            raise ModelFormatError(f"{path}: not valid JSON ({exc})") from exc
        return ReferenceStats.from_dict(doc)


def _reference_histograms(X: np.ndarray, num_bins: int) -> tuple[np.ndarray, np.ndarray]:
    n, d = X.shape
    edges = np.empty((d, num_bins + 1))
    hists = np.empty((d, num_bins))
    for j in range(d):
        lo, hi = float(X[:, j].min()), float(X[:, j].max())
        if lo == hi:
            # Degenerate feature: widen so the bins still tile an interval.
            lo, hi = lo - 0.5, hi + 0.5
        edges[j] = np.linspace(lo, hi, num_bins + 1)
        counts, _ = np.histogram(X[:, j], bins=edges[j])
        hists[j] = counts / counts.sum()
    return edges, hists


def fit_reference_stats(
    X: np.ndarray,
    logits: np.ndarray,
    temperature: float = 1.0,
    num_bins: int = DEFAULT_BINS,
    window_size: int = DEFAULT_WINDOW,
    target_tpr: float = DEFAULT_TARGET_TPR,
    drift_threshold: float = DEFAULT_DRIFT_THRESHOLD,
    policy: str = "any",
    enabled: Sequence[str] = DETECTOR_NAMES,
    background_size: int = 50,
    seed: int = 0,
) -> ReferenceStats:
    """Build ReferenceStats from training inputs and their model logits.

    Computes the per-feature histograms, scores every training example with
    each detector, calibrates thresholds at ``target_tpr``, and samples the
    SHAP background rows (seeded).
    """
    X = np.asarray(X, dtype=float)
    logits = np.asarray(logits, dtype=float)
    if X.ndim != 2 or logits.ndim != 2 or len(X) != len(logits):
        raise CalibrationError("need matching X (n,d) and logits (n,K)")
    edges, hists = _reference_histograms(X, num_bins)

    probs = softmax(logits, temperature)
    m = logits.max(axis=1)
    z = logits / temperature
    zmax = z.max(axis=1, keepdims=True)
    energy = temperature * (zmax.ravel() + np.log(np.exp(z - zmax).sum(axis=1)))
    samples = {
        "msp": probs.max(axis=1),
        "max_logit": m,
        "energy": energy,
    }
    enabled = tuple(enabled)
    fitted = {name: calibrate(samples[name], target_tpr) for name in enabled}
    thresholds = OodThresholds(
        msp_min=fitted.get("msp"),
        max_logit_min=fitted.get("max_logit"),
        energy_min=fitted.get("energy"),
        policy=policy,
        enabled=enabled,
    )
    rng = np.random.default_rng(seed)
    take = min(background_size, len(X))
    background = X[rng.choice(len(X), size=take, replace=False)]
    return ReferenceStats(
        bin_edges=edges,
        histograms=hists,
        calibration_scores={k: np.asarray(v) for k, v in samples.items()},
        thresholds=thresholds,
        drift_threshold=drift_threshold,
        window_size=window_size,
        temperature=temperature,
        background=background,
    )


class DriftWindow:
    """Ring buffer of the last W validated inputs plus a lifetime counter.

    The gateway serializes ingests per model; the class itself carries a
    lock so direct users get the same guarantee.
    """

    def __init__(self, size: int):
        if size < 1:
            raise ValueError("window size must be positive")
        self.size = size
        self._buf: deque[np.ndarray] = deque(maxlen=size)
        self.total_ingested = 0
        self._lock = threading.Lock()

    def ingest(self, x: Sequence[float] | np.ndarray) -> None:
        with self._lock:
            self._buf.append(np.asarray(x, dtype=float).copy())
            self.total_ingested += 1

    def __len__(self) -> int:
        return len(self._buf)

    def snapshot(self) -> np.ndarray:
        with self._lock:
            if not self._buf:
                return np.empty((0, 0))
            return np.vstack(list(self._buf))


def drift_check(window: DriftWindow, ref: ReferenceStats) -> GuardReport:
    """Windowed Hellinger drift score against the reference histograms.

    Skipped (no flag either way) until the window has seen ``window_size``
    inputs. Window values outside a feature's reference range clamp into the
    edge bins, so an out-of-range excursion registers as mass where the
    reference already has its tails.
    """
    snap = window.snapshot()
    if len(snap) < ref.window_size:
        return GuardReport(
            guard_name=GuardName.DRIFT,
            verdict=Verdict.SKIPPED,
            internal_detail=(
                f"drift window warming up: {len(snap)}/{ref.window_size} inputs"
            ),
            external_message="drift check skipped (window warming up)",
        )
    per_feature = []
    for j in range(ref.input_dim):
        edges = ref.bin_edges[j]
        vals = np.clip(snap[:, j], edges[0], edges[-1])
        counts, _ = np.histogram(vals, bins=edges)
        per_feature.append(hellinger(counts / counts.sum(), ref.histograms[j]))
    score = float(np.mean(per_feature))
    flagged = score >= ref.drift_threshold
    detail = (
        f"mean hellinger {score:.6f} vs threshold {ref.drift_threshold:.6f}; "
        f"per-feature: {', '.join(f'{h:.4f}' for h in per_feature)}"
    )
    return GuardReport(
        guard_name=GuardName.DRIFT,
        verdict=Verdict.FLAG if flagged else Verdict.PASS,
        score=score,
        threshold=ref.drift_threshold,
        internal_detail=detail,
        external_message=(
            "input distribution drift detected" if flagged else "no input drift detected"
        ),
    )
