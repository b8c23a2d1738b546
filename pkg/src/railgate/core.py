"""Core domain types and the status-code response envelope.

Every prediction request, whether it succeeds or gets stopped by a guard,
ends in a :class:`ResponseEnvelope` with HTTP-style semantics: 200 carries a
prediction (and optionally an explanation), 4xx marks client-side problems
(bad input, rejected request), 5xx marks model-trust or server-side failures
(out-of-distribution input, drift, backend trouble). The mapping from
pipeline outcome to envelope is total and deterministic, so a caller never
sees a silent failure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

__all__ = [
    "RailgateError",
    "NumericDomainError",
    "BackendError",
    "UnsupportedOperationError",
    "ModelFormatError",
    "CalibrationError",
    "ConfigError",
    "GuardName",
    "Verdict",
    "ErrorCode",
    "ImageSpec",
    "ModelContract",
    "GuardReport",
    "Prediction",
    "Success",
    "GuardFailure",
    "BackendFailure",
    "InternalFailure",
    "ResponseEnvelope",
    "GENERIC_REJECTION_MESSAGE",
    "softmax",
    "build_envelope",
]


class RailgateError(Exception):
    """Base class for all errors raised by this package."""


class NumericDomainError(RailgateError):
    """A numeric operation received values outside its domain (NaN/inf)."""


class BackendError(RailgateError):
    """The inference backend failed or returned a malformed response."""


class UnsupportedOperationError(RailgateError):
    """Operation requires a builtin model (e.g. gradients on a remote backend)."""


class ModelFormatError(RailgateError):
    """A persisted model/detector/stats file is malformed or inconsistent."""


class CalibrationError(RailgateError):
    """Threshold calibration was asked to run on insufficient data."""


class ConfigError(RailgateError):
    """Gateway or CLI configuration is invalid or incomplete."""


class GuardName(str, Enum):
    VALIDATION = "validation"
    ADVERSARIAL = "adversarial"
    DRIFT = "drift"
    OOD = "ood"
    EXPLAINABILITY = "explainability"


class Verdict(str, Enum):
    PASS = "pass"
    FLAG = "flag"
    SKIPPED = "skipped"
    ERROR = "error"


class ErrorCode(str, Enum):
    E_VALIDATION = "E_VALIDATION"
    E_REJECTED = "E_REJECTED"
    E_OOD = "E_OOD"
    E_DRIFT = "E_DRIFT"
    E_BACKEND = "E_BACKEND"
    E_INTERNAL = "E_INTERNAL"


# Log-only code for adversarial rejections; the client always sees E_REJECTED.
INTERNAL_ADVERSARIAL_CODE = "E_ADVERSARIAL"

# Fixed client-facing text for adversarial rejections. Deliberately generic:
# the specific detector evidence goes to the structured log only.
GENERIC_REJECTION_MESSAGE = "request rejected"


@dataclass(frozen=True)
class ImageSpec:
    """Declared image geometry for models whose inputs are flattened images.

    ``min_contrast`` is a floor on the standard deviation of the pixel
    values; ``value_range`` bounds each pixel; ``min_resolution`` (optional)
    is the minimum pixel count height*width must reach.
    """

    height: int
    width: int
    channels: int = 1
    min_contrast: float = 0.0
    value_range: tuple[float, float] = (0.0, 1.0)
    min_resolution: Optional[int] = None

    def __post_init__(self) -> None:
        if self.height <= 0 or self.width <= 0 or self.channels <= 0:
            raise ConfigError("image dimensions must be positive")
        lo, hi = self.value_range
        if not lo < hi:
            raise ConfigError("image value_range must satisfy lo < hi")


@dataclass(frozen=True)
class ModelContract:
    """Declared input schema, labels and scoring temperature for one model."""

    model_id: str
    input_dim: int
    num_classes: int
    class_labels: tuple[str, ...]
    feature_ranges: Optional[tuple[tuple[float, float], ...]] = None
    image_spec: Optional[ImageSpec] = None
    temperature: float = 1.0

    def __post_init__(self) -> None:
        if self.input_dim < 1:
            raise ConfigError("input_dim must be positive")
        if self.num_classes < 2:
            raise ConfigError("num_classes must be at least 2")
        if len(self.class_labels) != self.num_classes:
            raise ConfigError(
                f"contract declares {self.num_classes} classes but "
                f"{len(self.class_labels)} labels"
            )
        if self.feature_ranges is not None:
            if len(self.feature_ranges) != self.input_dim:
                raise ConfigError(
                    f"feature_ranges has {len(self.feature_ranges)} entries, "
                    f"expected input_dim={self.input_dim}"
                )
            for i, (lo, hi) in enumerate(self.feature_ranges):
                if not lo < hi:
                    raise ConfigError(f"feature_ranges[{i}] must satisfy min < max")
        if not self.temperature > 0:
            raise ConfigError("temperature must be positive")

    @staticmethod
    def from_dict(d: dict) -> "ModelContract":
        spec = d.get("image_spec")
        image_spec = None
        if spec is not None:
            image_spec = ImageSpec(
                height=int(spec["height"]),
                width=int(spec["width"]),
                channels=int(spec.get("channels", 1)),
                min_contrast=float(spec.get("min_contrast", 0.0)),
                value_range=tuple(spec.get("value_range", (0.0, 1.0))),  # type: ignore[arg-type]
                min_resolution=(
                    int(spec["min_resolution"]) if spec.get("min_resolution") is not None else None
                ),
            )
        ranges = d.get("feature_ranges")
        return ModelContract(
            model_id=str(d["model_id"]),
            input_dim=int(d["input_dim"]),
            num_classes=int(d["num_classes"]),
            class_labels=tuple(str(s) for s in d["class_labels"]),
            feature_ranges=(
                tuple((float(lo), float(hi)) for lo, hi in ranges) if ranges is not None else None
            ),
            image_spec=image_spec,
            temperature=float(d.get("temperature", 1.0)),
        )


@dataclass(frozen=True)
class GuardReport:
    """One safeguard's verdict on a request.

    ``internal_detail`` is the full diagnostic and is written to the
    structured log only; ``external_message`` is what the client may see.
    Guards that must not leak their evidence (the adversarial detector) set
    ``expose_score=False`` so score/threshold stay out of the serialized
    trace while remaining available internally.
    """

    guard_name: GuardName
    verdict: Verdict
    score: Optional[float] = None
    threshold: Optional[float] = None
    internal_detail: str = ""
    external_message: str = ""
    expose_score: bool = True

    def __post_init__(self) -> None:
        if self.verdict is Verdict.FLAG and not self.internal_detail:
            raise ValueError("flag reports must carry a non-empty internal_detail")

    def external_dict(self) -> dict:
        """Client-safe serialization (never includes internal_detail)."""
        out: dict = {
            "guard_name": self.guard_name.value,
            "verdict": self.verdict.value,
        }
        if self.expose_score:
            if self.score is not None:
                out["score"] = self.score
            if self.threshold is not None:
                out["threshold"] = self.threshold
        out["message"] = self.external_message
        return out


@dataclass(frozen=True)
class Prediction:
    label: str
    index: int
    confidence: float


# Pipeline outcome variants fed to build_envelope. Exactly one applies.
@dataclass(frozen=True)
class Success:
    prediction: Prediction
    explanation: Optional[tuple[tuple[int, float], ...]] = None


@dataclass(frozen=True)
class GuardFailure:
    report: GuardReport


@dataclass(frozen=True)
class BackendFailure:
    detail: str


@dataclass(frozen=True)
class InternalFailure:
    detail: str


Outcome = Union[Success, GuardFailure, BackendFailure, InternalFailure]


@dataclass(frozen=True)
class ResponseEnvelope:
    """The model-to-software unit: one envelope per request, success or not."""

    request_id: str
    status_code: int
    message: str
    latency_ms: float
    error_code: Optional[ErrorCode] = None
    prediction: Optional[Prediction] = None
    explanation: Optional[tuple[tuple[int, float], ...]] = None
    guard_trace: tuple[GuardReport, ...] = ()

    def __post_init__(self) -> None:
        ok = self.status_code == 200
        if ok != (self.error_code is None) or ok != (self.prediction is not None):
            raise ValueError(
                "envelope must satisfy: status 200 iff no error_code iff prediction present"
            )
        if self.error_code in (ErrorCode.E_VALIDATION, ErrorCode.E_REJECTED):
            if not 400 <= self.status_code < 500:
                raise ValueError(f"{self.error_code} requires a 4xx status")
        elif self.error_code is not None:
            if not 500 <= self.status_code < 600:
                raise ValueError(f"{self.error_code} requires a 5xx status")
        if self.latency_ms < 0:
            raise ValueError("latency_ms must be non-negative")

    def to_dict(self) -> dict:
        """JSON-ready dict; absent optionals are omitted, not null."""
        out: dict = {
            "request_id": self.request_id,
            "status_code": self.status_code,
            "message": self.message,
            "latency_ms": self.latency_ms,
        }
        if self.error_code is not None:
            out["error_code"] = self.error_code.value
        if self.prediction is not None:
            out["prediction"] = {
                "label": self.prediction.label,
                "index": self.prediction.index,
                "confidence": self.prediction.confidence,
            }
        if self.explanation is not None:
            out["explanation"] = [
                {"feature_index": i, "value": v}
                for i, v in sorted(self.explanation, key=lambda p: p[0])
            ]
        out["guard_trace"] = [r.external_dict() for r in self.guard_trace]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), allow_nan=False)


def softmax(logits: Sequence[float] | np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """Temperature-scaled softmax, computed with max-subtraction.

    Args:
        logits: per-class scores, all finite.
        temperature: positive scaling constant T; probabilities are
            exp(l_i/T) / sum_j exp(l_j/T).

    Returns:
        Array of probabilities summing to 1 (within 1e-9).

    Raises:
        NumericDomainError: on non-finite logits or non-positive temperature.
    """
    z = np.asarray(logits, dtype=float)
    if z.size == 0 or not np.all(np.isfinite(z)):
        raise NumericDomainError("softmax requires non-empty, finite logits")
    if not (math.isfinite(temperature) and temperature > 0):
        raise NumericDomainError("softmax temperature must be positive and finite")
    z = z / temperature
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


# (status_code, error_code, client message) per flagged guard.
_GUARD_FAILURE_MAP = {
    GuardName.VALIDATION: (400, ErrorCode.E_VALIDATION, None),
    GuardName.ADVERSARIAL: (400, ErrorCode.E_REJECTED, GENERIC_REJECTION_MESSAGE),
    GuardName.OOD: (500, ErrorCode.E_OOD, None),
    GuardName.DRIFT: (500, ErrorCode.E_DRIFT, None),
}


def build_envelope(
    request_id: str,
    outcome: Outcome,
    latency_ms: float,
    guard_trace: Sequence[GuardReport] = (),
) -> ResponseEnvelope:
    """Map a pipeline outcome to its response envelope.

    Total and deterministic: success -> 200; validation flag -> 400
    E_VALIDATION with the field-level message; adversarial flag -> 400
    E_REJECTED with the fixed generic text; OOD flag -> 500 E_OOD; drift
    flag (enforce mode) -> 500 E_DRIFT; backend trouble -> 502 E_BACKEND;
    anything else -> 500 E_INTERNAL.
    """
    trace = tuple(guard_trace)
    if isinstance(outcome, Success):
        pred = outcome.prediction
        return ResponseEnvelope(
            request_id=request_id,
            status_code=200,
            message=f"ok: predicted {pred.label!r}",
            latency_ms=latency_ms,
            prediction=pred,
            explanation=outcome.explanation,
            guard_trace=trace,
        )
    if isinstance(outcome, GuardFailure):
        report = outcome.report
        try:
            status, code, fixed_message = _GUARD_FAILURE_MAP[report.guard_name]
        except KeyError:
            # Explainability never rejects; a failure reaching here is internal.
            return ResponseEnvelope(
                request_id=request_id,
                status_code=500,
                message="internal error",
                latency_ms=latency_ms,
                error_code=ErrorCode.E_INTERNAL,
                guard_trace=trace,
            )
        return ResponseEnvelope(
            request_id=request_id,
            status_code=status,
            message=fixed_message if fixed_message is not None else report.external_message,
            latency_ms=latency_ms,
            error_code=code,
            guard_trace=trace,
        )
    if isinstance(outcome, BackendFailure):
        return ResponseEnvelope(
            request_id=request_id,
            status_code=502,
            message="inference backend unavailable",
            latency_ms=latency_ms,
            error_code=ErrorCode.E_BACKEND,
            guard_trace=trace,
        )
    return ResponseEnvelope(
        request_id=request_id,
        status_code=500,
        message="internal error",
        latency_ms=latency_ms,
        error_code=ErrorCode.E_INTERNAL,
        guard_trace=trace,
    )
