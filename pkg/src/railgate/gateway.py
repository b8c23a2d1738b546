"""The guarded prediction pipeline and its HTTP surface.

Each request runs the fixed sequence: validation, adversarial detection,
drift (the input is ingested into the window first; a drift flag only
rejects in enforce mode), inference, OOD scoring, explanation; the first
flagging guard short-circuits the rest. Every stage appends a GuardReport
to the trace, every flag produces exactly one structured log record with
the full internal detail, and the handler itself never raises: every
outcome, including internal faults, becomes an envelope.
"""

from __future__ import annotations

import json
import logging
import threading
import time
import uuid
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.concurrency import run_in_threadpool
from fastapi.responses import JSONResponse, Response

from .adversarial import detect
from .config import GatewayConfig, ModelConfig
from .core import (
    BackendError,
    ErrorCode,
    GuardFailure,
    GuardName,
    GuardReport,
    BackendFailure,
    InternalFailure,
    Outcome,
    Prediction,
    ResponseEnvelope,
    Success,
    Verdict,
    build_envelope,
    softmax,
    INTERNAL_ADVERSARIAL_CODE,
)
from .explain import exact_shapley, kernel_shap
from .models import RemoteBackend, predict, remote_infer
from .ood import DriftWindow, drift_check, ood_verdict
from .validation import validate

__all__ = ["Gateway", "Metrics", "MetricsSnapshot", "create_app"]

audit_logger = logging.getLogger("railgate.audit")

LogSink = Callable[[dict], None]


def _default_log_sink(record: dict) -> None:
    audit_logger.info(json.dumps(record))


@dataclass(frozen=True)
class MetricsSnapshot:
    request_count: int
    status_counts: dict[int, int]
    error_code_counts: dict[str, int]
    guard_flag_counts: dict[str, int]
    latency_p50_ms: float
    latency_p95_ms: float
    latency_p99_ms: float
    last_drift_score: Optional[float]

    def to_dict(self) -> dict:
        return {
            "request_count": self.request_count,
            "status_counts": {str(k): v for k, v in sorted(self.status_counts.items())},
            "error_code_counts": dict(sorted(self.error_code_counts.items())),
            "guard_flag_counts": dict(sorted(self.guard_flag_counts.items())),
            "latency_ms": {
                "p50": self.latency_p50_ms,
                "p95": self.latency_p95_ms,
                "p99": self.latency_p99_ms,
            },
            "last_drift_score": self.last_drift_score,
        }


class Metrics:
    """Thread-safe request counters; snapshots are internally consistent."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._status: dict[int, int] = {}
        self._errors: dict[str, int] = {}
        self._flags: dict[str, int] = {}
        self._latencies: list[float] = []
        self._total = 0
        self._last_drift: Optional[float] = None

    def record(self, envelope: ResponseEnvelope) -> None:
        with self._lock:
            self._total += 1
            self._status[envelope.status_code] = self._status.get(envelope.status_code, 0) + 1
            if envelope.error_code is not None:
                code = envelope.error_code.value
                self._errors[code] = self._errors.get(code, 0) + 1
            for report in envelope.guard_trace:
                if report.verdict is Verdict.FLAG:
                    name = report.guard_name.value
                    self._flags[name] = self._flags.get(name, 0) + 1
                if report.guard_name is GuardName.DRIFT and report.score is not None:
                    self._last_drift = report.score
            self._latencies.append(envelope.latency_ms)

    def snapshot(self) -> MetricsSnapshot:
        with self._lock:
            if self._latencies:
                p50, p95, p99 = np.percentile(self._latencies, [50, 95, 99])
            else:
                p50 = p95 = p99 = 0.0
            return MetricsSnapshot(
                request_count=self._total,
                status_counts=dict(self._status),
                error_code_counts=dict(self._errors),
                guard_flag_counts=dict(self._flags),
                latency_p50_ms=float(p50),
                latency_p95_ms=float(p95),
                latency_p99_ms=float(p99),
                last_drift_score=self._last_drift,
            )


class _ModelRuntime:
    """Per-model mutable state: the drift window and its ingest lock."""

    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        size = cfg.reference_stats.window_size if cfg.reference_stats is not None else 1
        self.window = DriftWindow(size)

    def model_fn(self) -> Callable[[np.ndarray], np.ndarray]:
        backend = self.cfg.backend
        if isinstance(backend, RemoteBackend):
            num_classes = self.cfg.contract.num_classes

            def remote_fn(X: np.ndarray) -> np.ndarray:
                return np.vstack([remote_infer(backend, row, num_classes) for row in np.atleast_2d(X)])

            return remote_fn
        return backend.logits_batch


class Gateway:
    """Owns the guarded models, the metrics, and the structured audit log."""

    def __init__(self, config: GatewayConfig, log_sink: Optional[LogSink] = None):
        self.config = config
        self.models = {m.contract.model_id: _ModelRuntime(m) for m in config.models}
        self.metrics = Metrics()
        self._log_sink: LogSink = log_sink if log_sink is not None else _default_log_sink

    # -- logging ---------------------------------------------------------

    def _log_report(self, request_id: str, report: GuardReport) -> None:
        record = {
            "request_id": request_id,
            "guard_name": report.guard_name.value,
            "verdict": report.verdict.value,
            "score": report.score,
            "threshold": report.threshold,
            "internal_detail": report.internal_detail,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        }
        if report.guard_name is GuardName.ADVERSARIAL and report.verdict is Verdict.FLAG:
            record["internal_code"] = INTERNAL_ADVERSARIAL_CODE
        self._log_sink(record)

    # -- pipeline --------------------------------------------------------

    def handle_predict(
        self,
        model_id: str,
        features: object,
        request_id: Optional[str] = None,
    ) -> ResponseEnvelope:
        """Run the full guard pipeline and always return an envelope."""
        t0 = time.perf_counter()
        rid = request_id if request_id else uuid.uuid4().hex
        trace: list[GuardReport] = []

        def finish(outcome: Outcome) -> ResponseEnvelope:
            latency = (time.perf_counter() - t0) * 1000.0
            envelope = build_envelope(rid, outcome, latency, trace)
            for report in trace:
                if report.verdict in (Verdict.FLAG, Verdict.ERROR):
                    self._log_report(rid, report)
            self.metrics.record(envelope)
            return envelope

        runtime = self.models.get(model_id)
        if runtime is None:
            latency = (time.perf_counter() - t0) * 1000.0
            envelope = ResponseEnvelope(
                request_id=rid,
                status_code=404,
                message=f"unknown model {model_id!r}",
                latency_ms=latency,
                error_code=ErrorCode.E_VALIDATION,
            )
            self.metrics.record(envelope)
            return envelope

        cfg = runtime.cfg
        try:
            x, shape_error = _coerce_features(features, cfg.contract.input_dim)
            if shape_error is not None:
                trace.append(shape_error)
                return finish(GuardFailure(shape_error))

            if cfg.guards.validation:
                report = validate(x, cfg.contract)
                trace.append(report)
                if report.verdict is Verdict.FLAG:
                    return finish(GuardFailure(report))

            if cfg.guards.adversarial:
                assert cfg.detector is not None
                report = detect(cfg.detector, x)
                trace.append(report)
                if report.verdict is Verdict.FLAG:
                    return finish(GuardFailure(report))

            if cfg.guards.drift:
                assert cfg.reference_stats is not None
                # With validation disabled, malformed vectors may get this
                # far; never let them poison the window.
                if x.shape == (cfg.contract.input_dim,) and bool(np.all(np.isfinite(x))):
                    runtime.window.ingest(x)
                    report = drift_check(runtime.window, cfg.reference_stats)
                else:
                    report = GuardReport(
                        guard_name=GuardName.DRIFT,
                        verdict=Verdict.SKIPPED,
                        internal_detail="drift check skipped: input failed shape/finiteness",
                        external_message="drift check skipped",
                    )
                trace.append(report)
                if report.verdict is Verdict.FLAG and cfg.drift_mode == "enforce":
                    return finish(GuardFailure(report))

            try:
                logits = predict(cfg.backend, x, num_classes=cfg.contract.num_classes)
            except BackendError as exc:
                return finish(BackendFailure(str(exc)))

            probs = softmax(logits, cfg.contract.temperature)

            if cfg.guards.ood:
                assert cfg.reference_stats is not None
                report = ood_verdict(
                    logits, probs, cfg.reference_stats.thresholds, cfg.contract.temperature
                )
                trace.append(report)
                if report.verdict is Verdict.FLAG:
                    return finish(GuardFailure(report))

            top = int(np.argmax(probs))
            prediction = Prediction(
                label=cfg.contract.class_labels[top],
                index=top,
                confidence=float(probs[top]),
            )

            explanation = None
            if cfg.guards.explanation:
                explanation = self._explain(runtime, x, top, trace)

            return finish(Success(prediction=prediction, explanation=explanation))
        except Exception as exc:  # the handler never raises to the transport
            logging.getLogger(__name__).exception("internal fault handling %s", rid)
            return finish(InternalFailure(f"{type(exc).__name__}: {exc}"))

    def _explain(
        self,
        runtime: _ModelRuntime,
        x: np.ndarray,
        target: int,
        trace: list[GuardReport],
    ) -> Optional[tuple[tuple[int, float], ...]]:
        """Attach attributions; a failure here downgrades to 'no explanation'."""
        cfg = runtime.cfg
        settings = cfg.explanation
        assert cfg.reference_stats is not None and cfg.reference_stats.background is not None
        try:
            if settings.method == "exact":
                result = exact_shapley(runtime.model_fn(), x, cfg.reference_stats.background, target)
            else:
                result = kernel_shap(
                    runtime.model_fn(),
                    x,
                    cfg.reference_stats.background,
                    target,
                    n_samples=settings.n_samples,
                    seed=settings.seed,
                )
            trace.append(
                GuardReport(
                    guard_name=GuardName.EXPLAINABILITY,
                    verdict=Verdict.PASS,
                    internal_detail=(
                        f"{result.method} explanation over {result.n_coalitions} coalitions; "
                        f"base {result.base_value:.6f}"
                        + ("; ridge fallback" if result.ridge_fallback else "")
                    ),
                    external_message=f"explanation attached ({result.method})",
                )
            )
            return result.pairs()
        except Exception as exc:
            trace.append(
                GuardReport(
                    guard_name=GuardName.EXPLAINABILITY,
                    verdict=Verdict.ERROR,
                    internal_detail=f"explanation failed: {type(exc).__name__}: {exc}",
                    external_message="explanation unavailable",
                )
            )
            return None

    def health(self) -> dict:
        return {"status": "ok", "models": sorted(self.models)}


def _coerce_features(features: object, input_dim: int) -> tuple[np.ndarray, Optional[GuardReport]]:
    """Turn the request payload into a 1-d float vector or a validation flag.

    Arity and finiteness stay with the validation guard; this only rejects
    payloads that are not a flat numeric array at all.
    """
    if isinstance(features, np.ndarray) and features.ndim == 1:
        return features.astype(float), None
    if isinstance(features, (list, tuple)) and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in features
    ):
        return np.asarray(features, dtype=float), None
    report = GuardReport(
        guard_name=GuardName.VALIDATION,
        verdict=Verdict.FLAG,
        internal_detail=f"malformed request body: features must be a flat numeric array "
        f"of length {input_dim}, got {type(features).__name__}",
        external_message='malformed request body: "features" must be a flat numeric array',
    )
    return np.empty(0), report


def create_app(gateway: Gateway) -> FastAPI:
    """FastAPI app exposing the wire surface of the gateway."""
    app = FastAPI(title="railgate", docs_url=None, redoc_url=None)

    @app.post("/v1/models/{model_id}/predict")
    async def predict_endpoint(model_id: str, request: Request) -> Response:
        raw = await request.body()
        envelope = await run_in_threadpool(_handle_raw, gateway, model_id, raw)
        return JSONResponse(content=envelope.to_dict(), status_code=envelope.status_code)

    @app.get("/v1/metrics")
    async def metrics_endpoint() -> Response:
        return JSONResponse(content=gateway.metrics.snapshot().to_dict())

    @app.get("/healthz")
    async def health_endpoint() -> Response:
        return JSONResponse(content=gateway.health())

    return app


def _handle_raw(gateway: Gateway, model_id: str, raw: bytes) -> ResponseEnvelope:
    # json.loads accepts NaN/Infinity literals; they then fail the
    # finiteness check and produce a proper validation envelope.
    request_id = None
    try:
        body = json.loads(raw.decode("utf-8") if raw else "")
        features = body["features"] if isinstance(body, dict) else None
        if isinstance(body, dict) and isinstance(body.get("request_id"), str):
            request_id = body["request_id"]
    except (ValueError, KeyError):
        features = None
    return gateway.handle_predict(model_id, features, request_id=request_id)
