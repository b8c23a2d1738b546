"""Gateway configuration: one JSON document describing every guarded model.

Schema (paths are resolved relative to the config file):

    {
      "listen": {"host": "127.0.0.1", "port": 8080},
      "models": [
        {
          "contract": {"model_id": "demo", "input_dim": 2, "num_classes": 2,
                       "class_labels": ["a", "b"], "temperature": 1.0,
                       "feature_ranges": [[lo, hi], ...] | null,
                       "image_spec": {...} | null},
          "backend": {"builtin": "model.json"}
                     | {"remote": {"endpoint": "http://...", "timeout_ms": 1000}},
          "guards": {"validation": true, "adversarial": true, "drift": true,
                     "ood": true, "explanation": true},
          "drift_mode": "monitor" | "enforce",
          "adv_detector": "detector.json",
          "reference_stats": "stats.json",
          "explanation": {"method": "exact" | "kernel",
                          "n_samples": 2048, "seed": 0}
        }
      ]
    }

Loading validates the invariant that every enabled guard has its artifacts:
a missing detector/stats file for an enabled guard is a ConfigError, not a
runtime surprise.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Optional

from .adversarial import AdvDetector, load_detector
from .core import ConfigError, ModelContract
from .explain import EXACT_MAX_FEATURES
from .models import BuiltinModel, RemoteBackend, load_model
from .ood import ReferenceStats

__all__ = ["ExplanationSettings", "GuardFlags", "ModelConfig", "GatewayConfig", "load_config"]

GUARD_KEYS = ("validation", "adversarial", "drift", "ood", "explanation")


@dataclass(frozen=True)
class ExplanationSettings:
    method: str = "exact"
    n_samples: int = 2048
    seed: int = 0

    def __post_init__(self) -> None:
        if self.method not in ("exact", "kernel"):
            raise ConfigError(f"explanation method must be exact|kernel, got {self.method!r}")


@dataclass(frozen=True)
class GuardFlags:
    validation: bool = True
    adversarial: bool = True
    drift: bool = True
    ood: bool = True
    explanation: bool = True


@dataclass(frozen=True)
class ModelConfig:
    """One guarded model with its loaded artifacts."""

    contract: ModelContract
    backend: BuiltinModel | RemoteBackend
    guards: GuardFlags = GuardFlags()
    drift_mode: str = "monitor"
    detector: Optional[AdvDetector] = None
    reference_stats: Optional[ReferenceStats] = None
    explanation: ExplanationSettings = ExplanationSettings()

    def __post_init__(self) -> None:
        if self.drift_mode not in ("monitor", "enforce"):
            raise ConfigError(f"drift_mode must be monitor|enforce, got {self.drift_mode!r}")
        c = self.contract
        if not isinstance(self.backend, RemoteBackend):
            if self.backend.input_dim != c.input_dim or self.backend.num_classes != c.num_classes:
                raise ConfigError(
                    f"model {c.model_id!r}: builtin backend dims "
                    f"({self.backend.input_dim}, {self.backend.num_classes}) do not match "
                    f"contract ({c.input_dim}, {c.num_classes})"
                )
        if self.guards.adversarial:
            if self.detector is None:
                raise ConfigError(f"model {c.model_id!r}: adversarial guard enabled without a detector")
            if self.detector.input_dim != c.input_dim:
                raise ConfigError(f"model {c.model_id!r}: detector input_dim mismatch")
        if self.guards.drift or self.guards.ood or self.guards.explanation:
            if self.reference_stats is None:
                raise ConfigError(
                    f"model {c.model_id!r}: drift/ood/explanation guards need reference_stats"
                )
        stats = self.reference_stats
        if stats is not None:
            if stats.input_dim != c.input_dim:
                raise ConfigError(f"model {c.model_id!r}: reference stats input_dim mismatch")
            if abs(stats.temperature - c.temperature) > 1e-12:
                raise ConfigError(
                    f"model {c.model_id!r}: reference stats were calibrated at "
                    f"T={stats.temperature} but the contract declares T={c.temperature}"
                )
        if self.guards.explanation:
            assert stats is not None
            if stats.background is None or len(stats.background) == 0:
                raise ConfigError(
                    f"model {c.model_id!r}: explanation guard needs background rows "
                    "in the reference stats"
                )
            if self.explanation.method == "exact" and c.input_dim > EXACT_MAX_FEATURES:
                raise ConfigError(
                    f"model {c.model_id!r}: exact explanations support at most "
                    f"{EXACT_MAX_FEATURES} features; configure method=kernel"
                )


@dataclass(frozen=True)
class GatewayConfig:
    models: tuple[ModelConfig, ...]
    host: str = "127.0.0.1"
    port: int = 8080

    def __post_init__(self) -> None:
        ids = [m.contract.model_id for m in self.models]
        if len(ids) != len(set(ids)):
            raise ConfigError("duplicate model_id in config")
        if not self.models:
            raise ConfigError("config must declare at least one model")


def _resolve(base_dir: str, path: str) -> str:
    return path if os.path.isabs(path) else os.path.join(base_dir, path)


def _load_model_entry(entry: dict, base_dir: str) -> ModelConfig:
    try:
        contract = ModelContract.from_dict(entry["contract"])
        backend_spec = entry["backend"]
    except KeyError as exc:
        raise ConfigError(f"model entry missing required key {exc}") from exc

    if "builtin" in backend_spec:
        backend: BuiltinModel | RemoteBackend = load_model(
            _resolve(base_dir, backend_spec["builtin"])
        )
    elif "remote" in backend_spec:
        remote = backend_spec["remote"]
        backend = RemoteBackend(
            endpoint=str(remote["endpoint"]),
            timeout_ms=float(remote.get("timeout_ms", 1000.0)),
        )
    else:
        raise ConfigError(f"model {contract.model_id!r}: backend must be builtin or remote")

    flags = entry.get("guards", {})
    unknown = set(flags) - set(GUARD_KEYS)
    if unknown:
        raise ConfigError(f"model {contract.model_id!r}: unknown guard flags {sorted(unknown)}")
    guards = GuardFlags(**{k: bool(flags.get(k, True)) for k in GUARD_KEYS})

    detector = None
    if entry.get("adv_detector"):
        detector = load_detector(_resolve(base_dir, entry["adv_detector"]))
    stats = None
    if entry.get("reference_stats"):
        stats = ReferenceStats.load(_resolve(base_dir, entry["reference_stats"]))
    explanation = ExplanationSettings(**entry.get("explanation", {}))
    return ModelConfig(
        contract=contract,
        backend=backend,
        guards=guards,
        drift_mode=entry.get("drift_mode", "monitor"),
        detector=detector,
        reference_stats=stats,
        explanation=explanation,
    )


def load_config(path: str | os.PathLike) -> GatewayConfig:
    path = str(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("models"), list):
        raise ConfigError(f"{path}: config must be an object with a models array")
    base_dir = os.path.dirname(os.path.abspath(path))
    listen = doc.get("listen", {})
    models = tuple(_load_model_entry(entry, base_dir) for entry in doc["models"])
    return GatewayConfig(
        models=models,
        host=str(listen.get("host", "127.0.0.1")),
        port=int(listen.get("port", 8080)),
    )
