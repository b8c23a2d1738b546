"""Inference backends the gateway guards.

Two builtin analytic model kinds (multinomial logistic regression and a
two-layer ReLU MLP) expose logits *and* input gradients, which is what the
attack generator needs. Remote backends speak a tiny wire protocol
(``POST /infer`` with ``{"features": [...]}`` returning ``{"logits": [...]}``)
and are logit-only: gradient-based operations refuse them.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import httpx
import numpy as np

from .core import (
    BackendError,
    ConfigError,
    ModelFormatError,
    UnsupportedOperationError,
    softmax,
)

logger = logging.getLogger(__name__)

# One process-wide connection pool; httpx.Client is thread-safe and the
# timeout is still enforced per request.
_http = httpx.Client()

__all__ = [
    "LogisticModel",
    "Mlp2Model",
    "BuiltinModel",
    "RemoteBackend",
    "BackendRef",
    "predict",
    "loss_gradient",
    "cross_entropy",
    "fit_logistic",
    "remote_infer",
    "save_model",
    "load_model",
]


@dataclass(frozen=True)
class LogisticModel:
    """Multinomial logistic regression: logits = W x + b."""

    weights: np.ndarray  # (num_classes, input_dim)
    bias: np.ndarray  # (num_classes,)

    kind = "logistic_regression"

    def __post_init__(self) -> None:
        W = np.asarray(self.weights, dtype=float)
        b = np.asarray(self.bias, dtype=float)
        if W.ndim != 2 or b.ndim != 1 or W.shape[0] != b.shape[0]:
            raise ModelFormatError("logistic model needs W (K,d) and b (K,)")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise ModelFormatError("model weights must be finite")
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "bias", b)

    @property
    def input_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self.weights @ np.asarray(x, dtype=float) + self.bias

    def logits_batch(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.weights.T + self.bias


@dataclass(frozen=True)
class Mlp2Model:
    """Two-layer ReLU MLP: logits = W2 relu(W1 x + b1) + b2."""

    w1: np.ndarray  # (hidden, input_dim)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (num_classes, hidden)
    b2: np.ndarray  # (num_classes,)

    kind = "mlp2"

    def __post_init__(self) -> None:
        arrs = {}
        for name in ("w1", "b1", "w2", "b2"):
            a = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(a)):
                raise ModelFormatError("model weights must be finite")
            arrs[name] = a
        if (
            arrs["w1"].ndim != 2
            or arrs["b1"].shape != (arrs["w1"].shape[0],)
            or arrs["w2"].ndim != 2
            or arrs["w2"].shape[1] != arrs["w1"].shape[0]
            or arrs["b2"].shape != (arrs["w2"].shape[0],)
        ):
            raise ModelFormatError("mlp2 weight shapes are inconsistent")
        for name, a in arrs.items():
            object.__setattr__(self, name, a)

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def num_classes(self) -> int:
        return self.w2.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[0]

    def logits(self, x: np.ndarray) -> np.ndarray:
        h = np.maximum(self.w1 @ np.asarray(x, dtype=float) + self.b1, 0.0)
        return self.w2 @ h + self.b2

    def logits_batch(self, X: np.ndarray) -> np.ndarray:
        H = np.maximum(np.asarray(X, dtype=float) @ self.w1.T + self.b1, 0.0)
        return H @ self.w2.T + self.b2


BuiltinModel = Union[LogisticModel, Mlp2Model]


@dataclass(frozen=True)
class RemoteBackend:
    """A remote inference endpoint speaking the /infer wire protocol."""

    endpoint: str
    timeout_ms: float = 1000.0

    def __post_init__(self) -> None:
        if not self.timeout_ms > 0:
            raise ConfigError("remote backend timeout_ms must be positive")


BackendRef = Union[LogisticModel, Mlp2Model, RemoteBackend]


def predict(backend: BackendRef, x: Sequence[float] | np.ndarray, num_classes: Optional[int] = None) -> np.ndarray:
    """Compute logits for a single validated input.

    For builtin models this is pure linear algebra; for remote backends it
    performs one wire-protocol call and validates arity/finiteness of the
    response (``num_classes`` is required there so a malformed backend can
    never masquerade as a success).
    """
    if isinstance(backend, RemoteBackend):
        if num_classes is None:
            raise ConfigError("predict over a remote backend needs num_classes")
        return remote_infer(backend, x, num_classes)
    return backend.logits(np.asarray(x, dtype=float))


def cross_entropy(model: BuiltinModel, X: np.ndarray, y: np.ndarray) -> float:
    """Mean cross-entropy of a builtin model on labeled data."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    logp = np.log(softmax(model.logits_batch(X)) + 1e-300)
    return float(-logp[np.arange(len(y)), y].mean())


def loss_gradient(model: BuiltinModel, x: Sequence[float] | np.ndarray, y: int) -> np.ndarray:
    """Gradient of the cross-entropy loss w.r.t. the input x.

    For logistic regression: W^T (softmax(Wx+b) - onehot(y)). For the MLP
    the chain rule runs through ReLU with subgradient 0 at exactly 0 (this
    convention decides attack signs at dead units).

    Raises:
        UnsupportedOperationError: for remote backends.
    """
    if isinstance(model, RemoteBackend):
        raise UnsupportedOperationError("remote backends do not expose gradients")
    x = np.asarray(x, dtype=float)
    if not 0 <= y < model.num_classes:
        raise ValueError(f"class index {y} out of range")
    err = softmax(model.logits(x))
    err[y] -= 1.0
    if isinstance(model, LogisticModel):
        return model.weights.T @ err
    pre = model.w1 @ x + model.b1
    mask = (pre > 0).astype(float)
    return model.w1.T @ (mask * (model.w2.T @ err))


def fit_logistic(
    X: np.ndarray,
    y: np.ndarray,
    learning_rate: float = 0.5,
    epochs: int = 400,
    seed: int = 0,
    num_classes: Optional[int] = None,
    callback: Optional[Callable[[int, float], None]] = None,
) -> LogisticModel:
    """Fit a logistic model by full-batch gradient descent on mean cross-entropy.

    Deterministic: weights start at zero and the batch order is fixed, so
    the result does not actually depend on ``seed`` (the parameter is kept
    for CLI symmetry with the seeded commands). ``callback(epoch, loss)``
    receives the pre-step loss each epoch; it is also logged at DEBUG so a
    run log can show the loss is non-increasing.

    Raises:
        ConfigError: if fewer than two classes are present in ``y``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or len(X) != len(y):
        raise ConfigError("fit_logistic needs X (n,d) and matching labels")
    if not np.all(np.isfinite(X)):
        raise ConfigError("training data must be finite")
    present = np.unique(y)
    if len(present) < 2:
        raise ConfigError("training data must contain at least two classes")
    K = int(num_classes if num_classes is not None else present.max() + 1)
    n, d = X.shape
    W = np.zeros((K, d))
    b = np.zeros(K)
    onehot = np.eye(K)[y]
    for epoch in range(epochs):
        P = softmax(X @ W.T + b)
        loss = float(-np.log(P[np.arange(n), y] + 1e-300).mean())
        if callback is not None:
            callback(epoch, loss)
        logger.debug("fit_logistic epoch %d loss %.6f", epoch, loss)
        G = (P - onehot) / n
        W = W - learning_rate * (G.T @ X)
        b = b - learning_rate * G.sum(axis=0)
    return LogisticModel(weights=W, bias=b)


def remote_infer(backend: RemoteBackend, x: Sequence[float] | np.ndarray, num_classes: int) -> np.ndarray:
    """POST the feature vector to a remote backend and validate the logits.

    Any transport failure, non-200 status, wrong arity or non-finite value
    maps to BackendError; the gateway turns that into a 502/E_BACKEND
    envelope, never a silent success.
    """
    body = {"features": [float(v) for v in np.asarray(x, dtype=float)]}
    url = backend.endpoint.rstrip("/") + "/infer"
    try:
        resp = _http.post(url, json=body, timeout=backend.timeout_ms / 1000.0)
    except httpx.HTTPError as exc:
        raise BackendError(f"backend request failed: {exc}") from exc
    if resp.status_code != 200:
        raise BackendError(f"backend returned HTTP {resp.status_code}")
    try:
        payload = resp.json()
    except ValueError as exc:
        raise BackendError("backend returned non-JSON body") from exc
    logits = payload.get("logits") if isinstance(payload, dict) else None
    if not isinstance(logits, list):
        raise BackendError("backend response missing 'logits' array")
    if len(logits) != num_classes:
        raise BackendError(
            f"backend returned {len(logits)} logits, contract expects {num_classes}"
        )
    try:
        arr = np.asarray([float(v) for v in logits], dtype=float)
    except (TypeError, ValueError) as exc:
        raise BackendError("backend returned non-numeric logits") from exc
    if not np.all(np.isfinite(arr)):
        raise BackendError("backend returned non-finite logits")
    return arr


def _model_to_dict(model: BuiltinModel) -> dict:
    if isinstance(model, LogisticModel):
        return {
            "kind": model.kind,
            "input_dim": model.input_dim,
            "num_classes": model.num_classes,
            "weights": model.weights.tolist(),
            "bias": model.bias.tolist(),
        }
    return {
        "kind": model.kind,
        "input_dim": model.input_dim,
        "hidden_dim": model.hidden_dim,
        "num_classes": model.num_classes,
        "w1": model.w1.tolist(),
        "b1": model.b1.tolist(),
        "w2": model.w2.tolist(),
        "b2": model.b2.tolist(),
    }


def _model_from_dict(doc: dict, path: str = "<memory>") -> BuiltinModel:
    try:
        kind = doc["kind"]
        if kind == "logistic_regression":
            model: BuiltinModel = LogisticModel(
                weights=np.asarray(doc["weights"], dtype=float),
                bias=np.asarray(doc["bias"], dtype=float),
            )
        elif kind == "mlp2":
            model = Mlp2Model(
                w1=np.asarray(doc["w1"], dtype=float),
                b1=np.asarray(doc["b1"], dtype=float),
                w2=np.asarray(doc["w2"], dtype=float),
                b2=np.asarray(doc["b2"], dtype=float),
            )
        else:
            raise ModelFormatError(f"{path}: unknown model kind {kind!r}")
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: malformed model document ({exc})") from exc
    # Declared dims must agree with the arrays; catches truncated/edited files.
    if model.input_dim != int(doc["input_dim"]) or model.num_classes != int(doc["num_classes"]):
        raise ModelFormatError(f"{path}: declared dims do not match weight arrays")
    if kind == "mlp2" and model.hidden_dim != int(doc["hidden_dim"]):
        raise ModelFormatError(f"{path}: declared hidden_dim does not match w1")
    return model


def save_model(model: BuiltinModel, path: str | os.PathLike) -> None:
    """Write the JSON model document (values round-trip bit-exactly)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_model_to_dict(model), fh)
        fh.write("\n")


def load_model(path: str | os.PathLike) -> BuiltinModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ModelFormatError(f"cannot read model file {path}: {exc}") from exc
    except ValueError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ModelFormatError(f"{path}: model document must be a JSON object")
    return _model_from_dict(doc, str(path))
