"""Shared fixtures: datasets, fixture models, and a ready-to-serve gateway.

The OOD fixture guards a small hand-built ReLU network whose class margin
is derived from the training data and decays to exactly zero outside the
training band, so confidence-based detectors genuinely see far-away inputs
as out-of-distribution. The adversarial fixture uses a class-imbalanced
two-Gaussian task: balanced symmetric data makes FGSM perturbations
invisible to a linear detector (the clean and perturbed mixtures share
their mean), while imbalance leaves a detectable net shift.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from railgate.adversarial import AdvDetector, fit_adv_detector
from railgate.config import (
    ExplanationSettings,
    GatewayConfig,
    GuardFlags,
    ModelConfig,
)
from railgate.core import ModelContract
from railgate.gateway import Gateway
from railgate.models import LogisticModel, Mlp2Model, fit_logistic
from railgate.ood import ReferenceStats, fit_reference_stats


def two_gaussian(n_per_class=200, means=((-3.0, -3.0), (3.0, 3.0)), sigma=0.5, seed=7):
    """The OOD-fixture dataset: two well-separated Gaussians."""
    rng = np.random.default_rng(seed)
    X0 = rng.normal(means[0], sigma, size=(n_per_class, 2))
    X1 = rng.normal(means[1], sigma, size=(n_per_class, 2))
    X = np.vstack([X0, X1])
    y = np.concatenate([np.zeros(n_per_class, dtype=int), np.ones(n_per_class, dtype=int)])
    return X, y


def band_mlp(X: np.ndarray, y: np.ndarray, margin_scale: float = 2.5) -> Mlp2Model:
    """Two-layer ReLU model separating the classes inside the training band.

    The class margin is margin_scale * (t - center) along the class axis
    t = u.x inside [lo, hi], ramps back down over one half-band on either
    side, and is exactly zero beyond: far-away inputs get uniform softmax.
    """
    mu0, mu1 = X[y == 0].mean(axis=0), X[y == 1].mean(axis=0)
    u = mu1 - mu0
    u = u / np.linalg.norm(u)
    t = X @ u
    lo, hi = float(t.min()) - 1.0, float(t.max()) + 1.0
    band = hi - lo
    anchors = np.array([lo - band / 2, lo, hi, hi + band / 2])
    w1 = np.tile(u, (4, 1))
    b1 = -anchors
    w2 = margin_scale * 0.5 * np.array([[1.0, -2.0, 2.0, -1.0], [-1.0, 2.0, -2.0, 1.0]])
    return Mlp2Model(w1=w1, b1=b1, w2=w2, b2=np.zeros(2))


@dataclass
class OodStack:
    X: np.ndarray
    y: np.ndarray
    X_ood: np.ndarray
    model: Mlp2Model
    stats: ReferenceStats


@pytest.fixture(scope="session")
def ood_stack() -> OodStack:
    X, y = two_gaussian(seed=7)
    rng = np.random.default_rng(8)
    X_ood = rng.normal((12.0, 12.0), 0.5, size=(400, 2))
    model = band_mlp(X, y)
    stats = fit_reference_stats(X, model.logits_batch(X), seed=0)
    return OodStack(X=X, y=y, X_ood=X_ood, model=model, stats=stats)


@dataclass
class AdvStack:
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    model: LogisticModel
    detector: AdvDetector
    epsilon: float


@pytest.fixture(scope="session")
def adv_stack() -> AdvStack:
    # 95:5 class imbalance; see module docstring for why it must be imbalanced.
    rng = np.random.default_rng(3)
    n, frac = 1500, 0.95
    n0 = int(round(frac * n))
    mu1 = np.array([1.0, 1.0]) / np.sqrt(2.0)
    X = np.vstack(
        [rng.normal(0.0, 0.15, size=(n0, 2)), rng.normal(mu1, 0.15, size=(n - n0, 2))]
    )
    y = np.concatenate([np.zeros(n0, dtype=int), np.ones(n - n0, dtype=int)])
    order = rng.permutation(n)
    X, y = X[order], y[order]
    n_train = 900
    model = fit_logistic(X[:n_train], y[:n_train], seed=0)
    detector = fit_adv_detector(model, X[:n_train], y[:n_train], epsilon=0.5, tau=0.6, seed=0)
    return AdvStack(
        X_train=X[:n_train],
        y_train=y[:n_train],
        X_test=X[n_train:],
        y_test=y[n_train:],
        model=model,
        detector=detector,
        epsilon=0.5,
    )


class StubBackendHandler(BaseHTTPRequestHandler):
    """Remote-backend stub: behavior keyed by the class attribute `mode`."""

    mode = "ok"
    logits = [1.0, 2.0]

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        self.rfile.read(length)
        if self.mode == "ok":
            body = json.dumps({"logits": self.logits}).encode()
        elif self.mode == "arity":
            body = json.dumps({"logits": [1.0, 2.0, 3.0]}).encode()
        elif self.mode == "nan":
            body = b'{"logits": [NaN, 1.0]}'
        elif self.mode == "garbage":
            body = b"not json"
        elif self.mode == "error":
            self.send_response(500)
            self.end_headers()
            return
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_backend():
    server = ThreadingHTTPServer(("127.0.0.1", 0), StubBackendHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server, f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()
    StubBackendHandler.mode = "ok"


def make_gateway(
    ood: OodStack,
    *,
    drift_mode: str = "monitor",
    window_size: int = 60,
    detector: AdvDetector | None = None,
    guards: GuardFlags | None = None,
    backend=None,
    explanation: ExplanationSettings | None = None,
    log_sink=None,
) -> Gateway:
    """A fully-armed gateway over the OOD fixture with a small drift window."""
    contract = ModelContract(
        model_id="demo",
        input_dim=2,
        num_classes=2,
        class_labels=("neg", "pos"),
        temperature=1.0,
    )
    stats = fit_reference_stats(
        ood.X, ood.model.logits_batch(ood.X), window_size=window_size, seed=0
    )
    if detector is None:
        # Uniform detector: scores 0.5 everywhere, below tau, so it always passes.
        detector = AdvDetector(
            model=LogisticModel(weights=np.zeros((2, 2)), bias=np.zeros(2)), tau=0.6
        )
    cfg = ModelConfig(
        contract=contract,
        backend=backend if backend is not None else ood.model,
        guards=guards if guards is not None else GuardFlags(),
        drift_mode=drift_mode,
        detector=detector,
        reference_stats=stats,
        explanation=explanation if explanation is not None else ExplanationSettings(),
    )
    return Gateway(GatewayConfig(models=(cfg,), host="127.0.0.1", port=0), log_sink=log_sink)
