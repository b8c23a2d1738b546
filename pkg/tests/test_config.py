"""Gateway config loading and artifact validation."""

import json

import numpy as np
import pytest

from railgate.adversarial import save_detector
from railgate.config import ExplanationSettings, load_config
from railgate.core import ConfigError
from railgate.models import save_model
from tests.conftest import two_gaussian
from railgate.adversarial import AdvDetector
from railgate.models import LogisticModel
from railgate.ood import fit_reference_stats


@pytest.fixture
def artifacts(tmp_path, ood_stack):
    save_model(ood_stack.model, tmp_path / "model.json")
    detector = AdvDetector(
        model=LogisticModel(weights=np.zeros((2, 2)), bias=np.zeros(2)), tau=0.6
    )
    save_detector(detector, tmp_path / "detector.json")
    ood_stack.stats.save(tmp_path / "stats.json")
    return tmp_path


def write_config(tmp_path, entry_overrides=None, listen=None):
    entry = {
        "contract": {
            "model_id": "demo",
            "input_dim": 2,
            "num_classes": 2,
            "class_labels": ["neg", "pos"],
            "temperature": 1.0,
        },
        "backend": {"builtin": "model.json"},
        "drift_mode": "monitor",
        "adv_detector": "detector.json",
        "reference_stats": "stats.json",
        "explanation": {"method": "exact", "n_samples": 64, "seed": 0},
    }
    entry.update(entry_overrides or {})
    doc = {"models": [entry]}
    if listen:
        doc["listen"] = listen
    path = tmp_path / "gateway.json"
    path.write_text(json.dumps(doc))
    return path


def test_load_full_config(artifacts):
    cfg = load_config(write_config(artifacts, listen={"host": "0.0.0.0", "port": 9000}))
    assert cfg.host == "0.0.0.0" and cfg.port == 9000
    model = cfg.models[0]
    assert model.contract.model_id == "demo"
    assert model.detector is not None
    assert model.reference_stats is not None
    assert model.explanation == ExplanationSettings(method="exact", n_samples=64, seed=0)


def test_relative_paths_resolve_against_config_dir(artifacts, monkeypatch, tmp_path_factory):
    elsewhere = tmp_path_factory.mktemp("elsewhere")
    monkeypatch.chdir(elsewhere)
    cfg = load_config(write_config(artifacts))
    assert cfg.models[0].contract.model_id == "demo"


def test_enabled_adversarial_guard_requires_detector(artifacts):
    path = write_config(artifacts, {"adv_detector": None})
    with pytest.raises(ConfigError, match="adversarial guard"):
        load_config(path)


def test_enabled_ood_guard_requires_stats(artifacts):
    path = write_config(artifacts, {"reference_stats": None})
    with pytest.raises(ConfigError, match="reference_stats"):
        load_config(path)


def test_disabled_guards_need_no_artifacts(artifacts):
    path = write_config(
        artifacts,
        {
            "adv_detector": None,
            "reference_stats": None,
            "guards": {"adversarial": False, "drift": False, "ood": False, "explanation": False},
        },
    )
    cfg = load_config(path)
    flags = cfg.models[0].guards
    assert flags.validation and not flags.adversarial and not flags.ood


def test_contract_backend_dim_mismatch(artifacts):
    entry = {
        "contract": {
            "model_id": "demo",
            "input_dim": 3,
            "num_classes": 2,
            "class_labels": ["neg", "pos"],
        }
    }
    with pytest.raises(ConfigError, match="do not match"):
        load_config(write_config(artifacts, entry))


def test_temperature_mismatch_with_stats(artifacts):
    entry = {
        "contract": {
            "model_id": "demo",
            "input_dim": 2,
            "num_classes": 2,
            "class_labels": ["neg", "pos"],
            "temperature": 2.0,
        }
    }
    with pytest.raises(ConfigError, match="calibrated at"):
        load_config(write_config(artifacts, entry))


def test_remote_backend_config(artifacts):
    path = write_config(
        artifacts,
        {"backend": {"remote": {"endpoint": "http://127.0.0.1:9999", "timeout_ms": 250}}},
    )
    cfg = load_config(path)
    from railgate.models import RemoteBackend

    backend = cfg.models[0].backend
    assert isinstance(backend, RemoteBackend)
    assert backend.timeout_ms == 250


def test_exact_explanation_rejected_for_wide_models(tmp_path):
    X, y = two_gaussian(n_per_class=60, seed=3)
    wide = np.hstack([X] + [X] * 7)  # 16 features
    rng = np.random.default_rng(0)
    from railgate.models import LogisticModel as LM

    model = LM(weights=rng.normal(size=(2, 16)), bias=np.zeros(2))
    save_model(model, tmp_path / "model.json")
    stats = fit_reference_stats(wide, model.logits_batch(wide), seed=0)
    stats.save(tmp_path / "stats.json")
    entry = {
        "contract": {
            "model_id": "demo",
            "input_dim": 16,
            "num_classes": 2,
            "class_labels": ["neg", "pos"],
        },
        "backend": {"builtin": "model.json"},
        "guards": {"adversarial": False},
        "reference_stats": "stats.json",
        "explanation": {"method": "exact"},
    }
    path = tmp_path / "gateway.json"
    path.write_text(json.dumps({"models": [entry]}))
    with pytest.raises(ConfigError, match="kernel"):
        load_config(path)


def test_unknown_guard_flag_rejected(artifacts):
    with pytest.raises(ConfigError, match="unknown guard"):
        load_config(write_config(artifacts, {"guards": {"waffles": True}}))


def test_missing_config_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/gateway.json")


def test_duplicate_model_ids(artifacts):
    path = write_config(artifacts)
    doc = json.loads(path.read_text())
    doc["models"].append(doc["models"][0])
    path.write_text(json.dumps(doc))
    with pytest.raises(ConfigError, match="duplicate"):
        load_config(path)
