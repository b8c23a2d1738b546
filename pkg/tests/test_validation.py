"""Input validation guard tests."""

import numpy as np
import pytest

from railgate.core import GuardName, ImageSpec, ModelContract, Verdict
from railgate.validation import ValidationFinding, validate


@pytest.fixture
def plain_contract():
    return ModelContract(
        model_id="m",
        input_dim=4,
        num_classes=2,
        class_labels=("a", "b"),
        feature_ranges=((0.0, 1.0),) * 4,
    )


@pytest.fixture
def image_contract():
    return ModelContract(
        model_id="img",
        input_dim=12,
        num_classes=2,
        class_labels=("a", "b"),
        image_spec=ImageSpec(
            height=2, width=2, channels=3, min_contrast=0.05, value_range=(0.0, 1.0),
            min_resolution=4,
        ),
    )


def test_pass_verdict(plain_contract):
    report = validate([0.1, 0.2, 0.3, 0.4], plain_contract)
    assert report.verdict is Verdict.PASS
    assert report.guard_name is GuardName.VALIDATION


def test_arity_flag_names_lengths(plain_contract):
    report = validate([0.1, 0.2, 0.3], plain_contract)
    assert report.verdict is Verdict.FLAG
    assert "expected 4" in report.external_message
    assert "got 3" in report.external_message


def test_nan_flag_names_index(plain_contract):
    report = validate([0.1, 0.2, np.nan, 0.4], plain_contract)
    assert report.verdict is Verdict.FLAG
    assert "finiteness" in report.external_message
    assert "index 2" in report.external_message


def test_range_flag_names_index_and_bounds(plain_contract):
    report = validate([0.1, 1.5, 0.3, 0.4], plain_contract)
    assert report.verdict is Verdict.FLAG
    assert "index 1" in report.external_message
    assert "[0, 1]" in report.external_message


def test_range_is_closed_interval(plain_contract):
    assert validate([0.0, 1.0, 0.5, 0.5], plain_contract).verdict is Verdict.PASS


def test_first_category_wins_and_lists_all_of_it(plain_contract):
    # NaN at 0 and 3 (finiteness), plus out-of-range at 1: only finiteness reported, both entries
    report = validate([np.nan, 7.0, 0.5, np.nan], plain_contract)
    assert report.verdict is Verdict.FLAG
    assert "finiteness" in report.external_message
    assert "index 0" in report.external_message
    assert "index 3" in report.external_message
    assert "range" not in report.external_message


def test_input_not_mutated(plain_contract):
    x = np.array([0.1, 0.2, np.nan, 0.4])
    before = x.copy()
    validate(x, plain_contract)
    np.testing.assert_array_equal(np.isnan(x), np.isnan(before))


def test_constant_image_flags_contrast(image_contract):
    report = validate(np.full(12, 0.5), image_contract)
    assert report.verdict is Verdict.FLAG
    assert "contrast" in report.external_message
    assert "0" in report.external_message  # measured std

def test_contrasty_image_passes(image_contract):
    rng = np.random.default_rng(0)
    report = validate(rng.uniform(0.0, 1.0, 12), image_contract)
    assert report.verdict is Verdict.PASS


def test_image_pixel_range_flag(image_contract):
    x = np.full(12, 0.5)
    x[7] = 1.5
    report = validate(x, image_contract)
    assert report.verdict is Verdict.FLAG
    assert "index 7" in report.external_message


def test_image_resolution_flag():
    contract = ModelContract(
        model_id="img",
        input_dim=4,
        num_classes=2,
        class_labels=("a", "b"),
        image_spec=ImageSpec(height=2, width=2, channels=1, min_resolution=9),
    )
    report = validate([0.1, 0.9, 0.2, 0.8], contract)
    assert report.verdict is Verdict.FLAG
    assert "resolution" in report.external_message


def test_image_dims_check_fires_when_contract_disagrees():
    # contract input_dim matches x but the declared image geometry does not
    contract = ModelContract(
        model_id="img",
        input_dim=5,
        num_classes=2,
        class_labels=("a", "b"),
        image_spec=ImageSpec(height=2, width=2, channels=1),
    )
    report = validate([0.1, 0.9, 0.2, 0.8, 0.5], contract)
    assert report.verdict is Verdict.FLAG
    assert "image_dims" in report.internal_detail


def test_finding_constraints():
    with pytest.raises(ValueError):
        ValidationFinding(check="finiteness", detail="missing index")
    with pytest.raises(ValueError):
        ValidationFinding(check="bogus", detail="x")
