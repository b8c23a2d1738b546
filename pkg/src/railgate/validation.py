"""Input validation guard: the first pipeline stage.

Checks run in a fixed order (arity, finiteness, range, then the image
checks when the contract declares an image_spec) and the guard flags on the
first category that fails, listing every finding of that category. Messages
name the specific index or field, because "invalid input" on its own helps
nobody.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import GuardName, GuardReport, ModelContract, Verdict

__all__ = ["ValidationFinding", "validate"]

# Category order is part of the contract: the earliest failing category wins.
CHECK_ORDER = ("arity", "finiteness", "range", "image_dims", "contrast", "resolution")


@dataclass(frozen=True)
class ValidationFinding:
    check: str  # one of CHECK_ORDER
    detail: str
    feature_index: Optional[int] = None

    def __post_init__(self) -> None:
        if self.check not in CHECK_ORDER:
            raise ValueError(f"unknown check {self.check!r}")
        if self.check in ("finiteness", "range") and self.feature_index is None:
            raise ValueError(f"{self.check} findings must carry a feature_index")


def _arity_findings(x: np.ndarray, contract: ModelContract) -> list[ValidationFinding]:
    if x.ndim != 1 or len(x) != contract.input_dim:
        return [
            ValidationFinding(
                check="arity",
                detail=f"expected {contract.input_dim} features, got {x.size}",
            )
        ]
    return []


def _finiteness_findings(x: np.ndarray) -> list[ValidationFinding]:
    out = []
    for i in np.flatnonzero(~np.isfinite(x)):
        out.append(
            ValidationFinding(
                check="finiteness",
                feature_index=int(i),
                detail=f"non-finite value {float(x[i])!r} at index {int(i)}",
            )
        )
    return out


def _range_findings(x: np.ndarray, contract: ModelContract) -> list[ValidationFinding]:
    out = []
    if contract.feature_ranges is not None:
        for i, (lo, hi) in enumerate(contract.feature_ranges):
            if not lo <= x[i] <= hi:
                out.append(
                    ValidationFinding(
                        check="range",
                        feature_index=i,
                        detail=f"value {x[i]:g} at index {i} outside [{lo:g}, {hi:g}]",
                    )
                )
    elif contract.image_spec is not None:
        lo, hi = contract.image_spec.value_range
        for i in np.flatnonzero((x < lo) | (x > hi)):
            out.append(
                ValidationFinding(
                    check="range",
                    feature_index=int(i),
                    detail=f"pixel {x[i]:g} at index {int(i)} outside [{lo:g}, {hi:g}]",
                )
            )
    return out


def _image_findings(x: np.ndarray, contract: ModelContract) -> list[list[ValidationFinding]]:
    """Image categories in order: dims, contrast, resolution."""
    spec = contract.image_spec
    assert spec is not None
    dims: list[ValidationFinding] = []
    expected = spec.height * spec.width * spec.channels
    if x.size != expected:
        dims.append(
            ValidationFinding(
                check="image_dims",
                detail=(
                    f"value count {x.size} does not match declared "
                    f"{spec.height}x{spec.width}x{spec.channels}={expected}"
                ),
            )
        )
    contrast: list[ValidationFinding] = []
    measured = float(np.std(x)) if x.size else 0.0
    if measured < spec.min_contrast:
        contrast.append(
            ValidationFinding(
                check="contrast",
                detail=(
                    f"contrast (pixel std) {measured:g} below declared "
                    f"minimum {spec.min_contrast:g}"
                ),
            )
        )
    resolution: list[ValidationFinding] = []
    if spec.min_resolution is not None and spec.height * spec.width < spec.min_resolution:
        resolution.append(
            ValidationFinding(
                check="resolution",
                detail=(
                    f"resolution {spec.height}x{spec.width}="
                    f"{spec.height * spec.width}px below minimum {spec.min_resolution}px"
                ),
            )
        )
    return [dims, contrast, resolution]


def validate(x: Sequence[float] | np.ndarray, contract: ModelContract) -> GuardReport:
    """Run the validation checks and report pass or the first failing category.

    The input is never mutated; on a pass, downstream guards may assume
    correct arity, finite values and in-range features.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))

    categories: list[list[ValidationFinding]] = [_arity_findings(x, contract)]
    if not categories[0]:
        categories.append(_finiteness_findings(x))
        if not categories[1]:
            categories.append(_range_findings(x, contract))
            if contract.image_spec is not None:
                categories.extend(_image_findings(x, contract))

    for findings in categories:
        if findings:
            lines = "; ".join(f.detail for f in findings)
            return GuardReport(
                guard_name=GuardName.VALIDATION,
                verdict=Verdict.FLAG,
                internal_detail=f"{findings[0].check} check failed: {lines}",
                external_message=f"input validation failed ({findings[0].check}): {lines}",
            )
    return GuardReport(
        guard_name=GuardName.VALIDATION,
        verdict=Verdict.PASS,
        internal_detail="all validation checks passed",
        external_message="input validation passed",
    )
